use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmwave_core::scenario::{run_drops, run_scenario, sweep_pathloss, Scenario};
use mmwave_core::sim::verify_summary;

/// Discrete-event mmWave cellular network simulator.
#[derive(Parser)]
#[command(name = "mmwave-sim", version)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the scenario `output` key or `out/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write all traces plus summary.csv.
    Run { scenario: PathBuf },
    /// Run N drops with seeds seed..seed+N-1 and write the rate CDF.
    Drops {
        scenario: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Repeat a single-user run at each extra pathloss offset (dB).
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        offsets: Option<Vec<f64>>,
    },
    /// Recompute summary.csv from the traces in DIR and check it matches.
    Summary { dir: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> mmwave_core::Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.config.seed = seed;
    }
    Ok(s)
}

fn out_dir(cli_out: &Option<PathBuf>, s: &Scenario) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| s.output.clone())
        .unwrap_or_else(|| Path::new("out").join(&s.config.name))
}

fn execute(cli: Cli) -> mmwave_core::Result<()> {
    match &cli.command {
        Command::Run { scenario } => {
            let s = load(scenario, cli.seed)?;
            let out = out_dir(&cli.out, &s);
            let r = run_scenario(&s, Some(&out))?;
            for (u, rate) in r.summary.per_user_rate_bps.iter().enumerate() {
                println!("user {u}: {:.3} Mbps", rate / 1e6);
            }
            println!(
                "cell throughput: {:.3} Mbps",
                r.summary.cell_throughput_bps / 1e6
            );
            println!("traces written to {}", out.display());
        }
        Command::Drops { scenario, n } => {
            let s = load(scenario, cli.seed)?;
            let out = out_dir(&cli.out, &s);
            let r = run_drops(&s, *n, Some(&out))?;
            for (i, d) in r.drops.iter().enumerate() {
                println!(
                    "drop {i} (seed {}): {:.3} Mbps",
                    d.seed,
                    d.cell_throughput_bps / 1e6
                );
            }
            println!(
                "mean cell throughput: {:.3} Mbps",
                r.mean_cell_throughput_bps / 1e6
            );
            println!(
                "CDF of {} user rates written to {}",
                r.cdf.len(),
                out.join("cdf.csv").display()
            );
        }
        Command::Sweep { scenario, offsets } => {
            let s = load(scenario, cli.seed)?;
            let out = out_dir(&cli.out, &s);
            let offsets = offsets.clone().unwrap_or_else(|| s.sweep_offsets.clone());
            if offsets.is_empty() {
                return Err(mmwave_core::Error::Config {
                    key: "sweep_offsets".into(),
                    message: "no offsets given on the command line or in the scenario".into(),
                });
            }
            let points = sweep_pathloss(&s, &offsets, Some(&out))?;
            for p in &points {
                println!(
                    "offset {:>6.2} dB  sinr {:>8}  rate {:>10.3} Mbps  mcs {:>2}  tb error {:.3}",
                    p.offset_db,
                    p.avg_sinr_db.map_or("-".into(), |v| format!("{v:.2}")),
                    p.phy_rate_bps / 1e6,
                    p.modal_mcs.map_or("-".into(), |m| m.to_string()),
                    p.tb_error
                );
            }
        }
        Command::Summary { dir } => {
            print!("{}", verify_summary(dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
