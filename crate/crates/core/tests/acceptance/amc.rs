use mmwave_core::phy::BlerTable;
use mmwave_core::scenario::{sweep_pathloss, SweepPoint};

use crate::{scenario, Outcome};

/// Relative slack for comparing measured rates at the same MCS; covers the
/// sampling noise of the error rate over about 12 000 TBs.
const RATE_NOISE: f64 = 0.01;

fn sweep(file: &str) -> (Vec<f64>, Vec<SweepPoint>) {
    let s = scenario(file);
    let offsets = s.sweep_offsets.clone();
    let points = sweep_pathloss(&s, &offsets, None).expect("sweep runs");
    (offsets, points)
}

pub fn check() -> Outcome {
    let (offsets, awgn) = sweep("mmwave-amc-test.conf");
    let (_, fading) = sweep("mmwave-amc-test-fading.conf");
    let table = BlerTable::builtin();
    let floor_db = table.curve(0).unwrap().sinr_db_for(0.1);

    let mut issues = Vec::new();
    // Step function: rate and MCS never rise with extra loss; the rate moves
    // only when the MCS does.
    for (i, w) in awgn.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if b.phy_rate_bps > a.phy_rate_bps * (1.0 + RATE_NOISE) {
            issues.push(format!(
                "rate rises between {} and {} dB",
                offsets[i],
                offsets[i + 1]
            ));
        }
        match (a.modal_mcs, b.modal_mcs) {
            (Some(x), Some(y)) if y > x => {
                issues.push(format!("MCS rises at {} dB", offsets[i + 1]))
            }
            (Some(x), Some(y))
                if x == y
                    && x > 0
                    && (b.phy_rate_bps - a.phy_rate_bps).abs() > 0.12 * a.phy_rate_bps =>
            {
                issues.push(format!(
                    "rate changes without an MCS change at {} dB",
                    offsets[i + 1]
                ))
            }
            _ => {}
        }
    }
    let steps = awgn
        .windows(2)
        .filter(|w| w[0].modal_mcs != w[1].modal_mcs)
        .count();

    // Operating points: SINR at or above the MCS 0 target threshold.
    let operating: Vec<&SweepPoint> = awgn
        .iter()
        .filter(|p| p.avg_sinr_db.is_some_and(|s| s >= floor_db))
        .collect();
    let worst_err = operating.iter().map(|p| p.tb_error).fold(0.0, f64::max);
    if worst_err > 0.12 {
        issues.push(format!("TB error {worst_err:.3} above 0.12"));
    }
    // MIESM operating point: the chosen MCS is the highest whose modeled
    // BLER at the measured SINR stays within 10%.
    let mut at_target = 0;
    for p in &operating {
        let (Some(m), Some(s)) = (p.modal_mcs, p.avg_sinr_db) else {
            continue;
        };
        let ok_here = table.bler(m, s).unwrap() <= 0.1 + 1e-9;
        let next_fails = m == 28 || table.bler(m + 1, s).unwrap() > 0.1;
        if ok_here && next_fails {
            at_target += 1;
        } else {
            issues.push(format!(
                "MCS {m} at {s:.2} dB is not the 10% BLER operating point"
            ));
        }
    }

    // Fading never beats AWGN around MCS transitions.
    let mut compared = 0;
    for i in 0..awgn.len() {
        let near_transition = (i > 0 && awgn[i - 1].modal_mcs != awgn[i].modal_mcs)
            || (i + 1 < awgn.len() && awgn[i + 1].modal_mcs != awgn[i].modal_mcs);
        if near_transition && awgn[i].avg_sinr_db.is_some_and(|s| s >= floor_db) {
            compared += 1;
            if fading[i].phy_rate_bps > awgn[i].phy_rate_bps * (1.0 + RATE_NOISE) {
                issues.push(format!(
                    "fading {:.1} Mbps above AWGN {:.1} Mbps at {} dB",
                    fading[i].phy_rate_bps / 1e6,
                    awgn[i].phy_rate_bps / 1e6,
                    offsets[i]
                ));
            }
        }
    }
    let summary = format!(
        "{} offsets, {steps} MCS steps, {} operating points (SINR >= {floor_db:.2} dB) with worst TB error {worst_err:.3}, \
         {at_target} at the 10% BLER point, fading <= AWGN at {compared} transition points",
        awgn.len(),
        operating.len()
    );
    let pass = issues.is_empty();
    Outcome::new(
        "AMC curve",
        pass,
        if pass {
            summary
        } else {
            format!("{summary}; {}", issues.join("; "))
        },
    )
}
