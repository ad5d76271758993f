//! Python bindings: load and tweak scenarios, run them, sweep them, and
//! reach the channel helpers used to check results.

use std::path::PathBuf;

use mmwave_core::channel::linalg::{CMatrix, C64};
use mmwave_core::channel::{
    pathloss_db as core_pathloss, power_iteration_beamforming, PathlossModel,
    DEFAULT_POWER_ITERATIONS,
};
use mmwave_core::engine::SimTime;
use mmwave_core::scenario::{self as sc, Scenario as CoreScenario};
use mmwave_core::scene::{self, Building, ChannelState, Position};
use mmwave_core::sim::{verify_summary as core_verify, SimOutput};
use mmwave_core::Error;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_state(s: &str) -> PyResult<ChannelState> {
    match s.to_ascii_lowercase().as_str() {
        "los" => Ok(ChannelState::LoS),
        "nlos" => Ok(ChannelState::NLoS),
        "outage" => Ok(ChannelState::Outage),
        _ => Err(PyValueError::new_err(format!(
            "unknown channel state `{s}`"
        ))),
    }
}

/// A parsed scenario file. Seed and duration can be changed before running.
#[pyclass(module = "mmwave", skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        CoreScenario::load(&path)
            .map(|inner| Scenario { inner })
            .map_err(py_err)
    }

    /// Parses scenario text; relative file references resolve against `base`.
    #[staticmethod]
    #[pyo3(signature = (text, base = None))]
    fn parse(text: &str, base: Option<PathBuf>) -> PyResult<Self> {
        let base = base.unwrap_or_else(|| PathBuf::from("."));
        CoreScenario::parse(text, "<string>", &base)
            .map(|inner| Scenario { inner })
            .map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.config.name.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.config.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.config.seed = seed;
    }

    /// Simulated duration in seconds.
    #[getter]
    fn duration(&self) -> f64 {
        self.inner.config.duration.as_secs_f64()
    }

    #[setter]
    fn set_duration(&mut self, secs: f64) -> PyResult<()> {
        if secs.is_nan() || secs <= 0.0 {
            return Err(PyValueError::new_err("duration must be positive"));
        }
        self.inner.config.duration = SimTime::from_secs_f64(secs);
        Ok(())
    }

    /// Number of users at the scenario seed, including random drops.
    #[getter]
    fn num_users(&self) -> PyResult<usize> {
        Ok(self
            .inner
            .build(self.inner.seed())
            .map_err(py_err)?
            .ues
            .len())
    }

    #[getter]
    fn sweep_offsets(&self) -> Vec<f64> {
        self.inner.sweep_offsets.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, seed={}, duration={})",
            self.name(),
            self.seed(),
            self.duration()
        )
    }
}

/// Result of one run. Traces are lists of tuples.
#[pyclass(module = "mmwave", frozen)]
struct RunResult {
    out: SimOutput,
    #[pyo3(get)]
    per_user_rate_bps: Vec<f64>,
    #[pyo3(get)]
    cell_throughput_bps: f64,
    #[pyo3(get)]
    los_fraction: Vec<f64>,
}

#[pymethods]
impl RunResult {
    #[getter]
    fn seed(&self) -> u64 {
        self.out.seed
    }

    #[getter]
    fn events_executed(&self) -> u64 {
        self.out.events_executed
    }

    /// `(time_s, user, state, dl_sinr_db, ul_sinr_db, pathloss_db)` rows.
    fn sinr(&self) -> Vec<(f64, u32, String, f64, f64, f64)> {
        self.out
            .sinr
            .iter()
            .map(|s| {
                (
                    s.time.as_secs_f64(),
                    s.user,
                    s.state.to_string(),
                    s.dl_sinr_db,
                    s.ul_sinr_db,
                    s.pathloss_db,
                )
            })
            .collect()
    }

    /// `(time_s, user, reason, state, pathloss_db)` rows.
    fn channel_events(&self) -> Vec<(f64, u32, String, String, f64)> {
        self.out
            .channel_events
            .iter()
            .map(|e| {
                let reason = format!("{:?}", e.reason).to_lowercase();
                (
                    e.time.as_secs_f64(),
                    e.user,
                    reason,
                    e.state.to_string(),
                    e.pathloss_db,
                )
            })
            .collect()
    }

    /// `(time_s, user, cwnd_bytes, rtt_ms_mean, goodput_mbps, state)` rows.
    fn tcp(&self) -> Vec<(f64, u32, u64, Option<f64>, f64, String)> {
        self.out
            .tcp
            .iter()
            .map(|t| {
                (
                    t.time.as_secs_f64(),
                    t.user,
                    t.cwnd_bytes,
                    t.rtt_ms.map(|r| r.0),
                    t.goodput_mbps,
                    t.state.to_string(),
                )
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(users={}, cell_throughput_bps={:.0})",
            self.per_user_rate_bps.len(),
            self.cell_throughput_bps
        )
    }
}

/// Runs the scenario once. With `out`, traces and `summary.csv` go there.
#[pyfunction]
#[pyo3(signature = (scenario, out = None))]
fn run(py: Python<'_>, scenario: &Scenario, out: Option<PathBuf>) -> PyResult<RunResult> {
    let s = scenario.inner.clone();
    let r = py
        .detach(|| sc::run_scenario(&s, out.as_deref()))
        .map_err(py_err)?;
    Ok(RunResult {
        per_user_rate_bps: r.summary.per_user_rate_bps,
        cell_throughput_bps: r.summary.cell_throughput_bps,
        los_fraction: r.summary.los_fraction,
        out: r.output,
    })
}

/// Runs `n` drops and returns a dict with per-drop rates and the rate CDF.
#[pyfunction]
#[pyo3(signature = (scenario, n, out = None))]
fn run_drops<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    n: usize,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scenario.inner.clone();
    let r = py
        .detach(|| sc::run_drops(&s, n, out.as_deref()))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    let rates: Vec<Vec<f64>> = r
        .drops
        .iter()
        .map(|x| x.per_user_rate_bps.clone())
        .collect();
    let los: Vec<Vec<f64>> = r.drops.iter().map(|x| x.los_fraction.clone()).collect();
    d.set_item("per_user_rate_bps", rates)?;
    d.set_item("los_fraction", los)?;
    d.set_item(
        "cell_throughput_bps",
        r.drops
            .iter()
            .map(|x| x.cell_throughput_bps)
            .collect::<Vec<_>>(),
    )?;
    d.set_item("mean_cell_throughput_bps", r.mean_cell_throughput_bps)?;
    d.set_item("cdf", r.cdf)?;
    Ok(d)
}

/// Single-user pathloss sweep; one dict per offset.
#[pyfunction]
#[pyo3(signature = (scenario, offsets, out = None))]
fn sweep<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    offsets: Vec<f64>,
    out: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let s = scenario.inner.clone();
    let points = py
        .detach(|| sc::sweep_pathloss(&s, &offsets, out.as_deref()))
        .map_err(py_err)?;
    points
        .into_iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("offset_db", p.offset_db)?;
            d.set_item("avg_sinr_db", p.avg_sinr_db)?;
            d.set_item("phy_rate_bps", p.phy_rate_bps)?;
            d.set_item("rlc_rate_bps", p.rlc_rate_bps)?;
            d.set_item("modal_mcs", p.modal_mcs)?;
            d.set_item("tb_count", p.tb_count)?;
            d.set_item("tb_error", p.tb_error)?;
            Ok(d)
        })
        .collect()
}

/// Recomputes `summary.csv` from the traces in `dir`; raises on mismatch.
#[pyfunction]
fn verify_summary(dir: PathBuf) -> PyResult<String> {
    core_verify(&dir).map_err(py_err)
}

/// Default-model pathloss in dB for `state` ("los" or "nlos").
#[pyfunction]
#[pyo3(signature = (distance, state, shadowing_db = 0.0))]
fn pathloss_db(distance: f64, state: &str, shadowing_db: f64) -> PyResult<f64> {
    let st = parse_state(state)?;
    let model = PathlossModel::default();
    let params = model
        .params(st)
        .ok_or_else(|| PyValueError::new_err("pathloss is undefined in outage"))?;
    core_pathloss(distance, st, params, shadowing_db).map_err(py_err)
}

/// LoS/NLoS/outage between two points given buildings as
/// `(xmin, xmax, ymin, ymax, zmin, zmax)` tuples.
#[pyfunction]
#[pyo3(signature = (tx, rx, buildings, outage_distance = 300.0))]
fn channel_state(
    tx: (f64, f64, f64),
    rx: (f64, f64, f64),
    buildings: Vec<[f64; 6]>,
    outage_distance: f64,
) -> PyResult<String> {
    let b = buildings
        .into_iter()
        .map(Building::from_bounds)
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let p = |v: (f64, f64, f64)| Position::new(v.0, v.1, v.2);
    Ok(scene::channel_state(&p(tx), &p(rx), &b, outage_distance).to_string())
}

/// Beamforming gain `|u^H H v|^2` found by power iteration on a complex
/// matrix given as a list of rows.
#[pyfunction]
#[pyo3(signature = (rows, iterations = DEFAULT_POWER_ITERATIONS))]
fn beamforming_gain(rows: Vec<Vec<C64>>, iterations: usize) -> PyResult<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(PyValueError::new_err(
            "matrix rows must be non-empty and equally long",
        ));
    }
    let h = CMatrix::from_fn(r, c, |i, j| rows[i][j]);
    power_iteration_beamforming(&h, iterations)
        .map(|b| b.gain)
        .map_err(py_err)
}

#[pymodule]
fn mmwave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_drops, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(verify_summary, m)?)?;
    m.add_function(wrap_pyfunction!(pathloss_db, m)?)?;
    m.add_function(wrap_pyfunction!(channel_state, m)?)?;
    m.add_function(wrap_pyfunction!(beamforming_gain, m)?)?;
    Ok(())
}
