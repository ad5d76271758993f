//! Every bundled scenario parses and a short slice of it runs.

use std::path::PathBuf;

use mmwave_core::engine::SimTime;
use mmwave_core::scenario::{run_scenario, Scenario};

fn bundled() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conf"))
        .collect();
    v.sort();
    v
}

#[test]
fn bundled_scenarios_load_and_run() {
    let all = bundled();
    assert!(all.len() >= 5);
    for p in all {
        let mut s = Scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        s.config.duration = SimTime::from_millis(50);
        let r = run_scenario(&s, None).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(r.output.events_executed > 0, "{}", p.display());
        assert!(r
            .summary
            .per_user_rate_bps
            .iter()
            .all(|x| x.is_finite() && *x >= 0.0));
    }
}
