use std::fs;
use std::path::Path;

use mmwave_core::engine::SimTime;
use mmwave_core::scenario::{run_scenario, Scenario};

use crate::{scenario, Outcome};

fn traces(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn twice(mut s: Scenario, secs: u64) -> Result<usize, String> {
    s.config.duration = SimTime::from_millis(secs * 1000);
    s.config.trace.alloc = true;
    s.config.trace.phy_tb = true;
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_scenario(&s, Some(&a)).map_err(|e| e.to_string())?;
    run_scenario(&s, Some(&b)).map_err(|e| e.to_string())?;
    let (fa, fb) = (traces(&a), traces(&b));
    if fa.len() != fb.len() {
        return Err(format!("{}: file sets differ", s.config.name));
    }
    for ((na, da), (nb, db)) in fa.iter().zip(&fb) {
        if na != nb || da != db {
            return Err(format!("{}: {na} differs between runs", s.config.name));
        }
    }
    Ok(fa.len())
}

pub fn check() -> Outcome {
    let mut detail = Vec::new();
    for (file, secs) in [
        ("mmwave-tcp-building.conf", 3),
        ("mmwave-tdma.conf", 1),
        ("mmwave-sinr-route.conf", 3),
    ] {
        match twice(scenario(file), secs) {
            Ok(n) => detail.push(format!("{file}: {n} files identical")),
            Err(e) => return Outcome::new("determinism", false, e),
        }
    }
    Outcome::new("determinism", true, detail.join(", "))
}
