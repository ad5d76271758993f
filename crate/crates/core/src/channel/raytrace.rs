use std::path::Path;

use super::cluster::{ChannelRealization, Subpath};
use crate::engine::SimTime;
use crate::error::{Error, Result};
use crate::scene::ChannelState;

pub const RAYTRACE_HEADER: &str =
    "distance_m,path_id,loss_db,delay_s,aoa_el_rad,aoa_az_rad,aod_el_rad,aod_az_rad";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayPath {
    pub loss_db: f64,
    pub delay_s: f64,
    pub aoa_el: f64,
    pub aoa_az: f64,
    pub aod_el: f64,
    pub aod_az: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayTraceSample {
    pub distance_m: f64,
    pub paths: Vec<RayPath>,
}

impl RayTraceSample {
    /// Combined loss of all paths, dB.
    pub fn total_loss_db(&self) -> f64 {
        let lin: f64 = self
            .paths
            .iter()
            .map(|p| 10f64.powf(-p.loss_db / 10.0))
            .sum();
        -10.0 * lin.log10()
    }

    /// Realization with per-path powers normalized to the combined loss.
    /// Each path becomes its own single-subpath cluster.
    pub fn to_realization(&self, state: ChannelState, now: SimTime) -> Result<ChannelRealization> {
        let subpaths = self
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| Subpath {
                cluster: i,
                index: 0,
                power: 10f64.powf(-p.loss_db / 10.0),
                delay_s: p.delay_s,
                aoa_az: p.aoa_az,
                aoa_el: p.aoa_el,
                aod_az: p.aod_az,
                aod_el: p.aod_el,
            })
            .collect();
        ChannelRealization::from_subpaths(state, now, subpaths)
    }
}

/// Samples ordered by strictly increasing distance along a route.
#[derive(Clone, Debug, PartialEq)]
pub struct RayTraceRoute {
    samples: Vec<RayTraceSample>,
}

impl RayTraceRoute {
    pub fn new(samples: Vec<RayTraceSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::violation("ray-trace route has no samples"));
        }
        if samples
            .windows(2)
            .any(|w| w[1].distance_m <= w[0].distance_m)
        {
            return Err(Error::violation(
                "ray-trace distances must be strictly increasing",
            ));
        }
        if samples.iter().any(|s| s.paths.is_empty()) {
            return Err(Error::violation("ray-trace sample without paths"));
        }
        Ok(RayTraceRoute { samples })
    }

    pub fn samples(&self) -> &[RayTraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the sample nearest `distance`; ties go to the smaller distance.
    pub fn nearest_index(&self, distance: f64) -> usize {
        let i = self.samples.partition_point(|s| s.distance_m < distance);
        if i == 0 {
            return 0;
        }
        if i == self.samples.len() {
            return i - 1;
        }
        let below = distance - self.samples[i - 1].distance_m;
        let above = self.samples[i].distance_m - distance;
        // Slack absorbs decimal rounding, e.g. 10.1 between 10.0 and 10.2.
        if below <= above + 1e-9 {
            i - 1
        } else {
            i
        }
    }

    pub fn lookup(&self, distance: f64) -> &RayTraceSample {
        &self.samples[self.nearest_index(distance)]
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut samples: Vec<RayTraceSample> = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                saw_header = true;
                if line.replace(' ', "") != RAYTRACE_HEADER {
                    return Err(perr(lineno, format!("expected header `{RAYTRACE_HEADER}`")));
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 8 {
                return Err(perr(
                    lineno,
                    format!("expected 8 fields, found {}", fields.len()),
                ));
            }
            let mut v = [0f64; 8];
            for (k, f) in fields.iter().enumerate() {
                v[k] = f
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        perr(
                            lineno,
                            format!("field {} `{f}` is not a finite number", k + 1),
                        )
                    })?;
            }
            if v[0] < 0.0 || v[3] < 0.0 {
                return Err(perr(
                    lineno,
                    "distance and delay must be non-negative".into(),
                ));
            }
            let path = RayPath {
                loss_db: v[2],
                delay_s: v[3],
                aoa_el: v[4],
                aoa_az: v[5],
                aod_el: v[6],
                aod_az: v[7],
            };
            match samples.last_mut() {
                Some(s) if s.distance_m == v[0] => s.paths.push(path),
                Some(s) if s.distance_m > v[0] => {
                    return Err(perr(
                        lineno,
                        format!(
                            "distance {} after {}; samples must ascend",
                            v[0], s.distance_m
                        ),
                    ));
                }
                _ => samples.push(RayTraceSample {
                    distance_m: v[0],
                    paths: vec![path],
                }),
            }
        }
        if samples.is_empty() {
            return Err(perr(0, "ray-trace file contains no samples".into()));
        }
        RayTraceRoute::new(samples)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RAYTRACE_HEADER);
        out.push('\n');
        for s in &self.samples {
            for (i, p) in s.paths.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    s.distance_m, i, p.loss_db, p.delay_s, p.aoa_el, p.aoa_az, p.aod_el, p.aod_az
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample_one_path() {
        let text = format!("{RAYTRACE_HEADER}\n5.0,0,100,1e-8,0,0.5,0,-0.5\n");
        let r = RayTraceRoute::parse(&text, "mem").unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.samples()[0].total_loss_db() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn nearest_ties_to_lower() {
        let text = format!("{RAYTRACE_HEADER}\n10.0,0,90,0,0,0,0,0\n10.2,0,91,0,0,0,0,0\n");
        let r = RayTraceRoute::parse(&text, "mem").unwrap();
        assert_eq!(r.lookup(10.1).distance_m, 10.0);
        assert_eq!(r.lookup(10.15).distance_m, 10.2);
        assert_eq!(r.lookup(0.0).distance_m, 10.0);
        assert_eq!(r.lookup(99.0).distance_m, 10.2);
    }

    #[test]
    fn malformed_row_names_line() {
        let text = format!("{RAYTRACE_HEADER}\n1,0,90,0,0,0,0,0\n2,0,abc,0,0,0,0,0\n");
        match RayTraceRoute::parse(&text, "route.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(RayTraceRoute::parse("", "x").is_err());
        assert!(RayTraceRoute::parse(RAYTRACE_HEADER, "x").is_err());
    }

    #[test]
    fn multi_path_powers_normalized() {
        let text = format!("{RAYTRACE_HEADER}\n1,0,100,0,0,0,0,0\n1,1,103,5e-8,0,1,0,-1\n");
        let r = RayTraceRoute::parse(&text, "mem").unwrap();
        let real = r.samples()[0]
            .to_realization(ChannelState::LoS, SimTime::ZERO)
            .unwrap();
        assert!((real.total_power() - 1.0).abs() < 1e-12);
        assert_eq!(real.clusters.len(), 2);
    }
}
