use std::time::Instant;

use mmwave_core::scenario::run_drops;

use crate::{scenario, Outcome};

const DROPS: usize = 10;

pub fn check() -> Outcome {
    let s = scenario("mmwave-tdma.conf");
    let t = Instant::now();
    let r = run_drops(&s, DROPS, None).expect("drops run");
    let per_drop_s = t.elapsed().as_secs_f64() / DROPS as f64;

    let mean_cell = r.mean_cell_throughput_bps;
    let mut los = Vec::new();
    let mut per_drop_spread = 0.0_f64;
    for d in &r.drops {
        let l: Vec<f64> = d
            .per_user_rate_bps
            .iter()
            .zip(&d.los_fraction)
            .filter(|(_, &f)| f == 1.0)
            .map(|(&x, _)| x)
            .collect();
        if !l.is_empty() {
            let m = l.iter().sum::<f64>() / l.len() as f64;
            per_drop_spread = l
                .iter()
                .fold(per_drop_spread, |a, x| a.max((x / m - 1.0).abs()));
        }
        los.extend(l);
    }
    let los_mean = los.iter().sum::<f64>() / los.len().max(1) as f64;
    let (lo, hi) = los.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &x| {
        (a.min(x / los_mean), b.max(x / los_mean))
    });
    let los_ok = !los.is_empty() && lo >= 0.85 && hi <= 1.15;

    let cdf = &r.cdf;
    let monotone = cdf.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 > w[0].1)
        && cdf.last().is_some_and(|c| c.1 == 1.0);
    // Plateau: a band 30% wide around the LoS mean holds most LoS users and
    // a sizeable share of all points, so the CDF climbs steeply there.
    let in_band = cdf
        .iter()
        .filter(|(x, _)| (x / los_mean - 1.0).abs() <= 0.15)
        .count();
    let los_in_band = los
        .iter()
        .filter(|x| (*x / los_mean - 1.0).abs() <= 0.15)
        .count();
    let plateau =
        los_in_band as f64 >= 0.8 * los.len() as f64 && in_band as f64 >= 0.15 * cdf.len() as f64;
    let p5 = cdf.iter().find(|c| c.1 >= 0.05).map_or(0.0, |c| c.0);

    let range_ok = (0.6e9..=2.0e9).contains(&mean_cell);
    let runtime_ok = per_drop_s < 300.0;
    Outcome::new(
        "multi-user TDMA",
        range_ok && los_ok && monotone && plateau && runtime_ok,
        format!(
            "mean cell {:.3} Gbps (want 0.6-2.0); {} LoS users, mean {:.1} Mbps, span {:.3}-{:.3} of mean (want within 0.85-1.15; \
             largest deviation inside one drop {:.3}); CDF monotone {monotone}, LoS plateau {plateau} ({los_in_band}/{} LoS, {in_band}/{} points in band); \
             5th percentile {:.1} Mbps; {:.1} s per 10 s drop",
            mean_cell / 1e9,
            los.len(),
            los_mean / 1e6,
            lo,
            hi,
            per_drop_spread,
            los.len(),
            cdf.len(),
            p5 / 1e6,
            per_drop_s
        ),
    )
}
