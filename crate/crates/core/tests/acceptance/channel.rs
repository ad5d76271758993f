use mmwave_core::channel::linalg::{CMatrix, C64};
use mmwave_core::channel::{
    pathloss_db, power_iteration_beamforming, small_scale_gain, PathlossModel, Subpath,
};
use mmwave_core::engine::RngStream;
use mmwave_core::scene::{segment_intersects_box, Building, ChannelState, Position};
use nalgebra::DMatrix;

use crate::Outcome;

fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize, rank: Option<usize>) -> CMatrix {
    match rank {
        None => CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.normal(0.0, 1.0).unwrap(), rng.normal(0.0, 1.0).unwrap())
        }),
        Some(k) => {
            // Sum of a few outer products, like a clustered channel.
            let mut h = CMatrix::zeros(rows, cols);
            for _ in 0..k {
                let a: Vec<C64> = (0..rows)
                    .map(|_| C64::from_polar(1.0, rng.uniform(0.0, 6.3)))
                    .collect();
                let b: Vec<C64> = (0..cols)
                    .map(|_| C64::from_polar(1.0, rng.uniform(0.0, 6.3)))
                    .collect();
                h.add_outer(
                    C64::new(rng.normal(0.0, 1.0).unwrap(), rng.normal(0.0, 1.0).unwrap()),
                    &a,
                    &b,
                );
            }
            h
        }
    }
}

fn svd_gain(h: &CMatrix) -> f64 {
    let m = DMatrix::from_fn(h.rows(), h.cols(), |r, c| h.get(r, c));
    let s = m.singular_values();
    let top = s.iter().cloned().fold(0.0, f64::max);
    top * top
}

fn power_iteration_vs_svd() -> (usize, f64) {
    let mut rng = RngStream::new(2024, "oracle/matrices");
    let shapes = [(16, 64), (4, 4), (1, 8), (8, 1), (16, 16), (64, 16), (3, 7)];
    let mut worst = 0.0_f64;
    let mut bad = 0;
    for i in 0..100 {
        let (r, c) = shapes[i % shapes.len()];
        let rank = if i % 2 == 0 { None } else { Some(1 + i % 4) };
        let h = random_matrix(&mut rng, r, c, rank);
        let got = power_iteration_beamforming(&h, 30).unwrap().gain;
        let want = svd_gain(&h);
        let rel = (got - want).abs() / want;
        worst = worst.max(rel);
        if rel > 1e-6 {
            bad += 1;
        }
    }
    (bad, worst)
}

fn gain_magnitude() -> usize {
    let mut rng = RngStream::new(7, "oracle/phasors");
    let mut bad = 0;
    for _ in 0..10_000 {
        let sp = Subpath {
            cluster: 0,
            index: 0,
            power: rng.uniform(1e-6, 2.0),
            delay_s: rng.uniform(0.0, 1e-6),
            aoa_az: rng.uniform(-3.2, 3.2),
            aoa_el: 0.0,
            aod_az: 0.0,
            aod_el: 0.0,
        };
        let g = small_scale_gain(
            &sp,
            rng.uniform(0.0, 30.0),
            rng.uniform(-5e8, 5e8),
            rng.uniform(0.0, 300.0),
            sp.aoa_az,
        );
        // Polar construction: the modulus equals sqrt(P) up to the rounding of cos/sin.
        if (g.norm() - sp.power.sqrt()).abs() > 4.0 * f64::EPSILON * sp.power.sqrt() {
            bad += 1;
        }
    }
    let zero = Subpath {
        cluster: 0,
        index: 0,
        power: 0.49,
        delay_s: 0.0,
        aoa_az: 0.3,
        aoa_el: 0.0,
        aod_az: 0.0,
        aod_el: 0.0,
    };
    if small_scale_gain(&zero, 0.0, 0.0, 100.0, 0.3) != C64::new(0.7, 0.0) {
        bad += 1;
    }
    bad
}

fn pathloss_spots() -> (f64, f64) {
    let m = PathlossModel::default();
    let los = pathloss_db(100.0, ChannelState::LoS, &m.los, 0.0).unwrap();
    let nlos = pathloss_db(50.0, ChannelState::NLoS, &m.nlos, 0.0).unwrap();
    // Independent evaluation of alpha + 10 beta log10(d).
    (
        (los - (61.4 + 20.0 * 2.0)).abs(),
        (nlos - (72.0 + 29.2 * 50f64.log10()))
            .abs()
            .max((nlos - 121.61).abs()),
    )
}

/// Point-sampling verdicts on the box itself and on a copy grown by the
/// sample spacing. The first can only under-report, the second only
/// over-report, so agreement of the two settles the case.
fn sampled(a: &Position, b: &Position, bx: &Building, n: usize) -> (bool, bool) {
    let len = a.distance(b);
    let grow = len / n as f64;
    let inside = |p: &Position, g: f64| {
        p.x >= bx.min.x - g
            && p.x <= bx.max.x + g
            && p.y >= bx.min.y - g
            && p.y <= bx.max.y + g
            && p.z >= bx.min.z - g
            && p.z <= bx.max.z + g
    };
    let mut hit = false;
    let mut near = false;
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let p = Position::new(
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.z + t * (b.z - a.z),
        );
        hit |= inside(&p, 0.0);
        near |= inside(&p, grow);
        if hit {
            break;
        }
    }
    (hit, near)
}

fn segment_sampling() -> (usize, usize, usize) {
    let mut rng = RngStream::new(11, "oracle/segments");
    let (mut decided, mut skipped, mut bad) = (0, 0, 0);
    while decided < 10_000 {
        let lo = [
            rng.uniform(-40.0, 30.0),
            rng.uniform(-40.0, 30.0),
            rng.uniform(0.0, 20.0),
        ];
        let bx = Building::from_bounds([
            lo[0],
            lo[0] + rng.uniform(1.0, 20.0),
            lo[1],
            lo[1] + rng.uniform(1.0, 20.0),
            lo[2],
            lo[2] + rng.uniform(1.0, 20.0),
        ])
        .unwrap();
        let a = Position::new(
            rng.uniform(-60.0, 60.0),
            rng.uniform(-60.0, 60.0),
            rng.uniform(0.0, 40.0),
        );
        // Half the segments aim through a point near the box.
        let b = if rng.bernoulli(0.5) {
            let target = Position::new(
                rng.uniform(bx.min.x - 3.0, bx.max.x + 3.0),
                rng.uniform(bx.min.y - 3.0, bx.max.y + 3.0),
                rng.uniform(bx.min.z - 3.0, bx.max.z + 3.0),
            );
            let s = rng.uniform(0.5, 2.0);
            Position::new(
                a.x + s * (target.x - a.x),
                a.y + s * (target.y - a.y),
                a.z + s * (target.z - a.z),
            )
        } else {
            Position::new(
                rng.uniform(-60.0, 60.0),
                rng.uniform(-60.0, 60.0),
                rng.uniform(0.0, 40.0),
            )
        };
        let (hit, near) = sampled(&a, &b, &bx, 20_000);
        if hit != near {
            skipped += 1;
            continue;
        }
        decided += 1;
        if segment_intersects_box(&a, &b, &bx) != hit {
            bad += 1;
        }
    }
    (decided, skipped, bad)
}

pub fn check() -> Outcome {
    let (svd_bad, worst) = power_iteration_vs_svd();
    let phasor_bad = gain_magnitude();
    let (los_err, nlos_err) = pathloss_spots();
    let (decided, skipped, seg_bad) = segment_sampling();
    let pass =
        svd_bad == 0 && phasor_bad == 0 && los_err <= 0.01 && nlos_err <= 0.01 && seg_bad == 0;
    Outcome::new(
        "channel-math oracles",
        pass,
        format!(
            "svd: {svd_bad}/100 beyond 1e-6 (worst {worst:.1e}); |g|=sqrt(P) violations {phasor_bad}; \
             pathloss errors {los_err:.4}/{nlos_err:.4} dB; segment-box {seg_bad} disagreements in {decided} cases ({skipped} grazing redrawn)"
        ),
    )
}
