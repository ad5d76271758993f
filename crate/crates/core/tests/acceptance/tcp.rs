use std::time::Instant;

use mmwave_core::engine::SimTime;
use mmwave_core::scenario::run_scenario;
use mmwave_core::scene::ChannelState;
use mmwave_core::sim::ChannelEventReason;

use crate::{scenario, Outcome};

/// Bins this long after a LoS/NLoS change are treated as steady state.
const SETTLE_S: f64 = 2.0;

pub fn check() -> Outcome {
    let s = scenario("mmwave-tcp-building.conf");
    let t = Instant::now();
    let out = run_scenario(&s, None).expect("tcp run").output;
    let runtime = t.elapsed().as_secs_f64();

    let changes: Vec<(f64, ChannelState)> = out
        .channel_events
        .iter()
        .filter(|e| e.reason == ChannelEventReason::Geometry)
        .map(|e| (e.time.as_secs_f64(), e.state))
        .collect();
    let Some(&(nlos_start, _)) = changes.iter().find(|c| c.1 == ChannelState::NLoS) else {
        return Outcome::new(
            "TCP over mmWave",
            false,
            "the route never leaves line of sight".into(),
        );
    };
    let nlos_end = changes
        .iter()
        .find(|c| c.0 > nlos_start && c.1 == ChannelState::LoS)
        .map_or(out.duration.as_secs_f64(), |c| c.0);
    let since_change = |t: f64| {
        changes
            .iter()
            .filter(|c| c.0 <= t)
            .map(|c| t - c.0)
            .fold(t, f64::min)
    };

    let bin = out.tcp.first().map_or(0.0, |b| b.time.as_secs_f64());
    // A bin sample at `time` covers (time - bin, time].
    let los_steady: Vec<_> = out
        .tcp
        .iter()
        .filter(|b| {
            b.serving_state == ChannelState::LoS
                && since_change(b.time.as_secs_f64() - bin) >= SETTLE_S
        })
        .collect();
    let goodput_window: Vec<_> = out
        .tcp
        .iter()
        .filter(|b| {
            let t = b.time.as_secs_f64();
            t - bin >= SETTLE_S && t <= nlos_start
        })
        .collect();
    let los_goodput = goodput_window.iter().map(|b| b.goodput_mbps).sum::<f64>()
        / goodput_window.len().max(1) as f64;
    let (rtt_lo, rtt_hi) = los_steady
        .iter()
        .filter_map(|b| b.rtt_ms)
        .fold((f64::INFINITY, 0.0_f64), |(a, z), (_, lo, hi)| {
            (a.min(lo), z.max(hi))
        });

    let nlos: Vec<_> = out
        .tcp
        .iter()
        .filter(|b| b.time.as_secs_f64() > nlos_start && b.time.as_secs_f64() - bin < nlos_end)
        .collect();
    let nlos_rtt = nlos
        .iter()
        .filter_map(|b| b.rtt_ms)
        .map(|r| r.2)
        .fold(0.0, f64::max);
    let nlos_goodput = nlos.iter().map(|b| b.goodput_mbps).sum::<f64>() / nlos.len().max(1) as f64;

    // Counters are cumulative, so compare the last bin before the outage
    // with the last bin inside it.
    let before = out.tcp.iter().rfind(|b| b.time.as_secs_f64() <= nlos_start);
    let after = nlos.last();
    let (retx, rto) = match (before, after) {
        (Some(a), Some(b)) => (
            b.retransmissions - a.retransmissions,
            b.timeouts - a.timeouts,
        ),
        _ => (u64::MAX, u64::MAX),
    };

    let goodput_ok = los_goodput >= 850.0;
    let rtt_ok = rtt_lo >= 40.0 && rtt_hi <= 55.0 && !los_steady.is_empty();
    let nlos_ok = nlos_rtt > 100.0 && nlos_goodput < los_goodput;
    let clean = retx == 0 && rto == 0;
    let runtime_ok = runtime < 600.0 && out.duration == SimTime::from_millis(25_000);
    Outcome::new(
        "TCP over mmWave",
        goodput_ok && rtt_ok && nlos_ok && clean && runtime_ok,
        format!(
            "NLoS {nlos_start:.2}-{nlos_end:.2} s; LoS goodput {los_goodput:.1} Mbps (want >= 850); LoS RTT {rtt_lo:.2}-{rtt_hi:.2} ms \
             over {} bins (want 40-55); NLoS max RTT {nlos_rtt:.1} ms (want > 100), goodput {nlos_goodput:.1} Mbps; \
             {retx} retransmissions and {rto} timeouts during NLoS; {runtime:.1} s for 25 simulated seconds",
            los_steady.len()
        ),
    )
}
