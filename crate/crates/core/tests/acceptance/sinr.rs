use mmwave_core::engine::SimTime;
use mmwave_core::scenario::run_scenario;
use mmwave_core::scene::ChannelState;
use mmwave_core::sim::ChannelEventReason;

use crate::{scenario, Outcome};

/// SINR change between consecutive 1 ms samples that counts as a jump. Pure
/// motion moves the UE 1.5 mm per sample, worth far less than this.
const JUMP_DB: f64 = 0.05;

pub fn check() -> Outcome {
    let s = scenario("mmwave-sinr-route.conf");
    let (t_start, t_stop) = (2.0, 22.0);
    let period = SimTime::from_millis(100);
    let out = run_scenario(&s, None).expect("sinr run").output;
    let mut issues = Vec::new();

    // Static with line of sight: bit-identical samples.
    let mut static_n = 0;
    for window in [(0.0, t_start), (t_stop, f64::INFINITY)] {
        let w: Vec<_> = out
            .sinr
            .iter()
            .filter(|x| {
                let t = x.time.as_secs_f64();
                t >= window.0 && t < window.1 && x.state == ChannelState::LoS
            })
            .collect();
        static_n += w.len();
        if w.is_empty() {
            issues.push(format!("no static LoS samples in {window:?}"));
        } else if w.iter().any(|x| x.dl_sinr_db != w[0].dl_sinr_db) {
            issues.push(format!("SINR varies while static in {window:?}"));
        }
    }

    // Every jump lines up with a channel event inside the sample interval.
    let events = &out.channel_events;
    let mut jumps = 0;
    for w in out.sinr.windows(2) {
        if (w[1].dl_sinr_db - w[0].dl_sinr_db).abs() > JUMP_DB {
            jumps += 1;
            if !events
                .iter()
                .any(|e| e.time > w[0].time && e.time <= w[1].time)
            {
                issues.push(format!(
                    "jump at {} s with no channel event",
                    w[1].time.as_secs_f64()
                ));
            }
        }
    }

    // Timer updates: only in NLoS, each 100 ms after the previous change.
    let mut timers = 0;
    for (i, e) in events.iter().enumerate() {
        if e.reason != ChannelEventReason::Timer {
            continue;
        }
        timers += 1;
        if e.state != ChannelState::NLoS {
            issues.push(format!(
                "timer update in {} at {} s",
                e.state,
                e.time.as_secs_f64()
            ));
        }
        let prev = events[..i]
            .iter()
            .rfind(|p| p.user == e.user && p.cell == e.cell);
        match prev {
            Some(p)
                if p.state == ChannelState::NLoS
                    && e.time.as_nanos() - p.time.as_nanos() == period.as_nanos() => {}
            _ => issues.push(format!(
                "timer update at {} s is not 100 ms after the last change",
                e.time.as_secs_f64()
            )),
        }
    }
    // And none missing: an NLoS stretch of length L carries floor(L / 100 ms) updates.
    let mut expected = 0;
    let geo: Vec<_> = events
        .iter()
        .filter(|e| e.reason == ChannelEventReason::Geometry)
        .collect();
    for (i, g) in geo.iter().enumerate() {
        if g.state == ChannelState::NLoS {
            let end = geo.get(i + 1).map_or(out.duration, |n| n.time);
            expected += (end.as_nanos() - g.time.as_nanos() - 1) / period.as_nanos();
        }
    }
    if timers != expected {
        issues.push(format!("{timers} timer updates, expected {expected}"));
    }
    let nlos_spans = geo.iter().filter(|g| g.state == ChannelState::NLoS).count();

    let detail = format!(
        "{static_n} static LoS samples constant, {jumps} jumps over {JUMP_DB} dB all at channel events, \
         {timers} timer updates over {nlos_spans} NLoS spans spaced exactly 100 ms"
    );
    let pass = issues.is_empty() && nlos_spans > 0 && timers > 0;
    Outcome::new(
        "SINR trace",
        pass,
        if issues.is_empty() {
            detail
        } else {
            format!("{}; first of {} issues", issues[0], issues.len())
        },
    )
}
