use mmwave_core::engine::{Scheduler, SimTime};
use mmwave_core::rlc::{RlcBuffer, RlcMode, RlcReceiver};
use mmwave_core::scene::{MobilityTrack, Position};
use mmwave_core::sim::{empirical_cdf, DropSummary};
use proptest::prelude::*;

proptest! {
    #[test]
    fn events_pop_in_time_then_insertion_order(times in prop::collection::vec(0u64..50, 1..200), cancel in prop::collection::vec(any::<bool>(), 200)) {
        let mut s = Scheduler::new();
        let handles: Vec<_> = times.iter().enumerate().map(|(i, &t)| s.schedule(SimTime::from_nanos(t), i).unwrap()).collect();
        let mut kept = Vec::new();
        for (i, h) in handles.into_iter().enumerate() {
            if cancel[i] { s.cancel(h) } else { kept.push(i) }
        }
        let mut popped = Vec::new();
        while let Some((t, i)) = s.pop_until(SimTime::MAX) {
            prop_assert_eq!(t.as_nanos(), times[i]);
            popped.push(i);
        }
        kept.sort_by_key(|&i| (times[i], i));
        prop_assert_eq!(popped, kept);
    }

    #[test]
    fn am_delivers_every_byte_in_order(sdus in prop::collection::vec(1u64..5000, 1..40), grants in prop::collection::vec(8u64..3000, 1..400)) {
        let mut tx = RlcBuffer::new(RlcMode::Am, 1 << 24);
        let mut rx = RlcReceiver::new(RlcMode::Am);
        for (tag, &b) in sdus.iter().enumerate() {
            prop_assert!(tx.enqueue(b, tag as u64, SimTime::ZERO));
        }
        let mut delivered = Vec::new();
        let mut g = grants.iter().cycle();
        for _ in 0..100_000 {
            if tx.occupancy() == 0 { break; }
            for seg in tx.dequeue_for_grant(*g.next().unwrap(), SimTime::ZERO) {
                delivered.extend(rx.receive(&seg));
            }
        }
        prop_assert_eq!(tx.occupancy(), 0);
        let tags: Vec<u64> = delivered.iter().map(|d| d.tag).collect();
        prop_assert_eq!(tags, (0..sdus.len() as u64).collect::<Vec<_>>());
        prop_assert_eq!(rx.delivered_bytes, sdus.iter().sum::<u64>());
    }

    #[test]
    fn track_stays_on_its_segments(pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 2..6), t in 0u64..10_000) {
        let wps: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| (SimTime::from_millis(1000 * i as u64), Position::new(x, y, 1.5))).collect();
        let track = MobilityTrack::new(wps.clone()).unwrap();
        let p = track.position_at(SimTime::from_millis(t));
        let i = ((t / 1000) as usize).min(wps.len() - 1);
        let j = (i + 1).min(wps.len() - 1);
        let (a, b) = (wps[i].1, wps[j].1);
        // On the segment: distances to both ends add up to its length.
        prop_assert!((a.distance(&p) + p.distance(&b) - a.distance(&b)).abs() < 1e-6);
    }

    #[test]
    fn cdf_is_a_distribution(rates in prop::collection::vec(prop::collection::vec(0.0f64..2e9, 1..12), 1..8)) {
        let drops: Vec<_> = rates.iter().enumerate().map(|(i, r)| DropSummary {
            seed: i as u64,
            cell_throughput_bps: r.iter().sum(),
            los_fraction: vec![0.0; r.len()],
            per_user_rate_bps: r.clone(),
        }).collect();
        let cdf = empirical_cdf(&drops);
        prop_assert_eq!(cdf.len(), rates.iter().map(Vec::len).sum::<usize>());
        prop_assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(cdf.last().unwrap().1, 1.0);
    }
}
