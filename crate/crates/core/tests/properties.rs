mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use handover_core::events::{
    coverage_timeline, event_stream, step_sequence, EventKind, Trajectory,
};
use handover_core::geometry::{crossing_times, depth, ply, Point, Region, RegionId, Segment};
use handover_core::harness::{random_scenario, RandomParams, ShapeKind};
use handover_core::offline::{
    greedy_offline, greedy_offline_c, optimal_oracle, optimal_oracle_c, validate, validate_c,
};
use handover_core::online::{build_tracker, drive, StreamStart, TrackerKind};

use common::{bfs_min_cover, reference_timeline};

fn region_strategy(id: u32) -> impl Strategy<Value = Region> {
    prop_oneof![
        (-3.0..3.0f64, -3.0..3.0f64, 0.3..2.0f64).prop_map(move |(x, y, r)| Region::disk(
            id,
            Point::two(x, y),
            r
        )
        .unwrap()),
        (
            -3.0..3.0f64,
            -3.0..3.0f64,
            0.3..2.0f64,
            3usize..7,
            0.0..std::f64::consts::TAU
        )
            .prop_map(move |(x, y, r, k, phase)| {
                let vs = (0..k)
                    .map(|i| {
                        let a = phase + std::f64::consts::TAU * i as f64 / k as f64;
                        Point::two(x + r * a.cos(), y + r * a.sin())
                    })
                    .collect();
                Region::polygon(id, vs).unwrap()
            }),
    ]
}

fn point2() -> impl Strategy<Value = Point> {
    (-4.0..4.0f64, -4.0..4.0f64).prop_map(|(x, y)| Point::two(x, y))
}

fn scenario(
    shape: ShapeKind,
    dimension: usize,
    c: usize,
) -> impl Strategy<Value = (Vec<Region>, Trajectory)> {
    (any::<u64>(), 2usize..12, 1usize..8).prop_filter_map(
        "generation failed",
        move |(seed, n, segs)| {
            random_scenario(
                seed,
                &RandomParams::new(n.max(c), dimension, shape, segs).with_coverage(c),
            )
            .ok()
        },
    )
}

fn any_scenario() -> impl Strategy<Value = (Vec<Region>, Trajectory)> {
    prop_oneof![
        scenario(ShapeKind::Interval, 1, 1),
        scenario(ShapeKind::Disk, 2, 1),
        scenario(ShapeKind::Mixed, 2, 1),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn crossings_match_dense_sampling(region in region_strategy(0), a in point2(), b in point2()) {
        let seg = Segment::new(0.0, a, 1.0, b);
        let crossings = crossing_times(&region, &seg).unwrap();
        for w in crossings.windows(2) {
            prop_assert!(w[0].time < w[1].time);
            prop_assert_ne!(w[0].kind, w[1].kind);
        }
        let mut inside = region.contains(&seg.position(1e-6)).unwrap();
        let mut next = 0;
        for i in 1..1000 {
            let t = i as f64 / 1000.0;
            let near = crossings.iter().any(|c| (c.time - t).abs() < 2e-3);
            while next < crossings.len() && crossings[next].time <= t {
                inside = crossings[next].kind == EventKind::Enter;
                next += 1;
            }
            if !near {
                prop_assert_eq!(region.contains(&seg.position(t)).unwrap(), inside, "t = {}", t);
            }
        }
    }

    #[test]
    fn replaying_events_reproduces_containment((regions, t) in any_scenario()) {
        let stream = event_stream(&regions, &t).unwrap();
        let times: Vec<f64> = stream.events.iter().map(|e| e.time).collect();
        let (t0, t1) = (t.start_time(), t.end_time());
        let mut inside = stream.initial_inside.clone();
        let mut next = 0;
        for i in 0..=400 {
            let s = t0 + (t1 - t0) * i as f64 / 400.0;
            while next < stream.events.len() && stream.events[next].time <= s {
                let e = &stream.events[next];
                match e.kind {
                    EventKind::Enter => prop_assert!(inside.insert(e.region_id)),
                    EventKind::Exit => prop_assert!(inside.remove(&e.region_id)),
                }
                next += 1;
            }
            if times.iter().any(|&x| (x - s).abs() < 1e-6) {
                continue;
            }
            let p = t.position_at(s);
            let truth: BTreeSet<RegionId> =
                regions.iter().filter(|r| r.signed_depth(&p).abs() > 1e-9 && r.contains(&p).unwrap()).map(|r| r.id).collect();
            let touching: BTreeSet<RegionId> =
                regions.iter().filter(|r| r.signed_depth(&p).abs() <= 1e-9).map(|r| r.id).collect();
            let replayed: BTreeSet<RegionId> = inside.difference(&touching).copied().collect();
            prop_assert_eq!(replayed, truth, "time {}", s);
        }
    }

    #[test]
    fn ply_bounds_grid_depth(regions in prop::collection::vec(region_strategy(0), 1..8)) {
        let regions: Vec<Region> =
            regions.into_iter().enumerate().map(|(i, r)| Region::new(RegionId(i as u32), r.shape).unwrap()).collect();
        let rho = ply(&regions).unwrap();
        let mut grid_max = 0;
        for i in 0..=80 {
            for j in 0..=80 {
                let p = Point::two(-6.0 + 0.15 * i as f64, -6.0 + 0.15 * j as f64);
                grid_max = grid_max.max(depth(&regions, &p).unwrap());
            }
        }
        prop_assert!(grid_max <= rho);
        prop_assert!(rho <= regions.len());
    }

    #[test]
    fn greedy_matches_oracles_and_steps_bound_it((regions, t) in prop_oneof![
        scenario(ShapeKind::Interval, 1, 1), scenario(ShapeKind::Disk, 2, 1)
    ]) {
        let tl = coverage_timeline(&regions, &t).unwrap();
        let greedy = greedy_offline(&tl).unwrap();
        validate(&regions, &t, &greedy, true).unwrap();
        let opt = optimal_oracle(&tl).unwrap();
        prop_assert_eq!(greedy.cost(), opt);
        prop_assert_eq!(bfs_min_cover(&reference_timeline(&regions, &t)), Some(opt));
        prop_assert!(step_sequence(&regions, &t).unwrap().k() <= opt);
    }

    #[test]
    fn greedy_c_matches_oracle((regions, t) in scenario(ShapeKind::Interval, 1, 2)) {
        let tl = coverage_timeline(&regions, &t).unwrap();
        prop_assume!(tl.elementary_pieces().len() <= 12 && regions.len() <= 8);
        let sol = greedy_offline_c(&tl, 2).unwrap();
        validate_c(&regions, &t, &sol, 2).unwrap();
        prop_assert_eq!(sol.total_cost(), optimal_oracle_c(&tl, 2).unwrap());
    }

    #[test]
    fn tracker_steps_align_with_step_sequence((regions, t) in any_scenario(), seed in any::<u64>()) {
        let steps = step_sequence(&regions, &t).unwrap();
        let stream = event_stream(&regions, &t).unwrap();
        for kind in [TrackerKind::Random, TrackerKind::DetFirst] {
            let mut tr = build_tracker(kind, &regions, 1, seed).unwrap();
            drive(tr.as_mut(), &stream).unwrap();
            let times: Vec<f64> = tr.steps().iter().map(|s| s.time).collect();
            prop_assert_eq!(&times, &steps.times());
            for (rec, step) in tr.steps().iter().zip(&steps.steps) {
                prop_assert_eq!(rec.candidates, step.regions.len());
            }
        }
    }

    #[test]
    fn every_tracker_output_is_valid((regions, t) in any_scenario(), seed in any::<u64>()) {
        let stream = event_stream(&regions, &t).unwrap();
        let one_dim = regions[0].dim() == 1;
        for kind in TrackerKind::ALL {
            if kind == TrackerKind::DetOneDim && !one_dim {
                prop_assert!(build_tracker(kind, &regions, 1, seed).is_err());
                continue;
            }
            let mut tr = build_tracker(kind, &regions, 1, seed).unwrap();
            let sol = drive(tr.as_mut(), &stream).unwrap();
            prop_assert_eq!(sol.sequences.len(), 1);
            validate(&regions, &t, &sol.sequences[0], true).unwrap();
        }
    }

    #[test]
    fn trilateration_output_is_valid((regions, t) in scenario(ShapeKind::Interval, 1, 3), seed in any::<u64>()) {
        let mut tr = build_tracker(TrackerKind::Trilat, &regions, 3, seed).unwrap();
        let sol = drive(tr.as_mut(), &event_stream(&regions, &t).unwrap()).unwrap();
        validate_c(&regions, &t, &sol, 3).unwrap();
    }

    #[test]
    fn one_dim_picks_per_step_are_logarithmic((regions, t) in scenario(ShapeKind::Interval, 1, 1)) {
        let limit = ply(&regions).unwrap().ilog2() as usize + 1;
        let mut tr = build_tracker(TrackerKind::DetOneDim, &regions, 1, 0).unwrap();
        drive(tr.as_mut(), &event_stream(&regions, &t).unwrap()).unwrap();
        prop_assert!(tr.steps().iter().all(|s| s.picks <= limit));
    }

    #[test]
    fn emitted_pairs_are_never_rewritten((regions, t) in any_scenario(), seed in any::<u64>()) {
        let stream = event_stream(&regions, &t).unwrap();
        for kind in [TrackerKind::Random, TrackerKind::DetFirst, TrackerKind::Trilat] {
            let mut tr = build_tracker(kind, &regions, 1, seed).unwrap();
            tr.init(&StreamStart::from(&stream)).unwrap();
            let mut prev = tr.finish();
            for batch in stream.batches() {
                tr.on_events(batch[0].time, batch).unwrap();
                let now = tr.finish();
                for (a, b) in prev.sequences.iter().zip(&now.sequences) {
                    prop_assert!(b.pairs.starts_with(&a.pairs));
                }
                prev = now;
            }
        }
    }

    #[test]
    fn same_seed_same_solution((regions, t) in any_scenario(), seed in any::<u64>()) {
        let stream = event_stream(&regions, &t).unwrap();
        for kind in [TrackerKind::Random, TrackerKind::Trilat] {
            let run = || {
                let mut tr = build_tracker(kind, &regions, 1, seed).unwrap();
                drive(tr.as_mut(), &stream).unwrap()
            };
            prop_assert_eq!(run(), run());
        }
    }
}

#[test]
fn harmonic_recurrence_is_the_harmonic_number() {
    for q in 1..=40 {
        let h: f64 = (1..=q).map(|i| 1.0 / i as f64).sum();
        assert!((common::harmonic_recurrence(q) - h).abs() < 1e-12);
    }
    assert!((common::harmonic_recurrence(16) - 3.380_728_993).abs() < 1e-9);
}
