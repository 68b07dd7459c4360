use std::collections::BTreeSet;

use handover_core::adversary::{
    flower, interval_tree, rhombi_construction, run_deterministic_adversary,
    run_stateless_adversary, trilateration_lb, yao_expected_cost, AdversaryError,
    NearestCenterPolicy, StatelessPolicy, TrajectoryDistribution,
};
use handover_core::events::event_stream;
use handover_core::geometry::{depth, ply, Point, RegionId};
use handover_core::online::{build_tracker, OnlineError, TrackerKind};
use handover_core::Trajectory;

#[test]
fn rhombi_atlas_counts() {
    let r = rhombi_construction().unwrap();
    assert_eq!(r.regions.len(), 4);
    for (name, p) in r.atlas() {
        let inside: usize = r.regions.iter().filter(|g| g.contains(&p).unwrap()).count();
        let expected = if name == "abcd" { 4 } else { 2 };
        assert_eq!(inside, expected, "cell {name}");
    }
}

#[test]
fn rhombi_cells_adjacent_to_core() {
    let r = rhombi_construction().unwrap();
    let atlas = r.atlas();
    let core = atlas.iter().find(|(n, _)| n == "abcd").unwrap().1;
    for (name, p) in atlas.iter().filter(|(n, _)| n != "abcd") {
        let t = Trajectory::unit_timed(0.0, [core, *p]).unwrap();
        let s = event_stream(&r.regions, &t).unwrap();
        assert_eq!(s.events.len(), 2, "cell {name}");
    }
}

#[test]
fn stateless_ratio_grows_with_rounds() {
    let policy = NearestCenterPolicy::new(&rhombi_construction().unwrap().regions);
    let zero = run_stateless_adversary(&policy, 0).unwrap();
    assert_eq!(zero.opt_cost, 1);
    assert!(zero.alg_cost >= 1);
    for rounds in [1, 5, 10] {
        let run = run_stateless_adversary(&policy, rounds).unwrap();
        assert!(run.ratio() >= 2.0 * rounds as f64);
    }
}

struct Lowest;

impl StatelessPolicy for Lowest {
    fn choose(&self, _: &Point, containing: &BTreeSet<RegionId>) -> RegionId {
        *containing.iter().next().unwrap()
    }
}

struct Outsider;

impl StatelessPolicy for Outsider {
    fn choose(&self, _: &Point, _: &BTreeSet<RegionId>) -> RegionId {
        RegionId(99)
    }
}

#[test]
fn any_stateless_policy_is_beaten() {
    let run = run_stateless_adversary(&Lowest, 10).unwrap();
    assert!(run.ratio() >= 20.0);
    assert!(matches!(
        run_stateless_adversary(&Outsider, 3),
        Err(AdversaryError::InvalidPolicy(_))
    ));
}

#[test]
fn flower_ply_matches_disk_count() {
    let f = flower(8).unwrap();
    assert_eq!(ply(&f.regions).unwrap(), 8);
    for (i, cell) in f.cells.iter().enumerate() {
        assert!(!f.regions[i].contains(cell).unwrap());
        assert_eq!(depth(&f.regions, cell).unwrap(), 7);
    }
}

#[test]
fn deterministic_adversary_forces_ply_minus_one() {
    let run =
        run_deterministic_adversary(&|r| build_tracker(TrackerKind::DetFirst, r, 1, 0), 4, 30)
            .unwrap();
    assert!(run.ratio() >= 3.0);
    assert!(run.alg_cost >= 30);
    assert_eq!(run.opt_bound, 10);
}

#[test]
fn seeded_random_tracker_is_beaten_like_a_deterministic_one() {
    let run = run_deterministic_adversary(&|r| build_tracker(TrackerKind::Random, r, 1, 11), 6, 50)
        .unwrap();
    assert!(run.ratio() >= 5.0);
}

#[test]
fn one_dim_tracker_cannot_play_on_disks() {
    let err =
        run_deterministic_adversary(&|r| build_tracker(TrackerKind::DetOneDim, r, 1, 0), 4, 3)
            .unwrap_err();
    assert!(matches!(
        err,
        AdversaryError::Online(OnlineError::Unsupported { .. })
    ));
}

#[test]
fn every_tree_trajectory_ends_inside_some_interval() {
    for rho in [2, 4, 8, 16, 32] {
        let tree = interval_tree(rho).unwrap();
        assert_eq!(tree.distribution.len(), rho);
        for (t, p) in tree.distribution.iter() {
            assert_eq!(p, 1.0 / rho as f64);
            assert_eq!(t.samples().len(), rho.ilog2() as usize + 1);
            let end = t.samples().last().unwrap().1;
            assert!(depth(&tree.regions, &end).unwrap() >= 1);
        }
    }
}

#[test]
fn yao_random_tracker_is_harmonic_on_the_tree() {
    let tree = interval_tree(8).unwrap();
    let r = yao_expected_cost(
        &tree.regions,
        &tree.distribution,
        TrackerKind::Random,
        1,
        2000,
        4,
    )
    .unwrap();
    let h8: f64 = (1..=8).map(|i| 1.0 / i as f64).sum();
    assert!((r.expected - h8).abs() < 0.05, "{}", r.expected);
    assert_eq!(r.runs, 16_000);
}

#[test]
fn yao_det_first_is_exact() {
    let tree = interval_tree(8).unwrap();
    let r = yao_expected_cost(
        &tree.regions,
        &tree.distribution,
        TrackerKind::DetFirst,
        1,
        500,
        0,
    )
    .unwrap();
    assert_eq!(r.exact, Some((36, 8)));
    assert!(r.at_least(5, 2));
}

#[test]
fn trilateration_lower_bound_expectation() {
    let lb = trilateration_lb(9, 2).unwrap();
    let r = yao_expected_cost(
        &lb.regions,
        &lb.distribution,
        TrackerKind::Trilat,
        2,
        200,
        1,
    )
    .unwrap();
    assert!(r.expected >= 3.5);
    assert!(r.opt_costs.iter().all(|&o| o == 2));
}

#[test]
fn distribution_rejects_bad_probabilities() {
    let t = Trajectory::unit_timed(0.0, [Point::one(0.0)]).unwrap();
    assert!(TrajectoryDistribution::new(vec![(t.clone(), 0.5)]).is_err());
    assert!(TrajectoryDistribution::new(vec![(t.clone(), 1.5), (t.clone(), -0.5)]).is_err());
    assert!(TrajectoryDistribution::new(vec![]).is_err());
    assert!(TrajectoryDistribution::new(vec![(t.clone(), 0.25), (t, 0.75)]).is_ok());
}
