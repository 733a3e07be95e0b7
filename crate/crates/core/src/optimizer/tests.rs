use super::*;
use crate::generators::{gen_grid, gen_knapsack, GridSpec, KnapsackInstance};
use crate::model::Alteration;
use crate::testutil::toy;

fn grid5() -> Scenario {
    gen_grid(&GridSpec::standard(5)).unwrap()
}

fn knapsack5() -> Scenario {
    gen_knapsack(&KnapsackInstance::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![20.0, 30.0, 40.0, 50.0, 60.0], 7.0, 100.0))
        .unwrap()
        .scenario
}

fn alt(sc: &Scenario, text: &str) -> Alteration {
    Alteration::parse(text, sc.observations()).unwrap()
}

#[test]
fn grid_single_alteration_budget() {
    let sc = grid5();
    let r = branch_and_bound(&sc, &SearchLimits::default()).unwrap();
    assert_eq!(r.status, OptStatus::Optimal);
    assert!((r.best_value - 0.720).abs() <= 0.005, "{}", r.best_value);
    assert_eq!(r.best_cost, 1.0);
    // o1->o2, o1->o3 and o1->o5 drive the controller identically
    let o3 = reach_value(&sc, &alt(&sc, "o1->o3"));
    assert!((r.best_value - o3).abs() <= 1e-12);
    assert!(r.bound_at_root >= r.best_value);
}

#[test]
fn grid_brute_force_agrees() {
    let sc = grid5().with_budget(2.0);
    let bb = branch_and_bound(&sc, &SearchLimits::default()).unwrap();
    let bf = brute_force(&sc).unwrap();
    assert!((bb.best_value - bf.best_value).abs() <= 1e-9);
    assert!((bb.best_value - 0.861).abs() <= 0.005, "{}", bb.best_value);
    assert_eq!(bb.best_alteration, bf.best_alteration);
}

#[test]
fn grid_budget_sweep_is_monotone() {
    let sc = grid5();
    let rs = budget_sweep(&sc, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &SearchLimits::default()).unwrap();
    let values: Vec<f64> = rs.iter().map(|r| r.best_value).collect();
    for (v, want) in values.iter().zip([0.085, 0.720, 0.861, 0.862, 0.864]) {
        assert!((v - want).abs() <= 0.005, "{values:?}");
    }
    assert!(values.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    assert!((values[4] - values[5]).abs() <= 1e-9);
    assert!(rs.iter().all(|r| r.status == OptStatus::Optimal && r.best_cost <= 5.0));
    assert!(rs[0].best_alteration.is_identity());
}

#[test]
fn knapsack_optimum_is_the_best_subset() {
    let sc = knapsack5();
    assert!(brute_force(&sc).is_err());
    let bf = brute_force_with_cap(&sc, 9).unwrap();
    let expected = alt(&sc, "o1->oclub;o2->oclub;o4->oclub");
    assert_eq!(bf.best_alteration, expected);
    assert!((bf.best_value - 0.25).abs() <= 1e-12);
    let bb = branch_and_bound(&sc, &SearchLimits::default()).unwrap();
    assert_eq!(bb.best_alteration, expected);
    assert_eq!(bb.best_cost, 7.0);
}

#[test]
fn zero_budget_keeps_identity() {
    let sc = grid5().with_budget(0.0);
    let bf = brute_force(&sc).unwrap();
    assert!(bf.best_alteration.is_identity());
    assert_eq!(bf.nodes_explored, 1);
    let bb = branch_and_bound(&sc, &SearchLimits::default()).unwrap();
    assert_eq!(bb.best_alteration, bf.best_alteration);
}

#[test]
fn unreachable_decoy_returns_identity() {
    let mut sc = toy();
    sc.pomdp.transitions[0][0] = vec![(0, 1.0)];
    let bf = brute_force(&sc).unwrap();
    assert_eq!(bf.best_value, 0.0);
    assert!(bf.best_alteration.is_identity());
    let bb = branch_and_bound(&sc, &SearchLimits::default()).unwrap();
    assert_eq!(bb.best_value, 0.0);
    assert!(bb.best_alteration.is_identity());
}

#[test]
fn decided_node_bound_is_exact() {
    let sc = grid5();
    let a = alt(&sc, "o1->o3");
    let node = SearchNode {
        decided: a.images().iter().map(|&t| Some(t)).collect(),
        committed_cost: 1.0,
        bound: 1.0,
    };
    let b = relaxation_bound(&sc, &node);
    assert!(!b.infeasible);
    assert_eq!(b.value, reach_value(&sc, &a));
}

#[test]
fn root_bound_dominates_single_changes() {
    let sc = grid5().with_budget(7.0);
    let root = relaxation_bound(&sc, &SearchNode::root(&sc));
    let no = sc.pomdp.num_observations();
    let o0 = sc.initial_observation();
    for o in (0..no).filter(|&o| o != o0) {
        for t in 0..no {
            let a = Alteration::from_pairs(no, &[(o, t)]);
            assert!(root.value >= reach_value(&sc, &a));
        }
    }
    assert!(root.value <= 1.0 + BOUND_SLACK);
}

#[test]
fn tie_order_ranks_identity_first() {
    let sc = grid5();
    assert!(sc.identity() < alt(&sc, "o6->o0"));
    assert!(alt(&sc, "o1->o2") < alt(&sc, "o1->o3"));
    assert!(alt(&sc, "o1->o3") < alt(&sc, "o1->o3;o2->o0"));
    assert!(alt(&sc, "o2->o0") < alt(&sc, "o1->o0"));
    assert!(alt(&sc, "o1->o2;o2->o0;o5->o0;o6->o2") < alt(&sc, "o1->o2;o2->o0;o3->o2;o5->o0;o6->o2"));
}

#[test]
fn hopeless_prefix_bounds_to_zero() {
    let mut sc = toy();
    sc.pomdp.transitions[0][0] = vec![(0, 1.0)];
    let b = relaxation_bound(&sc, &SearchNode::root(&sc));
    assert_eq!(b.value, 0.0);
    assert!(!b.infeasible);
}

#[test]
fn over_budget_node_is_flagged() {
    let sc = grid5();
    let mut node = SearchNode::root(&sc);
    node.committed_cost = 2.0;
    let b = relaxation_bound(&sc, &node);
    assert!(b.infeasible);
    assert_eq!(b.value, 0.0);
}

#[test]
fn brute_force_guard() {
    match brute_force_with_cap(&grid5(), 7) {
        Err(OptError::TooLarge { observations, cap, candidates }) => {
            assert_eq!((observations, cap), (8, 7));
            assert_eq!(candidates, 8f64.powi(7));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unsorted_budgets_are_rejected() {
    let sc = grid5();
    assert!(matches!(budget_sweep(&sc, &[2.0, 1.0], &SearchLimits::default()), Err(OptError::UnsortedBudgets(_))));
}

#[test]
fn node_limit_reports_incumbent() {
    let sc = grid5().with_budget(3.0);
    let r = branch_and_bound(&sc, &SearchLimits { max_nodes: Some(3), max_seconds: None }).unwrap();
    assert_eq!(r.status, OptStatus::Incumbent);
    assert!(r.nodes_explored <= 3);
    assert!(r.best_cost <= 3.0);
}

#[test]
fn results_are_reproducible_across_pools() {
    let sc = grid5().with_budget(2.0);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| (brute_force(&sc).unwrap(), branch_and_bound(&sc, &SearchLimits::default()).unwrap()));
    let b = four.install(|| (brute_force(&sc).unwrap(), branch_and_bound(&sc, &SearchLimits::default()).unwrap()));
    assert_eq!(a, b);
}

#[test]
fn branching_order_by_impact() {
    let sc = grid5();
    let order = branching_order(&sc);
    let b = sc.observations().get("b").unwrap();
    // the blank covers most cells
    assert_eq!(order[0], b);
    assert!(!order.contains(&sc.initial_observation()));
}
