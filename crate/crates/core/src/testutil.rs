use crate::model::{CostModel, Fsc, IdSet, Pomdp, Scenario};

/// Two states, one action, two observations, one node; `s0 -> s1`, decoy `s1`.
pub(crate) fn toy() -> Scenario {
    let pomdp = Pomdp {
        states: IdSet::new(["s0", "s1"]),
        actions: IdSet::new(["a"]),
        observations: IdSet::new(["o0", "o1"]),
        transitions: vec![vec![vec![(1, 1.0)]], vec![vec![(1, 1.0)]]],
        initial_state: 0,
        obs_of: vec![0, 1],
    };
    let fsc = Fsc {
        nodes: IdSet::new(["n0"]),
        initial_node: 0,
        action_of: vec![vec![Some(0), Some(0)]],
        next_node: vec![vec![Some(0), Some(0)]],
    };
    Scenario { pomdp, fsc, cost_model: CostModel::unit(2, 1.0), decoy: vec![1] }
}
