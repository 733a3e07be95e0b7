use crate::model::{Alteration, Scenario};

/// Work counters recorded while building a [`ProductChain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstructionWork {
    /// (state, node) pairs visited.
    pub pair_visits: usize,
    /// Nonzero `P(s, a, s')` entries copied into the chain.
    pub transition_visits: usize,
}

impl ConstructionWork {
    pub fn total(&self) -> usize {
        self.pair_visits + self.transition_visits
    }

    /// `|S||N||A||Ω| + |S|²|N|²` for the given sizes.
    pub fn bound(states: usize, nodes: usize, actions: usize, observations: usize) -> usize {
        states * nodes * actions * observations + (states * nodes).pow(2)
    }
}

/// Goal Markov chain over `Q = S × N`, indexed densely as `s * |N| + n`.
/// Rows are stored in CSR form; rows of goal states keep their outgoing
/// transitions but the solvers treat them as absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductChain {
    pub num_states: usize,
    pub num_nodes: usize,
    pub q0: usize,
    pub goal: Vec<bool>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
    pub work: ConstructionWork,
}

impl ProductChain {
    pub fn len(&self) -> usize {
        self.goal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goal.is_empty()
    }

    pub fn index(&self, state: usize, node: usize) -> usize {
        state * self.num_nodes + node
    }

    pub fn pair(&self, q: usize) -> (usize, usize) {
        (q / self.num_nodes, q % self.num_nodes)
    }

    /// Outgoing `(q', T(q, q'))` entries of `q`, sorted by `q'`.
    pub fn row(&self, q: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.offsets[q], self.offsets[q + 1]);
        self.targets[lo..hi].iter().copied().zip(self.probs[lo..hi].iter().copied())
    }

    pub fn probability(&self, from: usize, to: usize) -> f64 {
        self.row(from).find(|&(t, _)| t == to).map_or(0.0, |(_, p)| p)
    }

    pub fn num_transitions(&self) -> usize {
        self.targets.len()
    }

    /// Product states reachable from `q0` without passing through a goal.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.q0];
        seen[self.q0] = true;
        while let Some(q) = stack.pop() {
            if self.goal[q] {
                continue;
            }
            for (t, p) in self.row(q) {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }
}

/// Builds the product of the POMDP and controller under `alt`: from `(s, n)`
/// the robot reads `o = alt(O(s))`, plays `γ(n, o)` and moves to
/// `(s', δ(n, o))` with probability `P(s, γ(n, o), s')`.
///
/// The scenario must be validated and `alt` must cover every observation.
pub fn build_product(scenario: &Scenario, alt: &Alteration) -> ProductChain {
    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    let (ns, nn) = (pomdp.num_states(), fsc.num_nodes());
    let decoy = scenario.decoy_mask();

    let mut offsets = Vec::with_capacity(ns * nn + 1);
    let mut targets = Vec::new();
    let mut probs = Vec::new();
    let mut goal = Vec::with_capacity(ns * nn);
    let mut work = ConstructionWork::default();
    offsets.push(0);

    for s in 0..ns {
        let seen = alt.image(pomdp.obs_of[s]);
        for n in 0..nn {
            work.pair_visits += 1;
            let action = fsc.action(n, seen);
            let next = fsc.next(n, seen);
            for &(t, p) in pomdp.successors(s, action) {
                if p > 0.0 {
                    work.transition_visits += 1;
                    targets.push(t * nn + next);
                    probs.push(p);
                }
            }
            offsets.push(targets.len());
            goal.push(decoy[s]);
        }
    }

    ProductChain {
        num_states: ns,
        num_nodes: nn,
        q0: pomdp.initial_state * nn + fsc.initial_node,
        goal,
        offsets,
        targets,
        probs,
        work,
    }
}

/// Probability of following exactly the state sequence `path` (starting at
/// the initial state) under `alt`. Controller nodes are determined by the
/// observations along the way.
pub fn path_probability(scenario: &Scenario, alt: &Alteration, path: &[usize]) -> f64 {
    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    match path.first() {
        Some(&s) if s == pomdp.initial_state => {}
        _ => return 0.0,
    }
    let mut node = fsc.initial_node;
    let mut mass = 1.0;
    for w in path.windows(2) {
        let seen = alt.image(pomdp.obs_of[w[0]]);
        let action = fsc.action(node, seen);
        node = fsc.next(node, seen);
        let p = pomdp.successors(w[0], action).iter().find(|(t, _)| *t == w[1]).map_or(0.0, |&(_, p)| p);
        mass *= p;
    }
    mass
}
