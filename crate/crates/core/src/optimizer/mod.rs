//! Exact search for the best alteration within budget: exhaustive
//! enumeration as the reference, and depth-first branch and bound pruned by
//! a max-reachability relaxation.

mod relax;

use std::time::Instant;

use rayon::prelude::*;

use crate::model::{alteration_cost, within_budget, Alteration, Scenario, ValidationReport};
use crate::verifier::{reach_value, verify, ReachOptions, VerifyError};
use relax::RelaxedMdp;

/// Values this close count as ties.
pub const TIE_EPS: f64 = 1e-10;
/// Added to every relaxation bound before it is compared.
pub const BOUND_SLACK: f64 = 1e-12;
const BOUND_TOL: f64 = 1e-9;
const BOUND_SWEEPS: usize = 100_000;
/// Default cap on `|Ω|` for exhaustive enumeration.
pub const BRUTE_FORCE_MAX_OBS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptError {
    #[error("invalid scenario: {0}")]
    Invalid(ValidationReport),
    #[error("brute force refused: {observations} observations exceed the cap of {cap} ({candidates:.3e} candidate alterations)")]
    TooLarge { observations: usize, cap: usize, candidates: f64 },
    #[error("budgets must be sorted ascending (got {0:?})")]
    UnsortedBudgets(Vec<f64>),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptStatus {
    Optimal,
    /// A node or time limit stopped the search; the alteration is the best
    /// one found.
    Incumbent,
}

impl std::fmt::Display for OptStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptStatus::Optimal => "optimal",
            OptStatus::Incumbent => "incumbent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_alteration: Alteration,
    pub best_value: f64,
    pub best_cost: f64,
    pub status: OptStatus,
    pub nodes_explored: u64,
    pub bound_at_root: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchLimits {
    pub max_nodes: Option<u64>,
    pub max_seconds: Option<f64>,
}

/// Partial assignment: `decided[o]` is the image of `o` if fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub decided: Vec<Option<usize>>,
    pub committed_cost: f64,
    pub bound: f64,
}

impl SearchNode {
    /// The root: only the initial observation is decided, to itself.
    pub fn root(scenario: &Scenario) -> Self {
        let mut decided = vec![None; scenario.pomdp.num_observations()];
        let o0 = scenario.initial_observation();
        decided[o0] = Some(o0);
        SearchNode { decided, committed_cost: scenario.cost_model.cost(o0, o0).unwrap_or(0.0), bound: 1.0 }
    }

    pub fn is_complete(&self) -> bool {
        self.decided.iter().all(Option::is_some)
    }

    fn alteration(&self) -> Option<Alteration> {
        self.decided.iter().copied().collect::<Option<Vec<_>>>().map(Alteration::from_images)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    /// No completion of the node fits the budget.
    pub infeasible: bool,
}

/// Images `o` may still take at `node` without making the budget
/// unreachable given the cheapest choices for the other undecided ones.
fn open_images(scenario: &Scenario, node: &SearchNode, o: usize) -> Vec<usize> {
    let cm = &scenario.cost_model;
    let rest: f64 = (0..node.decided.len())
        .filter(|&u| u != o && node.decided[u].is_none())
        .map(|u| cm.min_cost(u).unwrap_or(f64::INFINITY))
        .sum();
    cm.images(o).filter(|&(_, c)| within_budget(node.committed_cost + c + rest, cm.budget)).map(|(t, _)| t).collect()
}

fn remaining_min_cost(scenario: &Scenario, node: &SearchNode) -> f64 {
    (0..node.decided.len())
        .filter(|&u| node.decided[u].is_none())
        .map(|u| scenario.cost_model.min_cost(u).unwrap_or(f64::INFINITY))
        .sum()
}

/// Upper bound on the reach value of every budget-feasible completion of
/// `node`: each undecided observation may choose its image independently at
/// every product state.
pub fn relaxation_bound(scenario: &Scenario, node: &SearchNode) -> Bound {
    if !within_budget(node.committed_cost + remaining_min_cost(scenario, node), scenario.cost_model.budget) {
        return Bound { value: 0.0, infeasible: true };
    }
    if let Some(alt) = node.alteration() {
        return Bound { value: reach_value(scenario, &alt), infeasible: false };
    }
    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    let (ns, nn) = (pomdp.num_states(), fsc.num_nodes());
    let images: Vec<Vec<usize>> = (0..pomdp.num_observations())
        .map(|o| match node.decided[o] {
            Some(t) => vec![t],
            None => open_images(scenario, node, o),
        })
        .collect();
    let decoy = scenario.decoy_mask();
    let mut choices = Vec::with_capacity(ns * nn);
    let mut goal = Vec::with_capacity(ns * nn);
    for s in 0..ns {
        for n in 0..nn {
            goal.push(decoy[s]);
            let mut seen = std::collections::BTreeSet::new();
            let mut cs = Vec::new();
            for &img in &images[pomdp.obs_of[s]] {
                let (a, next) = (fsc.action(n, img), fsc.next(n, img));
                if seen.insert((a, next)) {
                    cs.push(
                        pomdp.successors(s, a).iter().filter(|(_, p)| *p > 0.0).map(|&(t, p)| (t * nn + next, p)).collect(),
                    );
                }
            }
            choices.push(cs);
        }
    }
    let mdp = RelaxedMdp { goal, choices, start: pomdp.initial_state * nn + fsc.initial_node };
    // zero comes from the graph search and is exact
    let v = mdp.upper_value(BOUND_TOL, BOUND_SWEEPS);
    Bound { value: if v == 0.0 { 0.0 } else { v + BOUND_SLACK }, infeasible: false }
}

/// Admissible images per observation; the initial observation keeps itself.
fn candidate_images(scenario: &Scenario) -> Vec<Vec<usize>> {
    let o0 = scenario.initial_observation();
    (0..scenario.pomdp.num_observations())
        .map(|o| if o == o0 { vec![o] } else { scenario.cost_model.images(o).map(|(t, _)| t).collect() })
        .collect()
}

fn finish(
    scenario: &Scenario,
    alt: Alteration,
    status: OptStatus,
    nodes: u64,
    root: f64,
) -> Result<OptResult, OptError> {
    let v = verify(scenario, &alt, &ReachOptions::default())?;
    Ok(OptResult {
        best_cost: v.cost.finite().unwrap_or(f64::INFINITY),
        best_value: v.probability,
        best_alteration: alt,
        status,
        nodes_explored: nodes,
        bound_at_root: root,
    })
}

/// Exhaustive enumeration; refuses when `|Ω|` exceeds `max_observations`.
pub fn brute_force_with_cap(scenario: &Scenario, max_observations: usize) -> Result<OptResult, OptError> {
    scenario.ensure_valid().map_err(OptError::Invalid)?;
    let choices = candidate_images(scenario);
    let candidates: f64 = choices.iter().map(|c| c.len() as f64).product();
    let no = choices.len();
    if no > max_observations {
        return Err(OptError::TooLarge { observations: no, cap: max_observations, candidates });
    }
    let total: u64 = choices.iter().map(|c| c.len() as u64).product();
    // mixed-radix index over the admissible images
    let decode = |mut k: u64| {
        let mut map = vec![0; no];
        for o in (0..no).rev() {
            let r = choices[o].len() as u64;
            map[o] = choices[o][(k % r) as usize];
            k /= r;
        }
        Alteration::from_images(map)
    };
    let budget = scenario.cost_model.budget;
    let values: Vec<Option<f64>> = (0..total)
        .into_par_iter()
        .map(|k| {
            let alt = decode(k);
            alteration_cost(&scenario.cost_model, &alt).within(budget).then(|| reach_value(scenario, &alt))
        })
        .collect();
    let best = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let pick = (0..total)
        .filter(|&k| values[k as usize].is_some_and(|v| v >= best - TIE_EPS))
        .map(decode)
        .min()
        .expect("identity is feasible");
    let evaluated = values.iter().filter(|v| v.is_some()).count() as u64;
    let root = relaxation_bound(scenario, &SearchNode::root(scenario)).value;
    finish(scenario, pick, OptStatus::Optimal, evaluated, root)
}

pub fn brute_force(scenario: &Scenario) -> Result<OptResult, OptError> {
    brute_force_with_cap(scenario, BRUTE_FORCE_MAX_OBS)
}

/// Observations by descending number of product transitions their image
/// controls, ties by index.
fn branching_order(scenario: &Scenario) -> Vec<usize> {
    let pomdp = &scenario.pomdp;
    let nn = scenario.fsc.num_nodes();
    let mut impact = vec![0usize; pomdp.num_observations()];
    for s in 0..pomdp.num_states() {
        let support: usize =
            pomdp.transitions[s].iter().map(|succ| succ.iter().filter(|(_, p)| *p > 0.0).count()).sum();
        impact[pomdp.obs_of[s]] += nn * support;
    }
    let o0 = scenario.initial_observation();
    let mut order: Vec<usize> = (0..impact.len()).filter(|&o| o != o0).collect();
    order.sort_by(|&a, &b| impact[b].cmp(&impact[a]).then(a.cmp(&b)));
    order
}

struct Search<'a> {
    scenario: &'a Scenario,
    order: Vec<usize>,
    limits: SearchLimits,
    started: Instant,
    nodes: u64,
    stopped: bool,
    best: Alteration,
    best_value: f64,
    root_bound: Option<f64>,
}

impl Search<'_> {
    fn out_of_budget(&mut self) -> bool {
        if self.limits.max_nodes.is_some_and(|m| self.nodes >= m) {
            self.stopped = true;
        }
        if let Some(secs) = self.limits.max_seconds {
            if self.nodes % 64 == 0 && self.started.elapsed().as_secs_f64() >= secs {
                self.stopped = true;
            }
        }
        self.stopped
    }

    fn offer(&mut self, alt: Alteration, value: f64) {
        if value > self.best_value + TIE_EPS || (value >= self.best_value - TIE_EPS && alt < self.best) {
            self.best = alt;
            self.best_value = value;
        }
    }

    /// Tie key of the smallest completion of `node`: undecided observations
    /// keep their identity, which ranks first.
    fn smallest_completion(&self, node: &SearchNode) -> Vec<usize> {
        node.decided.iter().enumerate().map(|(o, d)| d.map_or(0, |t| if t == o { 0 } else { t + 1 })).collect()
    }

    fn dfs(&mut self, node: &mut SearchNode, depth: usize) {
        if self.out_of_budget() {
            return;
        }
        self.nodes += 1;
        if depth == self.order.len() {
            let alt = node.alteration().expect("complete");
            let v = reach_value(self.scenario, &alt);
            self.offer(alt, v);
            return;
        }
        let bound = relaxation_bound(self.scenario, node);
        self.root_bound.get_or_insert(bound.value);
        node.bound = bound.value;
        if bound.infeasible || bound.value < self.best_value - TIE_EPS {
            return;
        }
        if bound.value <= self.best_value + TIE_EPS && self.smallest_completion(node) >= self.best.tie_key().collect::<Vec<_>>() {
            return;
        }
        let o = self.order[depth];
        let cm = &self.scenario.cost_model;
        for img in open_images(self.scenario, node, o) {
            let c = cm.cost(o, img).expect("permitted image");
            node.decided[o] = Some(img);
            node.committed_cost += c;
            self.dfs(node, depth + 1);
            node.committed_cost -= c;
            node.decided[o] = None;
            if self.stopped {
                return;
            }
        }
    }
}

fn search(scenario: &Scenario, limits: &SearchLimits, warm: Option<&Alteration>) -> Result<OptResult, OptError> {
    scenario.ensure_valid().map_err(OptError::Invalid)?;
    let identity = scenario.identity();
    let mut s = Search {
        scenario,
        order: branching_order(scenario),
        limits: *limits,
        started: Instant::now(),
        nodes: 0,
        stopped: false,
        best_value: reach_value(scenario, &identity),
        best: identity,
        root_bound: None,
    };
    if let Some(w) = warm {
        if alteration_cost(&scenario.cost_model, w).within(scenario.cost_model.budget) {
            let v = reach_value(scenario, w);
            s.offer(w.clone(), v);
        }
    }
    let mut root = SearchNode::root(scenario);
    s.dfs(&mut root, 0);
    let status = if s.stopped { OptStatus::Incumbent } else { OptStatus::Optimal };
    let root_bound = s.root_bound.unwrap_or(s.best_value);
    finish(scenario, s.best, status, s.nodes, root_bound)
}

pub fn branch_and_bound(scenario: &Scenario, limits: &SearchLimits) -> Result<OptResult, OptError> {
    search(scenario, limits, None)
}

/// One search per budget, each warm-started from the previous optimum.
pub fn budget_sweep(scenario: &Scenario, budgets: &[f64], limits: &SearchLimits) -> Result<Vec<OptResult>, OptError> {
    if budgets.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(OptError::UnsortedBudgets(budgets.to_vec()));
    }
    let mut out: Vec<OptResult> = Vec::with_capacity(budgets.len());
    for &b in budgets {
        let sc = scenario.with_budget(b);
        let warm = out.last().map(|r| r.best_alteration.clone());
        out.push(search(&sc, limits, warm.as_ref())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
