//! Domain types: POMDPs with deterministic observations, finite-state
//! controllers, alteration cost models and the bundled [`Scenario`].
//!
//! Ids are strings at the boundary and dense indices everywhere else. Every
//! [`IdSet`] keeps its ids sorted, so index order and serialization order are
//! the same thing.

mod format;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use format::{parse_scenario, serialize_scenario, ParseError};
pub use validate::{validate_scenario, Rule, ValidationReport, Violation};

/// Tolerance used for every row-sum check.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// A sorted set of string ids with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdSet {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdSet {
    /// Builds the set, sorting and deduplicating the ids.
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        ids.sort();
        ids.dedup();
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        IdSet { ids, index }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.ids.iter().enumerate().map(|(i, s)| (i, s.as_str()))
    }
}

/// POMDP with a deterministic observation function.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    pub states: IdSet,
    pub actions: IdSet,
    pub observations: IdSet,
    /// `transitions[s][a]` is the sparse successor distribution, sorted by
    /// successor index. An empty row means the pair was never specified.
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    pub initial_state: usize,
    pub obs_of: Vec<usize>,
}

impl Pomdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s][a]
    }

    /// Number of stored nonzero `P(s, a, s')` entries.
    pub fn nonzero_transitions(&self) -> usize {
        self.transitions
            .iter()
            .flat_map(|row| row.iter())
            .map(|succ| succ.iter().filter(|(_, p)| *p > 0.0).count())
            .sum()
    }

    /// True if some action moves `s` to `t` with positive probability.
    pub fn connected(&self, s: usize, t: usize) -> bool {
        self.transitions[s]
            .iter()
            .any(|succ| succ.iter().any(|&(u, p)| u == t && p > 0.0))
    }
}

/// Finite-state controller. Tables are indexed `[node][observation]`;
/// `None` marks a gap that validation reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Fsc {
    pub nodes: IdSet,
    pub initial_node: usize,
    pub action_of: Vec<Vec<Option<usize>>>,
    pub next_node: Vec<Vec<Option<usize>>>,
}

impl Fsc {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Action chosen at `node` on observation `obs`. Requires a validated
    /// controller.
    pub fn action(&self, node: usize, obs: usize) -> usize {
        self.action_of[node][obs].expect("controller action table is not total; validate the scenario first")
    }

    /// Memory update. Requires a validated controller.
    pub fn next(&self, node: usize, obs: usize) -> usize {
        self.next_node[node][obs].expect("controller memory update is not total; validate the scenario first")
    }
}

/// Observation alteration costs. Absent pairs are forbidden.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub costs: BTreeMap<(usize, usize), f64>,
    pub budget: f64,
}

impl CostModel {
    pub fn new(costs: BTreeMap<(usize, usize), f64>, budget: f64) -> Self {
        CostModel { costs, budget }
    }

    /// Unit cost for every change, zero for identities.
    pub fn unit(num_obs: usize, budget: f64) -> Self {
        let mut costs = BTreeMap::new();
        for o in 0..num_obs {
            for p in 0..num_obs {
                costs.insert((o, p), if o == p { 0.0 } else { 1.0 });
            }
        }
        CostModel { costs, budget }
    }

    pub fn cost(&self, from: usize, to: usize) -> Option<f64> {
        self.costs.get(&(from, to)).copied()
    }

    pub fn permitted(&self, from: usize, to: usize) -> bool {
        self.costs.contains_key(&(from, to))
    }

    /// Permitted images of `from`, in index order, with their costs.
    pub fn images(&self, from: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.costs.range((from, 0)..=(from, usize::MAX)).map(|(&(_, to), &c)| (to, c))
    }

    /// Cheapest permitted image cost of `from`, if any image is permitted.
    pub fn min_cost(&self, from: usize) -> Option<f64> {
        self.images(from).map(|(_, c)| c).reduce(f64::min)
    }

    /// Number of permitted (from, to) pairs, identities included.
    pub fn permitted_pairs(&self) -> usize {
        self.costs.len()
    }

    pub fn with_budget(&self, budget: f64) -> Self {
        CostModel { costs: self.costs.clone(), budget }
    }
}

/// Total map from observations to observations.
///
/// Ordered lexicographically over observations, where each observation's
/// image ranks identity first and then by index. The identity is thus the
/// smallest alteration; this is the tie-break order of the optimizers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alteration {
    map: Vec<usize>,
}

impl Alteration {
    /// Per-observation rank used by the ordering: 0 for the identity image,
    /// `1 + index` otherwise.
    pub fn tie_key(&self) -> impl Iterator<Item = usize> + '_ {
        self.map.iter().enumerate().map(|(o, &t)| if o == t { 0 } else { t + 1 })
    }
}

impl Ord for Alteration {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.tie_key().cmp(other.tie_key())
    }
}

impl PartialOrd for Alteration {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlterationError {
    #[error("unknown observation `{0}` in alteration")]
    UnknownObservation(String),
    #[error("observation `{0}` is assigned twice")]
    Duplicate(String),
    #[error("malformed alteration pair `{0}`; expected `from->to`")]
    Malformed(String),
}

impl Alteration {
    pub fn identity(num_obs: usize) -> Self {
        Alteration { map: (0..num_obs).collect() }
    }

    /// Builds from an explicit image vector. Panics if an image is out of range.
    pub fn from_images(map: Vec<usize>) -> Self {
        let n = map.len();
        assert!(map.iter().all(|&o| o < n), "alteration image out of range");
        Alteration { map }
    }

    /// Identity everywhere except the given `(from, to)` overrides.
    pub fn from_pairs(num_obs: usize, pairs: &[(usize, usize)]) -> Self {
        let mut alt = Self::identity(num_obs);
        for &(from, to) in pairs {
            alt.map[from] = to;
        }
        alt
    }

    /// Parses the `o1->o3;o2->o0` literal; unspecified observations keep
    /// their identity.
    pub fn parse(text: &str, observations: &IdSet) -> Result<Self, AlterationError> {
        let mut alt = Self::identity(observations.len());
        let mut seen = vec![false; observations.len()];
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (from, to) = part
                .split_once("->")
                .ok_or_else(|| AlterationError::Malformed(part.to_string()))?;
            let (from, to) = (from.trim(), to.trim());
            let f = observations
                .get(from)
                .ok_or_else(|| AlterationError::UnknownObservation(from.to_string()))?;
            let t = observations
                .get(to)
                .ok_or_else(|| AlterationError::UnknownObservation(to.to_string()))?;
            if seen[f] {
                return Err(AlterationError::Duplicate(from.to_string()));
            }
            seen[f] = true;
            alt.map[f] = t;
        }
        Ok(alt)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn image(&self, obs: usize) -> usize {
        self.map[obs]
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &o)| i == o)
    }

    /// Non-identity pairs in observation order.
    pub fn changes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.iter().enumerate().filter(|(i, o)| i != *o).map(|(i, &o)| (i, o))
    }

    /// Renders the `from->to;...` literal, identities omitted.
    pub fn display<'a>(&'a self, observations: &'a IdSet) -> AlterationDisplay<'a> {
        AlterationDisplay { alt: self, observations }
    }
}

pub struct AlterationDisplay<'a> {
    alt: &'a Alteration,
    observations: &'a IdSet,
}

impl fmt::Display for AlterationDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (from, to)) in self.alt.changes().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}->{}", self.observations.id(from), self.observations.id(to))?;
        }
        Ok(())
    }
}

/// Relative slack applied to budget comparisons, so that sums such as
/// `0.1 + 0.2` do not exceed a budget of `0.3`.
pub const COST_TOL: f64 = 1e-9;

pub fn within_budget(cost: f64, budget: f64) -> bool {
    cost <= budget + COST_TOL * budget.abs().max(1.0)
}

/// Aggregate alteration cost; `Forbidden` when any pair lacks a cost entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AltCost {
    Finite(f64),
    Forbidden,
}

impl AltCost {
    pub fn finite(self) -> Option<f64> {
        match self {
            AltCost::Finite(c) => Some(c),
            AltCost::Forbidden => None,
        }
    }

    /// `c ≤ B`, allowing [`COST_TOL`] of floating-point slack in the sum.
    pub fn within(self, budget: f64) -> bool {
        matches!(self, AltCost::Finite(c) if within_budget(c, budget))
    }
}

impl fmt::Display for AltCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AltCost::Finite(c) => write!(f, "{c}"),
            AltCost::Forbidden => f.write_str("forbidden"),
        }
    }
}

/// `C(alpha) = sum_o c(o, alpha(o))`.
pub fn alteration_cost(cost_model: &CostModel, alt: &Alteration) -> AltCost {
    let mut total = 0.0;
    for (o, &img) in alt.images().iter().enumerate() {
        match cost_model.cost(o, img) {
            Some(c) => total += c,
            None => return AltCost::Forbidden,
        }
    }
    AltCost::Finite(total)
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pomdp: Pomdp,
    pub fsc: Fsc,
    pub cost_model: CostModel,
    /// Decoy states, sorted by index.
    pub decoy: Vec<usize>,
}

impl Scenario {
    pub fn observations(&self) -> &IdSet {
        &self.pomdp.observations
    }

    pub fn is_decoy(&self, s: usize) -> bool {
        self.decoy.binary_search(&s).is_ok()
    }

    pub fn decoy_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.pomdp.num_states()];
        for &s in &self.decoy {
            mask[s] = true;
        }
        mask
    }

    /// Observation emitted by the initial state; its image is always fixed.
    pub fn initial_observation(&self) -> usize {
        self.pomdp.obs_of[self.pomdp.initial_state]
    }

    pub fn with_budget(&self, budget: f64) -> Self {
        Scenario { cost_model: self.cost_model.with_budget(budget), ..self.clone() }
    }

    pub fn with_decoy(&self, decoy: Vec<usize>) -> Self {
        let mut decoy = decoy;
        decoy.sort_unstable();
        decoy.dedup();
        Scenario { decoy, ..self.clone() }
    }

    pub fn identity(&self) -> Alteration {
        Alteration::identity(self.pomdp.num_observations())
    }

    /// Err with the full report if any invariant fails.
    pub fn ensure_valid(&self) -> Result<(), ValidationReport> {
        let report = validate_scenario(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(report)
        }
    }
}
