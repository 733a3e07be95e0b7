//! Mixed-integer model of the alteration problem over the extended product
//! of (state, controller node, altered observation) triples, with the
//! McCormick linearization of the Bellman products and LP-format export.
//!
//! Variable layout: all `x` binaries first (permitted pairs in index order),
//! then one `z` per triple, then the `l` products. McCormick rows are not
//! stored; they are derived from the `l` metadata when iterated.

mod external;
mod lp;
mod names;

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::path::PathBuf;

pub use external::{parse_solution, solve_external, ExternalSolution};
pub use lp::{export_lp, format_number, write_lp};
pub use names::{compose as compose_name, decompose as decompose_name, escape as escape_id};

use crate::linsys::FixedPointSystem;
use crate::model::{Alteration, IdSet, Scenario, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("invalid scenario: {0}")]
    Invalid(ValidationReport),
    #[error("identity pair of the initial observation `{observation}` is forbidden; x[O(s0),O(s0)] = 1 cannot hold")]
    InitialIdentityForbidden { observation: String },
    #[error("alteration covers {got} observations, model has {expected}")]
    AlterationSize { expected: usize, got: usize },
    #[error("alteration uses forbidden pair {from}->{to}")]
    ForbiddenPair { from: String, to: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("external solver `{command}` failed: {message}")]
    Solver { command: String, message: String },
    #[error("solution line {line}: {message}")]
    Solution { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MilpOptions {
    /// Create `l_{s,o,s',·,·}` only when some action moves `s` to `s'`.
    pub sparse_l: bool,
    /// Drop triples whose (state, node) pair is unreachable from the start
    /// under every admissible alteration.
    pub prune_unreachable: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { sparse_l: true, prune_unreachable: false }
    }
}

const ABSENT: usize = usize::MAX;

/// Triples `(s, n, o)`: the robot is in `s`, its controller in `n`, and it
/// perceives `o` in place of `O(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedProduct {
    pub num_states: usize,
    pub num_nodes: usize,
    pub num_observations: usize,
    triples: Vec<(usize, usize, usize)>,
    index: Vec<usize>,
}

impl ExtendedProduct {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triple(&self, t: usize) -> (usize, usize, usize) {
        self.triples[t]
    }

    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn find(&self, s: usize, n: usize, o: usize) -> Option<usize> {
        let i = self.index[(s * self.num_nodes + n) * self.num_observations + o];
        (i != ABSENT).then_some(i)
    }

    /// Row of `T3` at triple `t`: `P(s, γ(n,o), s')` to every kept
    /// `(s', δ(n,o), o')`, for all `o'`.
    pub fn successors(&self, scenario: &Scenario, t: usize) -> Vec<(usize, f64)> {
        let (s, n, o) = self.triples[t];
        let a = scenario.fsc.action(n, o);
        let next = scenario.fsc.next(n, o);
        let mut out = Vec::new();
        for &(s2, p) in scenario.pomdp.successors(s, a) {
            if p > 0.0 {
                out.extend((0..self.num_observations).filter_map(|o2| self.find(s2, next, o2).map(|t2| (t2, p))));
            }
        }
        out
    }
}

/// Images an observation may take: the initial observation is pinned to
/// itself, every other observation ranges over its permitted pairs.
fn admissible_images(scenario: &Scenario, o: usize) -> Vec<usize> {
    if o == scenario.initial_observation() {
        return vec![o];
    }
    scenario.cost_model.images(o).map(|(to, _)| to).collect()
}

pub fn build_extended_product(scenario: &Scenario, prune_unreachable: bool) -> ExtendedProduct {
    let (ns, nn, no) =
        (scenario.pomdp.num_states(), scenario.fsc.num_nodes(), scenario.pomdp.num_observations());
    let keep = if prune_unreachable {
        let images: Vec<Vec<usize>> = (0..no).map(|o| admissible_images(scenario, o)).collect();
        let mut seen = vec![false; ns * nn];
        let start = scenario.pomdp.initial_state * nn + scenario.fsc.initial_node;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(q) = stack.pop() {
            let (s, n) = (q / nn, q % nn);
            for &o in &images[scenario.pomdp.obs_of[s]] {
                let a = scenario.fsc.action(n, o);
                let next = scenario.fsc.next(n, o);
                for &(s2, p) in scenario.pomdp.successors(s, a) {
                    let q2 = s2 * nn + next;
                    if p > 0.0 && !seen[q2] {
                        seen[q2] = true;
                        stack.push(q2);
                    }
                }
            }
        }
        seen
    } else {
        vec![true; ns * nn]
    };
    let mut triples = Vec::new();
    let mut index = vec![ABSENT; ns * nn * no];
    for q in 0..ns * nn {
        if keep[q] {
            for o in 0..no {
                index[q * no + o] = triples.len();
                triples.push((q / nn, q % nn, o));
            }
        }
    }
    ExtendedProduct { num_states: ns, num_nodes: nn, num_observations: no, triples, index }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Budget,
    InitFix,
    Total { obs: usize },
    Decoy { triple: usize },
    Bellman { triple: usize },
    /// `l ≤ z'`
    Mc1 { l: usize },
    /// `l ≤ x`
    Mc2 { l: usize },
    /// `l ≥ z' − (1 − x)`
    Mc3 { l: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row<'a> {
    pub kind: RowKind,
    /// `(variable, coefficient)`, sorted by variable.
    pub terms: Cow<'a, [(usize, f64)]>,
    pub sense: Sense,
    pub rhs: f64,
}

/// One linearization variable `l_{s,o,s',n',o'} = x_{O(s),o} · z_{s',n',o'}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LVar {
    pub state: usize,
    pub obs: usize,
    /// Triple index of `(s', n', o')`.
    pub target: usize,
    /// Variable index of `x_{O(s),o}`.
    pub x: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    X { from: usize, to: usize },
    Z { triple: usize },
    L(LVar),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MilpStats {
    pub num_vars: usize,
    pub num_constraints: usize,
    pub num_x: usize,
    pub num_z: usize,
    pub num_l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub product: ExtendedProduct,
    pub options: MilpOptions,
    states: IdSet,
    nodes: IdSet,
    observations: IdSet,
    obs_of: Vec<usize>,
    decoy: Vec<bool>,
    x_pairs: Vec<(usize, usize)>,
    x_cost: Vec<f64>,
    /// `x_index[from][to]`, `ABSENT` for forbidden pairs.
    x_index: Vec<Vec<usize>>,
    l_vars: Vec<LVar>,
    rows: Vec<Row<'static>>,
    objective: usize,
    /// Triples that reach no decoy triple under any admissible alteration;
    /// their `z` is bounded to 0.
    dead: Vec<bool>,
}

impl MilpModel {
    pub fn num_x(&self) -> usize {
        self.x_pairs.len()
    }

    pub fn num_z(&self) -> usize {
        self.product.len()
    }

    pub fn num_l(&self) -> usize {
        self.l_vars.len()
    }

    pub fn num_vars(&self) -> usize {
        self.num_x() + self.num_z() + self.num_l()
    }

    pub fn objective(&self) -> usize {
        self.objective
    }

    pub fn x_var(&self, from: usize, to: usize) -> Option<usize> {
        let i = self.x_index[from][to];
        (i != ABSENT).then_some(i)
    }

    pub fn x_pairs(&self) -> &[(usize, usize)] {
        &self.x_pairs
    }

    pub fn z_var(&self, triple: usize) -> usize {
        self.num_x() + triple
    }

    pub fn l_vars(&self) -> &[LVar] {
        &self.l_vars
    }

    pub fn l_var(&self, k: usize) -> usize {
        self.num_x() + self.num_z() + k
    }

    pub fn kind(&self, v: usize) -> VarKind {
        let (nx, nz) = (self.num_x(), self.num_z());
        if v < nx {
            let (from, to) = self.x_pairs[v];
            VarKind::X { from, to }
        } else if v < nx + nz {
            VarKind::Z { triple: v - nx }
        } else {
            VarKind::L(self.l_vars[v - nx - nz])
        }
    }

    /// Upper bound of variable `v` (all lower bounds are 0).
    pub fn upper_bound(&self, v: usize) -> f64 {
        match self.kind(v) {
            VarKind::Z { triple } if self.dead[triple] => 0.0,
            _ => 1.0,
        }
    }

    pub fn is_binary(&self, v: usize) -> bool {
        v < self.num_x()
    }

    pub fn var_name(&self, v: usize) -> String {
        let obs = |o: usize| self.observations.id(o);
        match self.kind(v) {
            VarKind::X { from, to } => names::compose("x", &[obs(from), obs(to)]),
            VarKind::Z { triple } => {
                let (s, n, o) = self.product.triple(triple);
                names::compose("z", &[self.states.id(s), self.nodes.id(n), obs(o)])
            }
            VarKind::L(l) => names::compose("l", &self.l_ids(&l)),
        }
    }

    fn l_ids(&self, l: &LVar) -> [&str; 5] {
        let (s2, n2, o2) = self.product.triple(l.target);
        [
            self.states.id(l.state),
            self.observations.id(l.obs),
            self.states.id(s2),
            self.nodes.id(n2),
            self.observations.id(o2),
        ]
    }

    pub fn row_name(&self, kind: RowKind) -> String {
        let triple_ids = |t: usize| {
            let (s, n, o) = self.product.triple(t);
            [self.states.id(s), self.nodes.id(n), self.observations.id(o)]
        };
        match kind {
            RowKind::Budget => "budget".to_string(),
            RowKind::InitFix => "init_fix".to_string(),
            RowKind::Total { obs } => names::compose("total", &[self.observations.id(obs)]),
            RowKind::Decoy { triple } => names::compose("decoy", &triple_ids(triple)),
            RowKind::Bellman { triple } => names::compose("bell", &triple_ids(triple)),
            RowKind::Mc1 { l } => names::compose("mc1", &self.l_ids(&self.l_vars[l])),
            RowKind::Mc2 { l } => names::compose("mc2", &self.l_ids(&self.l_vars[l])),
            RowKind::Mc3 { l } => names::compose("mc3", &self.l_ids(&self.l_vars[l])),
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len() + 3 * self.l_vars.len()
    }

    /// Every row in export order: stored rows, then the three McCormick
    /// rows of each `l` in turn.
    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        let stored = self.rows.iter().map(|r| Row { kind: r.kind, terms: Cow::Borrowed(&r.terms[..]), ..*r });
        let mc = (0..self.l_vars.len()).flat_map(move |k| {
            let lv = self.l_var(k);
            let z = self.z_var(self.l_vars[k].target);
            let x = self.l_vars[k].x;
            let sorted = |a: (usize, f64), b: (usize, f64)| if a.0 < b.0 { vec![a, b] } else { vec![b, a] };
            let mut three = vec![(x, -1.0), (z, -1.0), (lv, 1.0)];
            three.sort_by_key(|t| t.0);
            [
                Row { kind: RowKind::Mc1 { l: k }, terms: Cow::Owned(sorted((lv, 1.0), (z, -1.0))), sense: Sense::Le, rhs: 0.0 },
                Row { kind: RowKind::Mc2 { l: k }, terms: Cow::Owned(sorted((lv, 1.0), (x, -1.0))), sense: Sense::Le, rhs: 0.0 },
                Row { kind: RowKind::Mc3 { l: k }, terms: Cow::Owned(three), sense: Sense::Ge, rhs: -1.0 },
            ]
        });
        stored.chain(mc)
    }

    /// Values of every variable keyed by name, for solution parsing.
    pub fn name_index(&self) -> std::collections::HashMap<String, usize> {
        (0..self.num_vars()).map(|v| (self.var_name(v), v)).collect()
    }

    /// Alteration encoded by `values` (x above one half), if it is total and
    /// single-valued.
    pub fn decode_alteration(&self, values: &[f64]) -> Option<Alteration> {
        let no = self.observations.len();
        let mut map = vec![ABSENT; no];
        for (v, &(from, to)) in self.x_pairs.iter().enumerate() {
            if values[v] > 0.5 {
                if map[from] != ABSENT {
                    return None;
                }
                map[from] = to;
            }
        }
        map.iter().all(|&m| m != ABSENT).then(|| Alteration::from_images(map))
    }
}

pub fn count_stats(model: &MilpModel) -> MilpStats {
    MilpStats {
        num_vars: model.num_vars(),
        num_constraints: model.num_constraints(),
        num_x: model.num_x(),
        num_z: model.num_z(),
        num_l: model.num_l(),
    }
}

/// Seeds are decoy triples whose observation choice is admissible; a triple
/// is live if some admissible choice sequence leads from it to a seed.
fn live_triples(scenario: &Scenario, product: &ExtendedProduct, decoy: &[bool]) -> Vec<bool> {
    let no = product.num_observations;
    let images: Vec<Vec<usize>> = (0..no).map(|o| admissible_images(scenario, o)).collect();
    let allowed: Vec<Vec<bool>> =
        images.iter().map(|im| (0..no).map(|o| im.contains(&o)).collect()).collect();
    let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); product.len()];
    let mut live = vec![false; product.len()];
    let mut stack = Vec::new();
    for (t, &(s, n, o)) in product.triples().iter().enumerate() {
        if !allowed[scenario.pomdp.obs_of[s]][o] {
            continue;
        }
        if decoy[s] {
            live[t] = true;
            stack.push(t);
            continue;
        }
        let a = scenario.fsc.action(n, o);
        let next = scenario.fsc.next(n, o);
        for &(s2, p) in scenario.pomdp.successors(s, a) {
            if p <= 0.0 {
                continue;
            }
            for &o2 in &images[scenario.pomdp.obs_of[s2]] {
                if let Some(t2) = product.find(s2, next, o2) {
                    reverse[t2].push(t as u32);
                }
            }
        }
    }
    while let Some(t) = stack.pop() {
        for &u in &reverse[t] {
            let u = u as usize;
            if !live[u] {
                live[u] = true;
                stack.push(u);
            }
        }
    }
    live
}

pub fn build_milp(scenario: &Scenario, options: &MilpOptions) -> Result<MilpModel, MilpError> {
    let o0 = scenario.initial_observation();
    if !scenario.cost_model.permitted(o0, o0) {
        return Err(MilpError::InitialIdentityForbidden { observation: scenario.observations().id(o0).to_string() });
    }
    scenario.ensure_valid().map_err(MilpError::Invalid)?;

    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    let (ns, no) = (pomdp.num_states(), pomdp.num_observations());
    let decoy = scenario.decoy_mask();
    let product = build_extended_product(scenario, options.prune_unreachable);

    let mut x_pairs = Vec::new();
    let mut x_cost = Vec::new();
    let mut x_index = vec![vec![ABSENT; no]; no];
    for (&(from, to), &c) in &scenario.cost_model.costs {
        x_index[from][to] = x_pairs.len();
        x_pairs.push((from, to));
        x_cost.push(c);
    }
    let nx = x_pairs.len();
    let z_var = |t: usize| nx + t;

    let mut rows: Vec<Row<'static>> = Vec::new();
    let budget_terms: Vec<(usize, f64)> =
        x_cost.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(v, &c)| (v, c)).collect();
    rows.push(Row {
        kind: RowKind::Budget,
        terms: Cow::Owned(budget_terms),
        sense: Sense::Le,
        rhs: scenario.cost_model.budget,
    });
    rows.push(Row { kind: RowKind::InitFix, terms: Cow::Owned(vec![(x_index[o0][o0], 1.0)]), sense: Sense::Eq, rhs: 1.0 });
    for o in 0..no {
        let terms: Vec<(usize, f64)> = (0..no).filter_map(|to| (x_index[o][to] != ABSENT).then(|| (x_index[o][to], 1.0))).collect();
        rows.push(Row { kind: RowKind::Total { obs: o }, terms: Cow::Owned(terms), sense: Sense::Eq, rhs: 1.0 });
    }

    // Linearization variables, block by block over (s, o), and the rows of
    // the triples (s, ·, o) that use them.
    let mut l_vars: Vec<LVar> = Vec::new();
    let mut triple_rows: Vec<(usize, Row<'static>)> = Vec::new();
    let nz = product.len();
    for s in 0..ns {
        for o in 0..no {
            let here: Vec<(usize, usize)> =
                (0..fsc.num_nodes()).filter_map(|n| product.find(s, n, o).map(|t| (n, t))).collect();
            if here.is_empty() {
                continue;
            }
            let xv = x_index[pomdp.obs_of[s]][o];
            if decoy[s] {
                for &(_, t) in &here {
                    let mut terms = vec![(z_var(t), 1.0)];
                    if xv != ABSENT {
                        terms.insert(0, (xv, -1.0));
                    }
                    triple_rows.push((t, Row { kind: RowKind::Decoy { triple: t }, terms: Cow::Owned(terms), sense: Sense::Eq, rhs: 0.0 }));
                }
                continue;
            }
            let mut block = std::collections::HashMap::new();
            if xv != ABSENT {
                let next_nodes: BTreeSet<usize> = here.iter().map(|&(n, _)| fsc.next(n, o)).collect();
                let targets: Vec<usize> = if options.sparse_l {
                    let support: BTreeSet<usize> = pomdp.transitions[s]
                        .iter()
                        .flat_map(|succ| succ.iter().filter(|(_, p)| *p > 0.0).map(|&(s2, _)| s2))
                        .collect();
                    support.into_iter().collect()
                } else {
                    (0..ns).collect()
                };
                for &s2 in &targets {
                    for &n2 in &next_nodes {
                        for o2 in 0..no {
                            if let Some(t2) = product.find(s2, n2, o2) {
                                block.insert(t2, l_vars.len());
                                l_vars.push(LVar { state: s, obs: o, target: t2, x: xv });
                            }
                        }
                    }
                }
            }
            for &(n, t) in &here {
                let mut terms = vec![(z_var(t), 1.0)];
                if xv != ABSENT {
                    let a = fsc.action(n, o);
                    let next = fsc.next(n, o);
                    for &(s2, p) in pomdp.successors(s, a) {
                        if p == 0.0 {
                            continue;
                        }
                        for o2 in 0..no {
                            if let Some(&k) = product.find(s2, next, o2).and_then(|t2| block.get(&t2)) {
                                terms.push((nx + nz + k, -p));
                            }
                        }
                    }
                }
                terms.sort_by_key(|t| t.0);
                triple_rows.push((t, Row { kind: RowKind::Bellman { triple: t }, terms: Cow::Owned(terms), sense: Sense::Eq, rhs: 0.0 }));
            }
        }
    }
    triple_rows.sort_by_key(|(t, _)| *t);
    rows.extend(triple_rows.into_iter().map(|(_, r)| r));

    let objective = product
        .find(pomdp.initial_state, fsc.initial_node, o0)
        .map(z_var)
        .expect("initial triple is always kept");
    let live = live_triples(scenario, &product, &decoy);
    Ok(MilpModel {
        product,
        options: *options,
        states: pomdp.states.clone(),
        nodes: fsc.nodes.clone(),
        observations: pomdp.observations.clone(),
        obs_of: pomdp.obs_of.clone(),
        decoy,
        x_pairs,
        x_cost,
        x_index,
        l_vars,
        rows,
        objective,
        dead: live.iter().map(|&b| !b).collect(),
    })
}

/// Assignment obtained by fixing `x` to a concrete alteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSolution {
    pub objective: f64,
    pub values: Vec<f64>,
}

/// Fixes `x` to `alt`, sets `l = x · z'` and solves the remaining linear
/// Bellman system over triples for its least solution.
pub fn fix_and_solve(model: &MilpModel, alt: &Alteration) -> Result<FixedSolution, MilpError> {
    let no = model.observations.len();
    if alt.len() != no {
        return Err(MilpError::AlterationSize { expected: no, got: alt.len() });
    }
    let mut values = vec![0.0; model.num_vars()];
    for o in 0..no {
        let to = alt.image(o);
        let v = model.x_var(o, to).ok_or_else(|| MilpError::ForbiddenPair {
            from: model.observations.id(o).to_string(),
            to: model.observations.id(to).to_string(),
        })?;
        values[v] = 1.0;
    }

    let nz = model.num_z();
    let (nx, base_l) = (model.num_x(), model.num_x() + model.num_z());
    let mut sys = FixedPointSystem { rows: vec![Vec::new(); nz], constant: vec![0.0; nz] };
    for row in &model.rows {
        let t = match row.kind {
            RowKind::Decoy { triple } | RowKind::Bellman { triple } => triple,
            _ => continue,
        };
        let (s, _, o) = model.product.triple(t);
        let on = model.x_var(model.obs_of[s], o).is_some_and(|v| values[v] == 1.0);
        if !on {
            continue;
        }
        if model.decoy[s] {
            sys.constant[t] = 1.0;
        } else {
            sys.rows[t] = row
                .terms
                .iter()
                .filter(|&&(v, _)| v >= base_l)
                .map(|&(v, c)| (model.l_vars[v - base_l].target, -c))
                .collect();
        }
    }
    let z = sys.solve_direct();
    for (t, &zt) in z.iter().enumerate() {
        values[nx + t] = zt;
    }
    for (k, l) in model.l_vars.iter().enumerate() {
        values[base_l + k] = values[l.x] * z[l.target];
    }
    Ok(FixedSolution { objective: values[model.objective], values })
}

/// Names of rows, bounds and integrality conditions that `values` violates
/// by more than `tol`.
pub fn check_assignment(model: &MilpModel, values: &[f64], tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    for row in model.rows() {
        let lhs: f64 = row.terms.iter().map(|&(v, c)| c * values[v]).sum();
        let ok = match row.sense {
            Sense::Le => lhs <= row.rhs + tol,
            Sense::Ge => lhs >= row.rhs - tol,
            Sense::Eq => (lhs - row.rhs).abs() <= tol,
        };
        if !ok {
            bad.push(format!("{} (lhs {lhs}, rhs {})", model.row_name(row.kind), row.rhs));
        }
    }
    for (v, &x) in values.iter().enumerate() {
        if x < -tol || x > model.upper_bound(v) + tol {
            bad.push(format!("bound {} = {x}", model.var_name(v)));
        }
        if model.is_binary(v) && x.min(1.0 - x).abs() > tol {
            bad.push(format!("binary {} = {x}", model.var_name(v)));
        }
    }
    bad
}

#[cfg(test)]
mod tests;
