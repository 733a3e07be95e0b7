//! Max-reachability bound of the relaxed MDP in which undecided
//! observations may pick a different image at every product state.

use std::collections::BTreeSet;

/// One choice: the product successors it leads to.
type Choice = Vec<(usize, f64)>;

pub(super) struct RelaxedMdp {
    pub goal: Vec<bool>,
    pub choices: Vec<Vec<Choice>>,
    pub start: usize,
}

/// Iterative Tarjan over the subgraph of `active` states, following only
/// the listed choices. Returns a component id per state (`usize::MAX` for
/// inactive ones).
fn strongly_connected(active: &[bool], edges: &[Vec<Choice>]) -> Vec<usize> {
    let n = active.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    let succ = |q: usize| -> Vec<usize> {
        let set: BTreeSet<usize> = edges[q].iter().flatten().map(|&(t, _)| t).filter(|&t| active[t]).collect();
        set.into_iter().collect()
    };
    for root in 0..n {
        if !active[root] || index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((q, out, pos)) = call.last_mut() {
            let q = *q;
            if *pos < out.len() {
                let t = out[*pos];
                *pos += 1;
                if index[t] == UNSEEN {
                    index[t] = next_index;
                    low[t] = next_index;
                    next_index += 1;
                    stack.push(t);
                    on_stack[t] = true;
                    let ts = succ(t);
                    call.push((t, ts, 0));
                } else if on_stack[t] {
                    low[q] = low[q].min(index[t]);
                }
            } else {
                call.pop();
                if let Some((parent, _, _)) = call.last() {
                    low[*parent] = low[*parent].min(low[q]);
                }
                if low[q] == index[q] {
                    loop {
                        let t = stack.pop().expect("tarjan stack");
                        on_stack[t] = false;
                        comp[t] = next_comp;
                        if t == q {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

impl RelaxedMdp {
    /// States from which some choice sequence reaches the goal.
    fn live(&self) -> Vec<bool> {
        let n = self.goal.len();
        let mut reverse = vec![Vec::new(); n];
        for (q, cs) in self.choices.iter().enumerate() {
            for &(t, p) in cs.iter().flatten() {
                if p > 0.0 {
                    reverse[t].push(q);
                }
            }
        }
        let mut live = self.goal.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&q| live[q]).collect();
        while let Some(t) = stack.pop() {
            for &q in &reverse[t] {
                if !live[q] {
                    live[q] = true;
                    stack.push(q);
                }
            }
        }
        live
    }

    /// Maximal end components among live non-goal states: a component id
    /// per state and, per state, which choices stay inside its component.
    fn end_components(&self, live: &[bool]) -> (Vec<usize>, Vec<Vec<bool>>) {
        let n = self.goal.len();
        let mut active: Vec<bool> = (0..n).map(|q| live[q] && !self.goal[q]).collect();
        let mut keep: Vec<Vec<bool>> = self
            .choices
            .iter()
            .map(|cs| cs.iter().map(|c| c.iter().all(|&(t, _)| live[t])).collect())
            .collect();
        loop {
            let edges: Vec<Vec<Choice>> = (0..n)
                .map(|q| {
                    if active[q] {
                        self.choices[q].iter().zip(&keep[q]).filter(|(_, &k)| k).map(|(c, _)| c.clone()).collect()
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            let comp = strongly_connected(&active, &edges);
            let mut changed = false;
            for q in 0..n {
                if !active[q] {
                    continue;
                }
                for (c, k) in self.choices[q].iter().zip(keep[q].iter_mut()) {
                    if *k && !c.iter().all(|&(t, _)| active[t] && comp[t] == comp[q]) {
                        *k = false;
                        changed = true;
                    }
                }
                if !keep[q].iter().any(|&k| k) {
                    active[q] = false;
                    changed = true;
                }
            }
            if !changed {
                let comp = (0..n).map(|q| if active[q] { comp[q] } else { usize::MAX }).collect();
                for q in 0..n {
                    if !active[q] {
                        keep[q].iter_mut().for_each(|k| *k = false);
                    }
                }
                return (comp, keep);
            }
        }
    }

    /// Upper value iteration on the quotient that collapses end components.
    /// Starting from 1, every sweep stays above the maximal reach value, so
    /// the result is sound wherever the iteration stops.
    pub fn upper_value(&self, tol: f64, max_sweeps: usize) -> f64 {
        let n = self.goal.len();
        let live = self.live();
        if !live[self.start] {
            return 0.0;
        }
        if self.goal[self.start] {
            return 1.0;
        }
        let (comp, internal) = self.end_components(&live);

        // quotient node per state: end components share one node
        let mut node_of = vec![usize::MAX; n];
        let mut count = 0;
        let mut comp_node = std::collections::HashMap::new();
        for q in 0..n {
            if comp[q] != usize::MAX {
                node_of[q] = *comp_node.entry(comp[q]).or_insert_with(|| {
                    count += 1;
                    count - 1
                });
            } else {
                node_of[q] = count;
                count += 1;
            }
        }
        let mut value = vec![0.0; count];
        let mut fixed = vec![false; count];
        let mut node_choices: Vec<Vec<Choice>> = vec![Vec::new(); count];
        for q in 0..n {
            let u = node_of[q];
            if self.goal[q] {
                value[u] = 1.0;
                fixed[u] = true;
            } else if !live[q] {
                fixed[u] = true;
            } else {
                value[u] = 1.0;
                for (c, &inside) in self.choices[q].iter().zip(&internal[q]) {
                    if !inside {
                        node_choices[u].push(c.iter().map(|&(t, p)| (node_of[t], p)).collect());
                    }
                }
            }
        }
        let order: Vec<usize> = (0..count).filter(|&u| !fixed[u]).collect();
        for _ in 0..max_sweeps {
            let mut delta: f64 = 0.0;
            for &u in &order {
                let best = node_choices[u]
                    .iter()
                    .map(|c| c.iter().map(|&(t, p)| p * value[t]).sum::<f64>())
                    .fold(0.0, f64::max);
                let best = best.min(value[u]);
                delta = delta.max(value[u] - best);
                value[u] = best;
            }
            if delta < tol {
                break;
            }
        }
        value[node_of[self.start]]
    }
}
