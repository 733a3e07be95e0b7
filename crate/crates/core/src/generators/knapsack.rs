use std::collections::BTreeMap;

use num_rational::Ratio;

use super::GeneratorError;
use crate::model::{CostModel, Fsc, IdSet, Pomdp, Scenario};

/// A 0/1 knapsack decision instance.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance {
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub capacity: f64,
    pub threshold: f64,
}

impl KnapsackInstance {
    pub fn new(weights: Vec<f64>, values: Vec<f64>, capacity: f64, threshold: f64) -> Self {
        KnapsackInstance { weights, values, capacity, threshold }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn describe(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "knapsack weights={} values={} capacity={} threshold={}",
            join(&self.weights),
            join(&self.values),
            self.capacity,
            self.threshold
        )
    }

    fn check(&self) -> Result<(), GeneratorError> {
        let bad = |msg: String| Err(GeneratorError::Knapsack(msg));
        if self.weights.is_empty() || self.weights.len() != self.values.len() {
            return bad(format!("{} weights vs {} values", self.weights.len(), self.values.len()));
        }
        if let Some(w) = self.weights.iter().chain(&self.values).find(|&&w| !(w.is_finite() && w > 0.0)) {
            return bad(format!("entry {w} is not positive"));
        }
        if !(self.capacity.is_finite() && self.capacity >= 0.0 && self.threshold.is_finite() && self.threshold >= 0.0) {
            return bad("capacity and threshold must be nonnegative".to_string());
        }
        Ok(())
    }

    /// Probability of `s0 --a--> s_i`, `v_i / (2 Σ v)`. Exact rational
    /// construction when all values are integers.
    fn branch_probabilities(&self) -> Vec<f64> {
        let integral = self.values.iter().all(|v| v.fract() == 0.0 && *v < 1e15);
        if integral {
            let ints: Vec<u128> = self.values.iter().map(|&v| v as u128).collect();
            let total: u128 = ints.iter().sum();
            ints.iter()
                .map(|&v| {
                    let r = Ratio::new(v, 2 * total);
                    *r.numer() as f64 / *r.denom() as f64
                })
                .collect()
        } else {
            let total: f64 = self.values.iter().sum();
            self.values.iter().map(|v| v / (2.0 * total)).collect()
        }
    }

    /// `r = L / (2 Σ v)`.
    pub fn threshold_ratio(&self) -> f64 {
        self.threshold / (2.0 * self.values.iter().sum::<f64>())
    }
}

/// Output of [`gen_knapsack`].
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackScenario {
    pub scenario: Scenario,
    pub threshold_r: f64,
}

/// Item state / observation ids are `s{i}` / `o{i}` for `i` in `1..=n`; the
/// special states are `s0`, `sclub`, `stop`, `sbot`.
pub fn gen_knapsack(inst: &KnapsackInstance) -> Result<KnapsackScenario, GeneratorError> {
    inst.check()?;
    let n = inst.len();
    let suffixes: Vec<String> =
        std::iter::once("0".to_string()).chain((1..=n).map(|i| i.to_string())).chain(["club", "top", "bot"].map(String::from)).collect();
    let states = IdSet::new(suffixes.iter().map(|x| format!("s{x}")));
    let observations = IdSet::new(suffixes.iter().map(|x| format!("o{x}")));
    let actions = IdSet::new(["a", "b"]);
    let st = |x: &str| states.get(&format!("s{x}")).unwrap();
    let ob = |x: &str| observations.get(&format!("o{x}")).unwrap();
    let (a, b) = (actions.get("a").unwrap(), actions.get("b").unwrap());
    let (s0, club, top, bot) = (st("0"), st("club"), st("top"), st("bot"));

    let mut transitions = vec![vec![Vec::new(); 2]; states.len()];
    let probs = inst.branch_probabilities();
    let mut from_s0: Vec<(usize, f64)> = (1..=n).map(|i| (st(&i.to_string()), probs[i - 1])).collect();
    from_s0.push((club, 0.5));
    from_s0.sort_by_key(|&(t, _)| t);
    transitions[s0][a] = from_s0;
    transitions[s0][b] = vec![(s0, 1.0)];
    for i in 1..=n {
        let si = st(&i.to_string());
        transitions[si][a] = vec![(top, 1.0)];
        transitions[si][b] = vec![(bot, 1.0)];
    }
    transitions[club][b] = vec![(top, 1.0)];
    transitions[club][a] = vec![(bot, 1.0)];
    for sink in [top, bot] {
        transitions[sink][a] = vec![(sink, 1.0)];
        transitions[sink][b] = vec![(sink, 1.0)];
    }

    let mut obs_of = vec![0; states.len()];
    for x in &suffixes {
        obs_of[st(x)] = ob(x);
    }

    let nodes = IdSet::new(["n0", "n1", "n2"]);
    let (n0, n1, n2) = (nodes.get("n0").unwrap(), nodes.get("n1").unwrap(), nodes.get("n2").unwrap());
    let no = observations.len();
    let item_obs: Vec<usize> = (1..=n).map(|i| ob(&i.to_string())).collect();
    let mut action_of = vec![vec![Some(b); no]; 3];
    let mut next_node = vec![vec![Some(n2); no]; 3];
    action_of[n0][ob("0")] = Some(a);
    next_node[n0][ob("0")] = Some(n1);
    for &o in &item_obs {
        action_of[n1][o] = Some(a);
    }

    let mut costs = BTreeMap::new();
    for o in 0..no {
        costs.insert((o, o), 0.0);
    }
    for (i, &o) in item_obs.iter().enumerate() {
        costs.insert((o, ob("club")), inst.weights[i]);
    }

    Ok(KnapsackScenario {
        scenario: Scenario {
            pomdp: Pomdp { states, actions, observations, transitions, initial_state: s0, obs_of },
            fsc: Fsc { nodes, initial_node: n0, action_of, next_node },
            cost_model: CostModel::new(costs, inst.capacity),
            decoy: vec![bot],
        },
        threshold_r: inst.threshold_ratio(),
    })
}
