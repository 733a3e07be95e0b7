#![allow(dead_code)]

use std::collections::BTreeMap;

use decoyforge_core::{Alteration, CostModel, Fsc, IdSet, Pomdp, Scenario};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact transition table `P[s][a] = [(s', p)]`.
pub type RationalTable = Vec<Vec<Vec<(usize, BigRational)>>>;

pub struct RandomInstance {
    pub scenario: Scenario,
    pub exact: RationalTable,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Small random scenario: at most 6 states, 3 nodes, 4 observations and a
/// budget in {0, 1, 2}. Probabilities are `w / d` with small integers, kept
/// exactly alongside the float table.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.random_range(2..=6);
    let na = rng.random_range(1..=2);
    let no = rng.random_range(1..=4);
    let nn = rng.random_range(1..=3);

    let mut transitions = vec![vec![Vec::new(); na]; ns];
    let mut exact: RationalTable = vec![vec![Vec::new(); na]; ns];
    for s in 0..ns {
        for a in 0..na {
            let k = rng.random_range(1..=ns.min(3));
            let mut targets: Vec<usize> = (0..ns).collect();
            for i in 0..k {
                let j = rng.random_range(i..ns);
                targets.swap(i, j);
            }
            let mut targets = targets[..k].to_vec();
            targets.sort_unstable();
            let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=4)).collect();
            let total: i64 = weights.iter().sum();
            for (&t, &w) in targets.iter().zip(&weights) {
                transitions[s][a].push((t, w as f64 / total as f64));
                exact[s][a].push((t, ratio(w, total)));
            }
        }
    }
    let obs_of = (0..ns).map(|_| rng.random_range(0..no)).collect();
    let action_of = (0..nn).map(|_| (0..no).map(|_| Some(rng.random_range(0..na))).collect()).collect();
    let next_node = (0..nn).map(|_| (0..no).map(|_| Some(rng.random_range(0..nn))).collect()).collect();

    let mut costs = BTreeMap::new();
    for from in 0..no {
        costs.insert((from, from), 0.0);
        for to in (0..no).filter(|&t| t != from) {
            if rng.random_bool(0.6) {
                costs.insert((from, to), [0.0, 1.0, 1.0, 2.0][rng.random_range(0..4)]);
            }
        }
    }
    let budget = rng.random_range(0..=2) as f64;

    let mut decoy: Vec<usize> = (0..ns).filter(|&s| s != 0 && rng.random_bool(0.3)).collect();
    if decoy.is_empty() {
        decoy.push(rng.random_range(1..ns));
    }
    if rng.random_bool(0.05) {
        decoy.insert(0, 0);
    }

    let name = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let scenario = Scenario {
        pomdp: Pomdp {
            states: IdSet::new(name("s", ns)),
            actions: IdSet::new(name("a", na)),
            observations: IdSet::new(name("o", no)),
            transitions,
            initial_state: 0,
            obs_of,
        },
        fsc: Fsc { nodes: IdSet::new(name("n", nn)), initial_node: 0, action_of, next_node },
        cost_model: CostModel::new(costs, budget),
        decoy,
    };
    RandomInstance { scenario, exact }
}

/// Any total alteration, permitted or not.
pub fn random_alteration(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Alteration {
    let no = scenario.pomdp.num_observations();
    Alteration::from_images((0..no).map(|_| rng.random_range(0..no)).collect())
}

/// A total alteration that fixes the initial observation and uses only
/// permitted pairs.
pub fn random_admissible(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Alteration {
    let no = scenario.pomdp.num_observations();
    let o0 = scenario.initial_observation();
    let images = (0..no)
        .map(|o| {
            if o == o0 {
                return o;
            }
            let options: Vec<usize> = scenario.cost_model.images(o).map(|(t, _)| t).collect();
            options[rng.random_range(0..options.len())]
        })
        .collect();
    Alteration::from_images(images)
}

/// Every admissible alteration, regardless of budget.
pub fn all_admissible(scenario: &Scenario) -> Vec<Alteration> {
    let no = scenario.pomdp.num_observations();
    let o0 = scenario.initial_observation();
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for o in 0..no {
        let options: Vec<usize> =
            if o == o0 { vec![o] } else { scenario.cost_model.images(o).map(|(t, _)| t).collect() };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |&t| {
                    let mut p = prefix.clone();
                    p.push(t);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Alteration::from_images).collect()
}

/// Product chain rows built straight from the tables: from `(s, n)` with
/// `o = alt(O(s))`, go to `(s', δ(n, o))` with `P(s, γ(n, o), s')`.
pub fn product_rows<T: Clone>(
    scenario: &Scenario,
    table: &[Vec<Vec<(usize, T)>>],
    alt: &Alteration,
) -> Vec<Vec<(usize, T)>> {
    let nn = scenario.fsc.num_nodes();
    let mut rows = Vec::new();
    for (s, by_action) in table.iter().enumerate() {
        let o = alt.image(scenario.pomdp.obs_of[s]);
        for n in 0..nn {
            let a = scenario.fsc.action_of[n][o].unwrap();
            let next = scenario.fsc.next_node[n][o].unwrap();
            rows.push(by_action[a].iter().map(|(t, p)| (t * nn + next, p.clone())).collect());
        }
    }
    rows
}

/// Exact probability of ever entering the decoy set, by Gaussian elimination
/// over the rationals on the states that can reach it.
pub fn exact_reach(scenario: &Scenario, table: &RationalTable, alt: &Alteration) -> BigRational {
    let nn = scenario.fsc.num_nodes();
    let rows = product_rows(scenario, table, alt);
    let nq = rows.len();
    let goal: Vec<bool> = (0..nq).map(|q| scenario.decoy.contains(&(q / nn))).collect();
    let q0 = scenario.pomdp.initial_state * nn + scenario.fsc.initial_node;

    let mut live = goal.clone();
    loop {
        let mut grew = false;
        for q in 0..nq {
            if !live[q] && rows[q].iter().any(|(t, p)| live[*t] && !p.is_zero()) {
                live[q] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    if !live[q0] {
        return BigRational::zero();
    }
    if goal[q0] {
        return BigRational::one();
    }

    let unknown: Vec<usize> = (0..nq).filter(|&q| live[q] && !goal[q]).collect();
    let col: BTreeMap<usize, usize> = unknown.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let m = unknown.len();
    // (I - T) z = T·1_goal
    let mut a = vec![vec![BigRational::zero(); m + 1]; m];
    for (i, &q) in unknown.iter().enumerate() {
        a[i][i] += BigRational::one();
        for (t, p) in &rows[q] {
            if goal[*t] {
                a[i][m] += p.clone();
            } else if let Some(&j) = col.get(t) {
                a[i][j] -= p.clone();
            }
        }
    }
    for c in 0..m {
        let pivot = (c..m).find(|&r| !a[r][c].is_zero()).expect("singular reach system");
        a.swap(c, pivot);
        let inv = a[c][c].recip();
        for k in c..=m {
            a[c][k] = &a[c][k] * &inv;
        }
        for r in 0..m {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for k in c..=m {
                    let d = &f * &a[c][k];
                    a[r][k] -= d;
                }
            }
        }
    }
    a[col[&q0]][m].clone()
}

pub fn to_f64(r: &BigRational) -> f64 {
    let scale = 1u64 << 53;
    let scaled = (r * BigRational::from_integer(BigInt::from(scale))).round().to_integer();
    let n: i64 = scaled.try_into().expect("probability fits");
    n as f64 / scale as f64
}

/// Largest total value of a subset whose weight fits `capacity`.
pub fn knapsack_dp(weights: &[u64], values: &[u64], capacity: u64) -> u64 {
    let mut best = vec![0u64; capacity as usize + 1];
    for (&w, &v) in weights.iter().zip(values) {
        for c in (w as usize..=capacity as usize).rev() {
            best[c] = best[c].max(best[c - w as usize] + v);
        }
    }
    best[capacity as usize]
}

/// Exact transition table of the knapsack reduction scenario, written out
/// from the instance integers.
pub fn knapsack_table(scenario: &Scenario, values: &[u64]) -> RationalTable {
    let st = |id: &str| scenario.pomdp.states.get(id).unwrap();
    let ac = |id: &str| scenario.pomdp.actions.get(id).unwrap();
    let (a, b) = (ac("a"), ac("b"));
    let total: u64 = values.iter().sum();
    let mut table: RationalTable = vec![vec![Vec::new(); 2]; scenario.pomdp.num_states()];
    let one = BigRational::one();
    let mut from_s0: Vec<(usize, BigRational)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (st(&format!("s{}", i + 1)), ratio(v as i64, 2 * total as i64)))
        .collect();
    from_s0.push((st("sclub"), ratio(1, 2)));
    table[st("s0")][a] = from_s0;
    table[st("s0")][b] = vec![(st("s0"), one.clone())];
    for i in 1..=values.len() {
        let s = st(&format!("s{i}"));
        table[s][a] = vec![(st("stop"), one.clone())];
        table[s][b] = vec![(st("sbot"), one.clone())];
    }
    table[st("sclub")][a] = vec![(st("sbot"), one.clone())];
    table[st("sclub")][b] = vec![(st("stop"), one.clone())];
    for sink in ["stop", "sbot"] {
        table[st(sink)][a] = vec![(st(sink), one.clone())];
        table[st(sink)][b] = vec![(st(sink), one.clone())];
    }
    table
}

pub fn rational(n: u64, d: u64) -> BigRational {
    ratio(n as i64, d as i64)
}
