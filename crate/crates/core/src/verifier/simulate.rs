use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{Alteration, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub episodes: u64,
    pub horizon: usize,
    pub seed: u64,
}

impl SimConfig {
    /// 10⁵ episodes over `100·|Q|` steps.
    pub fn defaults_for(scenario: &Scenario, seed: u64) -> Self {
        let q = scenario.pomdp.num_states() * scenario.fsc.num_nodes();
        SimConfig { episodes: 100_000, horizon: 100 * q, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub hits: u64,
    pub episodes: u64,
    pub estimate: f64,
    /// Normal-approximation 95% half width, `1.96·sqrt(p(1-p)/N)`.
    pub half_width_95: f64,
}

fn episode(scenario: &Scenario, alt: &Alteration, decoy: &[bool], horizon: usize, rng: &mut ChaCha8Rng) -> bool {
    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    let mut state = pomdp.initial_state;
    let mut node = fsc.initial_node;
    if decoy[state] {
        return true;
    }
    for _ in 0..horizon {
        let seen = alt.image(pomdp.obs_of[state]);
        let action = fsc.action(node, seen);
        node = fsc.next(node, seen);
        let succ = pomdp.successors(state, action);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = succ.last().map_or(state, |&(t, _)| t);
        for &(t, p) in succ {
            acc += p;
            if u < acc {
                next = t;
                break;
            }
        }
        state = next;
        if decoy[state] {
            return true;
        }
    }
    false
}

/// Fraction of simulated executions that enter the decoy set within
/// `horizon` steps. Episode `k` draws from ChaCha stream `k` of `seed`, so
/// the estimate does not depend on how episodes are spread over threads.
pub fn simulate(scenario: &Scenario, alt: &Alteration, cfg: &SimConfig) -> SimEstimate {
    let decoy = scenario.decoy_mask();
    let hits = (0..cfg.episodes)
        .into_par_iter()
        .filter(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k);
            episode(scenario, alt, &decoy, cfg.horizon, &mut rng)
        })
        .count() as u64;
    let n = cfg.episodes.max(1) as f64;
    let p = hits as f64 / n;
    SimEstimate { hits, episodes: cfg.episodes, estimate: p, half_width_95: 1.96 * (p * (1.0 - p) / n).sqrt() }
}
