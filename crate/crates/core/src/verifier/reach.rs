use std::fmt;

use super::{ProductChain, VerifyError};
use crate::linsys::FixedPointSystem;

/// Chains up to this size are solved by elimination when no method is forced.
pub const DIRECT_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachMethod {
    Direct,
    Iterative,
}

impl fmt::Display for ReachMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReachMethod::Direct => "direct",
            ReachMethod::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachOptions {
    /// `None` picks direct elimination up to [`DIRECT_LIMIT`] states.
    pub method: Option<ReachMethod>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions { method: None, tol: 1e-12, max_iter: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachSolution {
    /// Decoy-reachability probability per product state.
    pub z: Vec<f64>,
    /// `z[q0]`.
    pub value: f64,
    /// Largest Bellman residual over all product states.
    pub residual: f64,
    pub method: ReachMethod,
    pub iterations: usize,
}

/// `z = 1` on goal states, `z = T z` elsewhere, with `z = 0` on states that
/// cannot reach a goal.
fn system(chain: &ProductChain) -> FixedPointSystem {
    let mut rows = Vec::with_capacity(chain.len());
    let mut constant = Vec::with_capacity(chain.len());
    for q in 0..chain.len() {
        if chain.goal[q] {
            rows.push(Vec::new());
            constant.push(1.0);
        } else {
            rows.push(chain.row(q).collect());
            constant.push(0.0);
        }
    }
    FixedPointSystem { rows, constant }
}

pub(crate) fn solve_direct(chain: &ProductChain) -> ReachSolution {
    let sys = system(chain);
    let z = sys.solve_direct();
    let residual = sys.residual(&z);
    ReachSolution { value: z[chain.q0], z, residual, method: ReachMethod::Direct, iterations: 1 }
}

/// Probability of reaching the goal set from every product state.
pub fn reach_probability(chain: &ProductChain, opts: &ReachOptions) -> Result<ReachSolution, VerifyError> {
    let method = opts.method.unwrap_or(if chain.len() <= DIRECT_LIMIT {
        ReachMethod::Direct
    } else {
        ReachMethod::Iterative
    });
    match method {
        ReachMethod::Direct => Ok(solve_direct(chain)),
        ReachMethod::Iterative => {
            let sys = system(chain);
            let (z, iterations) = sys
                .solve_gauss_seidel(opts.tol, opts.max_iter)
                .map_err(|e| VerifyError::NotConverged { iterations: e.iterations, residual: e.residual })?;
            let residual = sys.residual(&z);
            Ok(ReachSolution { value: z[chain.q0], z, residual, method, iterations })
        }
    }
}
