//! Exact evaluation of a fixed alteration: the product goal Markov chain over
//! (state, controller node) pairs, its decoy-reachability vector, and a Monte
//! Carlo oracle that replays the execution semantics directly.

mod product;
mod reach;
mod simulate;

pub use product::{build_product, path_probability, ConstructionWork, ProductChain};
pub use reach::{reach_probability, ReachMethod, ReachOptions, ReachSolution};
pub use simulate::{simulate, SimConfig, SimEstimate};

use crate::model::{alteration_cost, AltCost, Alteration, Scenario, ValidationReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("invalid scenario: {0}")]
    Invalid(ValidationReport),
    #[error("alteration covers {got} observations, scenario has {expected}")]
    AlterationSize { expected: usize, got: usize },
    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub probability: f64,
    pub cost: AltCost,
    pub within_budget: bool,
    pub residual: f64,
    pub method: ReachMethod,
    pub iterations: usize,
}

pub(crate) fn check_alteration(scenario: &Scenario, alt: &Alteration) -> Result<(), VerifyError> {
    let expected = scenario.pomdp.num_observations();
    if alt.len() != expected {
        return Err(VerifyError::AlterationSize { expected, got: alt.len() });
    }
    Ok(())
}

/// Probability, cost and budget feasibility of `alt`.
pub fn verify(scenario: &Scenario, alt: &Alteration, opts: &ReachOptions) -> Result<Verification, VerifyError> {
    scenario.ensure_valid().map_err(VerifyError::Invalid)?;
    check_alteration(scenario, alt)?;
    let chain = build_product(scenario, alt);
    let sol = reach_probability(&chain, opts)?;
    let cost = alteration_cost(&scenario.cost_model, alt);
    Ok(Verification {
        probability: sol.value,
        cost,
        within_budget: cost.within(scenario.cost_model.budget),
        residual: sol.residual,
        method: sol.method,
        iterations: sol.iterations,
    })
}

/// Exact reach value of `alt`, skipping validation. Used on hot paths where
/// the scenario was validated once up front.
pub(crate) fn reach_value(scenario: &Scenario, alt: &Alteration) -> f64 {
    let chain = build_product(scenario, alt);
    reach::solve_direct(&chain).value
}
