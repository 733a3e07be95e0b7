//! Synthesis and verification of cost-bounded observation alterations that
//! steer a POMDP agent, driven by a finite-state controller, into a decoy
//! state set.

mod linsys;
pub mod generators;
pub mod milp;
pub mod model;
pub mod optimizer;
pub mod verifier;

#[cfg(test)]
mod testutil;

pub use model::{
    alteration_cost, parse_scenario, serialize_scenario, validate_scenario, AltCost, Alteration, AlterationError,
    CostModel, Fsc, IdSet, ParseError, Pomdp, Rule, Scenario, ValidationReport, Violation,
};
pub use verifier::{verify, ReachMethod, ReachOptions, Verification, VerifyError};
