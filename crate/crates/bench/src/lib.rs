//! Fixtures shared by the benchmarks.

use decoyforge_core::generators::{gen_grid, gen_knapsack, GridSpec, KnapsackInstance};
use decoyforge_core::{Alteration, Scenario};

pub fn grid(n: usize) -> Scenario {
    gen_grid(&GridSpec::standard(n)).expect("grid fixture")
}

pub fn knapsack(items: usize) -> Scenario {
    let weights = (1..=items).map(|i| (i % 5 + 1) as f64).collect();
    let values = (1..=items).map(|i| (10 * (i % 7) + 10) as f64).collect();
    let capacity = (items as f64 * 1.5).floor();
    gen_knapsack(&KnapsackInstance::new(weights, values, capacity, 0.0)).expect("knapsack fixture").scenario
}

/// The single change that steers grids toward the hazard.
pub fn o1_to_o3(scenario: &Scenario) -> Alteration {
    Alteration::parse("o1->o3", scenario.observations()).expect("grid observations")
}
