//! Instance generators: the range-sensor grid world and the knapsack
//! reduction.

mod grid;
mod knapsack;

pub use grid::{gen_grid, Cell, GridSpec, Heading, SensorSpec, BLANK};
pub use knapsack::{gen_knapsack, KnapsackInstance, KnapsackScenario};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeneratorError {
    #[error("grid spec: {0}")]
    Grid(String),
    #[error("knapsack instance: {0}")]
    Knapsack(String),
}
