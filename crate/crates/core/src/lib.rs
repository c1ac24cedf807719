//! On-ramp merging decisions from a two-population evolutionary game.
//!
//! The AV on the ramp plays a 2×2 game (Yield/Merge against Yield/Accelerate)
//! with the main-road vehicle behind its target gap. Costs weigh arrival time
//! against acceleration, plus a shared conflict term. The stable rest point
//! of the replicator dynamics picks the maneuver, and each main-road driver's
//! hidden style weight is narrowed online from how it reacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod egt;
pub mod error;
pub mod estimation;
pub mod io;
pub mod metrics;
pub mod payoff;
pub mod runner;
pub mod scenario;
pub mod testbench;
pub mod traffic;

pub use egt::{solve_ess, EquilibriumReport, Ess, PayoffMatrix, StrategyState};
pub use payoff::{build_matrix, AgentView, DrivingStyle, GameContext};
pub use runner::{run_scenario, Policy, SimConfig, SimTrace, TableScenario};
