//! Multi-agent fairness simulation and analysis.
//!
//! The crate is organised around a small discrete-round experiment in which
//! agents split into two groups repeatedly choose between cooperating and
//! competing for a shared resource, plus the tooling needed to study it:
//!
//! * [`config`] and [`population`]: experiment parameters and agent setup.
//! * [`rng`]: the seeded random stream every stochastic step draws from.
//! * [`engine`]: the round loop (resource update, decisions, rewards, penalty).
//! * [`interventions`]: composable reward transformations applied per round.
//! * [`metrics`]: demographic parity, equalized odds, system bias, reward gaps.
//! * [`optimizer`]: utility model, constrained brute-force and local search,
//!   pure Nash equilibrium enumeration.

pub mod config;
pub mod engine;
pub mod interventions;
pub mod metrics;
pub mod optimizer;
pub mod population;
pub mod rng;

pub use config::{AgentState, ConfigError, GroupLabel, SimulationConfig, Strategy};
pub use engine::{run_simulation, Action, RoundRecord, SimulationResult};
pub use metrics::{BiasReport, FairnessMetric, OutcomeTable};
pub use rng::RandomStream;
