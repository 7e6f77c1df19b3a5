//! Simulation engine for a parimutuel prediction market in which agents bet
//! fractions of their wealth on the components of a simplex-valued random
//! vector. The crate provides the settlement rule, a sub-step ("flow")
//! variant of it, a set of stochastic environments with exact
//! conditional-expectation oracles, reference strategies, estimators that
//! decode market forecasts, run diagnostics and a seeded experiment harness.

pub mod diagnostics;
pub mod engine;
pub mod environments;
mod error;
pub mod estimators;
pub mod flow;
pub mod harness;
pub mod rng;
pub mod simplex;
pub mod strategies;
pub mod types;

pub use error::{Error, Result};
pub use simplex::{simplex_project, sq_distance, SimplexPoint};
pub use types::{AgentBets, DebitSchedule, RoundRecord, StrategyDecision, WealthVector};
