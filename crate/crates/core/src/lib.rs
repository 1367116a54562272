//! Intent-driven orchestration of DQN xApps over a simulated O-RAN.

pub mod baselines;
pub mod campaign;
pub mod config;
pub mod error;
pub mod netsim;
pub mod orchestrator;
pub mod rl;
pub mod seed;
pub mod xapps;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
