//! Design of drone-base networks whose bases behave as M/G/K queues with
//! decision-dependent arrival and service rates.

pub mod design;
pub mod geo;
pub mod instance;
pub mod lp;
pub mod queueing;
pub mod milp;
pub mod generate;
pub mod heuristic;
pub mod oracle;
pub mod solver;
pub mod simulator;
pub mod analytics;
