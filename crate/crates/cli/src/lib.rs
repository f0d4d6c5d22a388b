//! Library side of the `pqvi` runner: config parsing, the analytic profile
//! catalogue, shared instance builders, the experiment runner and the
//! acceptance suite.

pub mod acceptance;
pub mod config;
pub mod instances;
pub mod profiles;
pub mod runner;
