//! Joint Bayesian inference of reward preferences and demonstrator
//! expertise from demonstrations in tabular MDPs.

pub mod cli;
pub mod discrete;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod io;
pub mod mcmc;
pub mod mdp;
pub mod metrics;
pub mod numeric;
pub mod rollout;
pub mod seeds;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
