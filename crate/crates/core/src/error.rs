use num_bigint::BigUint;
use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The problem parameters are invalid (bad `k`, even `m` in mod-m mode, ...).
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A primitive was evaluated outside the domain where its formula holds.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured size or cost guard was exceeded.
    #[error("resource limit exceeded at {stage}: requested {requested}, limit {limit}")]
    Resource {
        stage: String,
        requested: u128,
        limit: u128,
    },

    /// A binary search never reached its target below the search cap.
    #[error("target {target} unreachable up to n = {n_max}; best value {best_value} at n = {best_n}")]
    UnreachableTarget {
        target: f64,
        n_max: BigUint,
        best_n: BigUint,
        best_value: f64,
    },

    #[error("malformed dump: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
