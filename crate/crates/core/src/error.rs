use thiserror::Error;

use crate::cpower::CPowerTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "unknown generator family '{0}'; expected one of clayton, gumbel, frank, independence"
    )]
    UnknownFamily(String),

    #[error("{family} generator requires {admissible}, got {}", theta.map_or("no theta".to_string(), |t| format!("theta = {t}")))]
    InvalidTheta {
        family: &'static str,
        admissible: &'static str,
        theta: Option<f64>,
    },

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {found} is out of range (supported: {min}..={max})")]
    Dimension {
        found: usize,
        min: usize,
        max: usize,
    },

    #[error("bisection does not bracket y = {y}: phi(0) = {phi_lo}, phi(1) = {phi_hi}")]
    NonBracketing { y: f64, phi_lo: f64, phi_hi: f64 },

    #[error("bisection did not reach tolerance within {iterations} iterations")]
    BisectionStalled { iterations: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid step distribution: {0}")]
    InvalidDistribution(String),

    #[error("axiom undefined at idempotents {{0,1}} (u = {u})")]
    Idempotent { u: f64 },

    #[error("no witness within n_max = {n_max} iterations; f_n_max = {f_last}")]
    Exhausted { n_max: u64, f_last: f64 },

    #[error(
        "interior fixed point f_{n} = f_{next} = {value} at u = {u}: contradicts the strict bound C(u,v) < v",
        next = .n + 1
    )]
    FixedPointInterior {
        u: f64,
        n: u64,
        value: f64,
        trace: Box<CPowerTrace>,
    },

    #[error("C-power increased at n = {n}: f_n = {prev}, f_(n+1) = {next}")]
    NotMonotone { n: u64, prev: f64, next: f64 },

    #[error("table has {cells} cells, capacity is {limit}")]
    Capacity { cells: u128, limit: u128 },

    #[error("cell {index:?} has negative mass {mass}: composed H is not d-increasing")]
    NegativeCell { index: Vec<usize>, mass: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error is a failed mathematical check rather than bad input.
    pub fn is_verification_failure(&self) -> bool {
        matches!(
            self,
            Error::FixedPointInterior { .. }
                | Error::NotMonotone { .. }
                | Error::NegativeCell { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
