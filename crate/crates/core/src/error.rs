use thiserror::Error;

use crate::mdp::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("policy has {got} entries but the model has {expected} states")]
    PolicyLength { expected: usize, got: usize },

    #[error("action {action} is not feasible in state {state}")]
    InfeasibleAction { state: usize, action: usize },

    #[error("policy space holds {count} policies, above the cap of {cap}")]
    TooManyPolicies { count: u128, cap: u128 },

    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("gain not state-independent; chain is not unichain")]
    NotUnichain,

    #[error("stationary distribution not unique")]
    StationaryNotUnique,

    #[error("singular linear system")]
    Singular,

    #[error("{what}: residual {residual:e} exceeds {tolerance:e}")]
    Residual {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("policy iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    TooSmall { needed: usize, got: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn check_discount(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "alpha",
            value: alpha,
            range: "(0, 1)",
        })
    }
}
