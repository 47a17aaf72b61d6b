use crate::params::Violations;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(Violations),

    /// A scalar argument outside the domain of an operation.
    #[error("{name} = {value} is outside its domain ({rule})")]
    Domain {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },

    #[error("state count for n = {n}, d = {d} overflows u64")]
    StateCountOverflow { n: usize, d: usize },

    #[error("chain with {states} states exceeds the limit of {limit} states")]
    TooManyStates { states: u64, limit: u64 },

    #[error("chain is not irreducible: state {state} is not in the recurrent class")]
    Reducible { state: usize },

    #[error(
        "stationary solver did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("mutual information did not converge by n = {n_reached} (last increment {last_increment} bits)")]
    UltimateRateDiverges { n_reached: u64, last_increment: f64 },

    #[error("absorption into valid frames failed from residual downtime {residual}")]
    Absorption { residual: usize },

    #[error("{0} is undefined at this parameter point")]
    Undefined(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, rule: &'static str) -> Self {
        Error::Domain { name, value, rule }
    }
}
