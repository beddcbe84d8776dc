use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("circuit conductance network is singular")]
    CircuitSingular,

    #[error("{stage} amplifier {node} saturated at {voltage:.4} V (rail {rail:.3} V)")]
    Saturation {
        stage: &'static str,
        node: usize,
        voltage: f64,
        rail: f64,
    },

    #[error("{stage} transient did not settle within {t_end_ns} ns")]
    NonConvergence { stage: &'static str, t_end_ns: f64 },

    #[error("Neumann series diverges (term {term} grew from {previous:.3e} to {current:.3e})")]
    Divergence { term: usize, previous: f64, current: f64 },

    #[error("unknown precoding scheme `{0}`")]
    UnknownScheme(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for faults produced by the analog circuit models, which the CLI
    /// maps to a dedicated exit status in strict mode.
    pub fn is_circuit_fault(&self) -> bool {
        matches!(
            self,
            Error::CircuitSingular | Error::Saturation { .. } | Error::NonConvergence { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
