use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("Gauss-Hermite quadrature did not converge (max entry change {change:e} at {nodes} nodes)")]
    QuadratureNonConvergence { nodes: usize, change: f64 },

    #[error("correlation matrix is not positive semidefinite (min eigenvalue {min:e}, max {max:e})")]
    EigendecompositionFailure { min: f64, max: f64 },

    #[error("dual-polarized interleaving needs an even element count, got {0}")]
    OddElementCount(usize),

    #[error("zero-norm vector in correlation coefficient")]
    ZeroVector,

    #[error("detection vector for column {column} lies in the interference span")]
    RankDeficiency { column: usize },

    #[error("power budget exceeded: minimum allocation needs {required:.6} of the budget")]
    Infeasible { required: f64 },

    #[error("drop {drop}: {source}")]
    Drop {
        drop: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
