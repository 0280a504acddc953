use thiserror::Error;

/// Errors produced by the distance pipeline and the batch analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiswieError {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid sorted sample: {0}")]
    InvalidSample(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("axis count k={k} is invalid (allowed 1..={max})")]
    BadK { k: usize, max: usize },

    #[error("neighbourhood graph has {components} connected components")]
    Disconnected { components: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("axis count mismatch: {left} vs {right}")]
    AxisCountMismatch { left: usize, right: usize },

    #[error("non-finite entry in cost matrix at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("brute force over signed permutations limited to k <= {max}, got {k}")]
    KTooLarge { k: usize, max: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectrum is rank deficient (alpha = {alpha})")]
    RankDeficient { alpha: f64 },

    #[error("lambda_min must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("transform recovery needs a full PCA basis ({0})")]
    NotFullBasis(String),

    #[error("{items} items cannot be split into {stacks} equal stacks")]
    NotDivisible { items: usize, stacks: usize },

    #[error("label cardinality mismatch: {0}")]
    LabelCardinalityMismatch(String),

    #[error("matrix ids differ")]
    IdMismatch,

    #[error("bad experiment spec: {0}")]
    BadSpec(String),

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<RiswieError>,
    },
}

pub type Result<T> = std::result::Result<T, RiswieError>;
