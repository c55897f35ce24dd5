use thiserror::Error;

/// Errors produced anywhere in the trend-prediction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no observed values")]
    NoObservedValues,

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid trend: {0}")]
    InvalidTrend(String),

    #[error("segmentation mismatch: trends cover {covered} points but the series has {len}")]
    SegmentationMismatch { covered: usize, len: usize },

    #[error("degenerate segment: {0} point(s), a line needs at least 2")]
    DegenerateSegment(usize),

    #[error("nothing to predict: {0} trend(s), need at least 2")]
    NothingToPredict(usize),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("shape mismatch at layer {layer} ({kind}): {detail}")]
    ShapeMismatch {
        layer: usize,
        kind: &'static str,
        detail: String,
    },

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("dimension mismatch: model expects {expected} features, instance has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: need at least {required} instances, have {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("undefined improvement: baseline RMSE is zero")]
    UndefinedImprovement,

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
