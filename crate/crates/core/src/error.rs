use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("subsystem layouts do not match: {0:?} vs {1:?}")]
    LayoutMismatch(Vec<usize>, Vec<usize>),
    #[error("composite dimension {total} exceeds cap {cap}")]
    DimensionCap { total: usize, cap: usize },
    #[error("matrix is not Hermitian (max deviation {deviation:.3e}, tolerance {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("trace {trace:.12} deviates from 1 beyond {tolerance:.3e}")]
    TraceDeviation { trace: f64, tolerance: f64 },
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("empty subsystem keep set")]
    EmptyKeepSet,
    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("truncation leakage {leakage:.3e} exceeds threshold {threshold:.3e}")]
    TruncationLeakage { leakage: f64, threshold: f64 },
    #[error("grid too small: eigenstate {state} has edge amplitude {amplitude:.3e}")]
    GridTooSmall { state: usize, amplitude: f64 },
    #[error("requested {requested} bound states but the surface supports only {available}")]
    BoundStateCount { requested: usize, available: usize },
    #[error("time series is not uniformly sampled")]
    NonUniformSampling,
}

pub type Result<T> = std::result::Result<T, Error>;
