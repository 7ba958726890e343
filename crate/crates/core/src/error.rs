use alloc::boxed::Box;
use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {modes}-mode system")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("creation on mode {mode} would exceed the truncation ({cutoff} photons)")]
    CutoffOverflow { mode: usize, cutoff: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("incompatible truncation policies")]
    PolicyMismatch,

    #[error("partial trace needs a non-empty set of kept modes")]
    EmptyKeepSet,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {n} exceeds the supported maximum {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("photon numbers differ: {rows} vs {cols}")]
    PhotonNumberMismatch { rows: u32, cols: u32 },

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid mode partition: {0}")]
    InvalidPartition(String),

    #[error("cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: u32, reason: String },

    #[error("input state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("polynomial expansion of {photons} photons exceeds the limit {max}")]
    ExpansionTooLarge { photons: u32, max: u32 },

    #[error("degenerate unitary: {0}")]
    Degenerate(String),

    #[error(
        "optimization infeasible at budget: best residual {residual:e} after {restarts} restarts"
    )]
    Infeasible { residual: f64, restarts: usize },

    #[error("root finding failed (condition number {condition:e})")]
    RootFinding { condition: f64 },

    #[error("lossy beam splitter closure T T^+ + A A^+ = I violated by {deviation:e}")]
    ClosureViolated { deviation: f64 },

    #[error("unitary completion is numerically singular")]
    SingularCompletion,

    #[error("truncation tail bound violated: {0}")]
    TailBound(String),

    #[error("no beam-splitter angle realizes the requested ratio: {0}")]
    UnsolvableAngle(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
