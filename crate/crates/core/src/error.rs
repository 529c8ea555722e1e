//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data, bad parameters, or a contract violation by the caller.
    Validation,
    /// Filesystem or stream failure.
    Io,
    /// Training or evaluation produced non-finite numbers.
    Divergence,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-positive reflectance {value} at index {index}")]
    NonPositiveReflectance { index: usize, value: f64 },
    #[error("every sample was rejected by screening")]
    EmptyAfterScreening,
    #[error("negative carbonate content {0}")]
    NegativeContent(f64),
    #[error("spectrum is constant; cannot rescale")]
    ConstantSpectrum,
    #[error("window {window} is larger than signal length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("wrong spectrum kind: expected {expected}, found {found}")]
    WrongKind { expected: String, found: String },
    #[error("empty input")]
    EmptyInput,
    #[error("observed values have zero variance")]
    ZeroVariance,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("RMSE is zero (perfect prediction)")]
    ZeroRmse,
    #[error("crystalline index {0} outside (0, 1]")]
    InvalidCrystallineIndex(f64),
    #[error("feature width mismatch: model expects {expected}, input has {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("too few samples: need at least {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("singular linear system")]
    SingularSystem,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("training diverged at epoch {epoch}")]
    DivergedTraining { epoch: usize },
    #[error("saliency is not defined for {0} models; inspect coefficients instead")]
    UnsupportedModel(String),
    #[error("header mismatch at column {column}: expected {expected:?}, found {found:?}")]
    HeaderMismatch { column: usize, expected: String, found: String },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },
    #[error("wavelength grid mismatch: {0}")]
    GridMismatch(String),
    #[error("missing columns: {0:?}")]
    MissingColumns(Vec<String>),
    #[error("reflectance unit must be declared (percent or fraction)")]
    UnitFlagRequired,
    #[error("spectrum kind mismatch: {0}")]
    KindMismatch(String),
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed model container: {0}")]
    Container(String),
    #[error("sample {id:?}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_sample(self, id: &str) -> Self {
        Error::Sample { id: id.to_owned(), source: Box::new(self) }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::NonFiniteActivation { .. }
            | Error::NonFiniteLoss
            | Error::DivergedTraining { .. } => ErrorClass::Divergence,
            Error::Sample { source, .. } => source.class(),
            _ => ErrorClass::Validation,
        }
    }
}
