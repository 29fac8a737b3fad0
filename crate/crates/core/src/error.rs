use thiserror::Error;

/// Every failure the engine reports. Variants map one-to-one onto the error
/// names used by the module contracts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFiniteValue(String),
    #[error("opacity {value} out of [0, 1] at {location}")]
    OpacityOutOfRange { value: f32, location: String },
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("degenerate translation (norm {norm:e}) for camera {camera:?}")]
    DegenerateTranslation { camera: Option<usize>, norm: f64 },
    #[error("too few cameras: need at least {needed}, got {got}")]
    TooFewCameras { needed: usize, got: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("gauge must be positive, got {0}")]
    NonPositiveGauge(f64),

    #[error("singular 2D covariance (det {det:e}) for splat {index}")]
    SingularCovariance { index: usize, det: f64 },
    #[error("invalid render config: {0}")]
    BadRenderConfig(String),

    #[error("time {t_prime} outside [{lo}, {hi}]")]
    TimeOutOfRange { t_prime: f64, lo: f64, hi: f64 },
    #[error("frames are not adjacent: t = {t}, previous = {prev}")]
    NonAdjacentFrames { t: i64, prev: i64 },
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("fusion weight file mismatch: {0}")]
    WeightFileMismatch(String),

    #[error("image too small for SSIM window: {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("empty correspondence set")]
    EmptyCorrespondence,

    #[error("bad synthetic-scene config: {0}")]
    BadConfig(String),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported format version {found} (supported: {supported})")]
    VersionUnsupported { found: u32, supported: u32 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
