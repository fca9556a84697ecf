use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),

    #[error("degenerate landmark triangle")]
    DegenerateTriangle,

    #[error("singular transform (|det| = {det:e})")]
    SingularTransform { det: f64 },

    #[error("thin-plate spline: {0}")]
    Tps(String),

    #[error("too few pixels in region of interest: {have} < {need}")]
    TooFewPixels { have: usize, need: usize },

    #[error("parsing lacks eye region")]
    MissingEyeRegion,

    #[error("empty lip mask")]
    EmptyLipMask,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty style library: {0}")]
    EmptyLibrary(String),

    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("too many failures: {failed} of {total} entries")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left: format!("{}x{}", left.0, left.1),
            right: format!("{}x{}", right.0, right.1),
        }
    }
}
