use thiserror::Error;

/// Errors raised by mesh construction, assembly, and the solvers.
#[derive(Debug, Error)]
pub enum ContactError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("interface {interface} does not exist in a stack of {layers} layer(s)")]
    NoSuchInterface { interface: usize, layers: usize },

    #[error("contact nodes do not match across interface {interface}: {detail}")]
    ContactMismatch { interface: usize, detail: String },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ContactError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ContactError {
    /// Tags an error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Self::Stage { .. } => e,
            e => Self::Stage { stage, source: Box::new(e) },
        }
    }
}

pub type Result<T> = std::result::Result<T, ContactError>;
