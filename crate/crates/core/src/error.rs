use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {shapes}")]
    ShapeMismatch { op: &'static str, shapes: String },

    #[error("unknown primitive kind `{0}`")]
    UnknownPrimitive(String),

    #[error("missing attribute `{attr}` for primitive `{op}`")]
    MissingAttr { op: String, attr: &'static str },

    #[error("backward root must be scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("requested {requested} points but only {available} are available")]
    NotEnoughPoints { requested: usize, available: usize },

    #[error("empty point set")]
    EmptyInput,

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("non-finite loss at epoch {epoch}, iteration {iteration}: {value}")]
    NonFiniteLoss { epoch: usize, iteration: usize, value: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, shapes: &[&[usize]]) -> Error {
    let shapes = shapes.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(" vs ");
    Error::ShapeMismatch { op, shapes }
}
