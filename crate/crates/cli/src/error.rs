use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] affine_lab_core::Error),

    #[error("at (t, u) = {point:?}: {source}")]
    AtPoint {
        point: Vec<f64>,
        #[source]
        source: affine_lab_core::Error,
    },
}

impl CliError {
    pub fn at(point: &[f64]) -> impl FnOnce(affine_lab_core::Error) -> CliError + '_ {
        move |source| CliError::AtPoint {
            point: point.to_vec(),
            source,
        }
    }
}
