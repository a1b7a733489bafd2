use thiserror::Error;

#[derive(Debug, Error)]
pub enum LppError {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("memory budget exceeded at level {level}: need ~{required} bytes, budget {budget} bytes")]
    Resource {
        level: usize,
        required: u64,
        budget: u64,
    },

    #[error("enumeration refused: {paths} paths exceeds cap {cap}")]
    OracleCap { paths: f64, cap: u64 },

    #[error("coordinate bound exceeded: |{coord}| > {bound}")]
    OutOfBounds { coord: i64, bound: i64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl LppError {
    /// True for errors that reflect a refusal to allocate or enumerate
    /// rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, LppError::Resource { .. } | LppError::OracleCap { .. })
    }
}

pub type Result<T> = std::result::Result<T, LppError>;
