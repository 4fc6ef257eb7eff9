//! Pipeline orchestration behind the `woundmesh` binary.
//!
//! Each subcommand is a plain function over paths and a [`PipelineConfig`],
//! so tests drive the same code the binary runs.

pub mod commands;
pub mod config;
pub mod pipeline;

use woundmesh::Error;

pub use config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("config: {0}")]
    Config(String),
}

impl CliError {
    /// 2 dataset or input, 3 numerical or registration failure, 4 empty
    /// region.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.root() {
                Error::Format { .. } | Error::Io { .. } | Error::InvalidInput(_) | Error::DimensionMismatch(_) => 2,
                Error::EmptyRegion(_) | Error::WholeSurfaceLabeled(_) => 4,
                _ => 3,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let io = Error::Io {
            path: "x".into(),
            source: std::io::Error::other("gone"),
        };
        assert_eq!(CliError::from(io).exit_code(), 2);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 2);
        assert_eq!(CliError::from(Error::EmptyRegion(1)).exit_code(), 4);
        assert_eq!(CliError::from(Error::SingularSystem).exit_code(), 3);
        let wrapped = Error::Registration {
            frame: 2,
            source: Box::new(Error::InsufficientOverlap { valid: 0 }),
        };
        assert_eq!(CliError::from(wrapped).exit_code(), 3);
    }
}
