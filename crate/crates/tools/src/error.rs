use dcp_core::dataio::DataError;
use dcp_core::dcpnet::DcpError;
use dcp_core::geometry::GeometryError;
use dcp_core::icp::IcpError;
use dcp_core::train::TrainError;
use std::path::{Path, PathBuf};

/// Failure of a subcommand. Each variant maps to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ToolError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Usage(_) => 2,
            ToolError::Data { .. } | ToolError::Io { .. } => 3,
            ToolError::Numerical(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        ToolError::Usage(msg.into())
    }

    pub fn data(path: impl AsRef<Path>, msg: impl ToString) -> Self {
        ToolError::Data {
            path: path.as_ref().to_path_buf(),
            msg: msg.to_string(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Classifies a model error raised while processing `path`: shape and
    /// input problems are data errors, the rest numerical.
    pub fn model(path: impl AsRef<Path>, e: DcpError) -> Self {
        match e {
            DcpError::NonFinite | DcpError::Autodiff(_) => ToolError::Numerical(e.to_string()),
            DcpError::Geometry(g) => Self::geometry(path, g),
            other => Self::data(path, other),
        }
    }

    pub fn geometry(path: impl AsRef<Path>, e: GeometryError) -> Self {
        match e {
            GeometryError::NotARotation { .. } => ToolError::Numerical(e.to_string()),
            other => Self::data(path, other),
        }
    }

    pub fn icp(path: impl AsRef<Path>, e: IcpError) -> Self {
        match e {
            IcpError::Geometry(g) => Self::geometry(path, g),
            other => Self::data(path, other),
        }
    }

    pub fn train(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => Self::model("training set", m),
            TrainError::EmptyDataset => Self::data("training set", e),
            other => ToolError::Numerical(other.to_string()),
        }
    }
}

impl From<(PathBuf, DataError)> for ToolError {
    fn from((path, e): (PathBuf, DataError)) -> Self {
        ToolError::data(path, e)
    }
}

pub type Result<T, E = ToolError> = std::result::Result<T, E>;
