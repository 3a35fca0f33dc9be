use std::fmt;
use std::path::PathBuf;

/// Errors raised by the solver, diagnostics and persistence layers.
#[derive(Debug, thiserror::Error)]
pub enum KsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected d={expected_dim} n={expected_n}, found d={found_dim} n={found_n}")]
    GridMismatch {
        expected_dim: usize,
        expected_n: usize,
        found_dim: usize,
        found_n: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weak-singularity regime violated: need 2 <= beta < d, got beta={beta} with d={dim}")]
    SingularityRegime { beta: f64, dim: usize },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("snapshot {path}: {kind}")]
    Snapshot { path: PathBuf, kind: SnapshotErrorKind },

    #[error("field is constant; {0} is undefined")]
    Undefined(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KsError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KsError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KsError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            KsError::InvalidGrid(_)
                | KsError::InvalidParameter { .. }
                | KsError::SingularityRegime { .. }
                | KsError::Config(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, KsError::Io { .. } | KsError::Snapshot { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnapshotErrorKind {
    BadMagic([u8; 4]),
    Truncated { expected: usize, found: usize },
    ExtentMismatch(String),
    TrailingBytes(usize),
}

impl fmt::Display for SnapshotErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotErrorKind::BadMagic(m) => {
                write!(f, "format error: bad magic bytes {m:?}, expected \"KSF1\"")
            }
            SnapshotErrorKind::Truncated { expected, found } => {
                write!(f, "truncated file: expected {expected} bytes, found {found}")
            }
            SnapshotErrorKind::ExtentMismatch(msg) => write!(f, "extent mismatch: {msg}"),
            SnapshotErrorKind::TrailingBytes(n) => write!(f, "{n} trailing bytes after payload"),
        }
    }
}

/// One violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub constraint: String,
}

/// All constraint violations found while parsing a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn single(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        ConfigError {
            issues: vec![ConfigIssue {
                key: key.into(),
                constraint: constraint.into(),
            }],
        }
    }

    pub fn mentions(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.key == key)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for issue in &self.issues {
            write!(f, "\n  {}: {}", issue.key, issue.constraint)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

pub type Result<T, E = KsError> = std::result::Result<T, E>;
