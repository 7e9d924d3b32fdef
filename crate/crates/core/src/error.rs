use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input file is missing a required column, or a column is unusable.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },

    #[error("length error: {0}")]
    Length(String),

    #[error("range error: {0}")]
    Range(String),

    /// A gap longer than the interpolation limit remains in data that must be fully observed.
    #[error("unfilled gap of {length} day(s) starting {start}")]
    Gap { start: NaiveDate, length: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The optimizer hit its iteration limit; carries the best point found.
    #[error("no convergence after {iterations} iterations (best objective {best_value})")]
    Convergence {
        iterations: usize,
        best_point: Vec<f64>,
        best_value: f64,
    },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("degenerate leaf: H + lambda = {0} is not positive")]
    DegenerateLeaf(f64),

    #[error("label error: {0}")]
    Label(String),

    #[error("window error: {0}")]
    Window(String),

    /// Every candidate of a batch operation failed; one entry per candidate.
    #[error("all {} candidates failed: {}", .0.len(), summarize(.0))]
    AllFailed(Vec<(String, String)>),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn summarize(failures: &[(String, String)]) -> String {
    failures
        .iter()
        .map(|(who, why)| format!("{who}: {why}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Broad failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Fit,
    Io,
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Schema(_)
            | Error::Row { .. }
            | Error::DuplicateDate { .. }
            | Error::Range(_)
            | Error::Gap { .. }
            | Error::Parse(_)
            | Error::Label(_)
            | Error::Window(_) => ErrorKind::Data,
            Error::Length(_)
            | Error::Evaluation(_)
            | Error::Convergence { .. }
            | Error::Normalization(_)
            | Error::Divergence { .. }
            | Error::DegenerateLeaf(_)
            | Error::AllFailed(_) => ErrorKind::Fit,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    /// Process exit code for this error: 2 config, 3 data, 4 fit, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Fit => 4,
            ErrorKind::Io => 5,
        }
    }
}
