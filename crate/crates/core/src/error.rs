use std::path::PathBuf;

use crate::oracle::TemplateId;
use crate::sdkg::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can surface.
///
/// Variants are grouped by the stage that raises them; [`Error::is_retryable`]
/// tells the workflow layer whether a job may be re-queued.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input data: {0}")]
    InvalidInput(String),
    #[error("segment {vessel_id}/{segment_index} is incomplete")]
    IncompleteSegment { vessel_id: String, segment_index: usize },

    #[error("token or value is not canonical: {0:?}")]
    NotCanonical(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown node reference {0:?}")]
    UnknownNodeRef(String),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("no candidates available in the knowledge graph")]
    NoCandidates,
    #[error("incompatible snapshot: found schema version {found}, expected {expected}")]
    IncompatibleSnapshot { found: u32, expected: u32 },

    #[error("template error: {0}")]
    Template(String),
    #[error("malformed {template} output at byte {offset}: {reason}")]
    MalformedOracleOutput { template: TemplateId, offset: usize, reason: String },
    #[error("empty {0} output")]
    EmptyOracleOutput(TemplateId),
    #[error("oracle timed out: {0}")]
    OracleTimeout(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("expression syntax error at byte {offset}: {reason}")]
    Syntax { offset: usize, reason: String },
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("degenerate time span")]
    DegenerateSpan,
    #[error("fit validation exhausted after {attempts} proposals (best e(f) = {best_error:e})")]
    ValidationExhausted { attempts: usize, best_error: f64, best: Option<Box<crate::method::FunctionSpec>> },

    #[error("missing outcome for {vessel_id}/{segment_index}")]
    MissingOutcome { vessel_id: String, segment_index: usize },

    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn malformed(template: TemplateId, offset: usize, reason: impl Into<String>) -> Self {
        Error::MalformedOracleOutput { template, offset, reason: reason.into() }
    }

    /// Errors the anomaly guards may retry: oracle transport failures, bad
    /// oracle output and execution failures of oracle-chosen functions.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::MalformedOracleOutput { .. }
                | Error::EmptyOracleOutput(_)
                | Error::OracleTimeout(_)
                | Error::OracleUnavailable(_)
                | Error::Evaluation(_)
                | Error::UnsupportedConstruct(_)
                | Error::Syntax { .. }
                | Error::ValidationExhausted { .. }
                | Error::UnknownNode(_)
        )
    }
}
