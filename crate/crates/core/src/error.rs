//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SphereError>;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("line {line}: expected `head<TAB>relation<TAB>tail`, found {found} field(s)")]
    MalformedLine { line: usize, found: usize },

    #[error("invalid config: field `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown entity id {0}")]
    UnknownEntity(u32),

    #[error("unknown relation id {0}")]
    UnknownRelation(u32),

    #[error("unknown entity name `{name}`{}", suggest(.candidates))]
    UnknownEntityName { name: String, candidates: Vec<String> },

    #[error("unknown relation name `{name}`{}", suggest(.candidates))]
    UnknownRelationName { name: String, candidates: Vec<String> },

    #[error("cannot sample negatives: need at least 2 entities, have {0}")]
    TooFewEntities(usize),

    #[error("cannot sample adversarial weights over an empty negative list")]
    EmptyNegatives,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },

    #[error("empty test split: nothing to evaluate")]
    EmptyTestSplit,

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("unsupported checkpoint version {found} (this build reads version {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("vocabulary hash mismatch: checkpoint was trained on {expected:#018x}, data directory hashes to {found:#018x}")]
    VocabHashMismatch { expected: u64, found: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn suggest(candidates: &[String]) -> String {
    if candidates.is_empty() {
        String::new()
    } else {
        format!(" (closest matches: {})", candidates.join(", "))
    }
}
