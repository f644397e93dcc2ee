use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed CSV record: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: ground truth contains no inputs")]
    EmptyTruth { path: PathBuf },

    #[error("{path}:{line}: duplicate input_id `{input_id}` in ground truth")]
    DuplicateTruthId {
        path: PathBuf,
        line: u64,
        input_id: String,
    },

    #[error("{path}: prediction file contains no rows")]
    EmptyPredictions { path: PathBuf },

    #[error("{path}:{line}: input_id `{input_id}` (model {model_id}) is not in the ground truth")]
    UnknownInput {
        path: PathBuf,
        line: u64,
        model_id: String,
        input_id: String,
    },

    #[error(
        "{path}:{line}: duplicate cell for model {model_id}, instance {instance_id}, input {input_id}"
    )]
    DuplicateCell {
        path: PathBuf,
        line: u64,
        model_id: String,
        instance_id: String,
        input_id: String,
    },

    #[error("ragged predictions: model {model_id}, instance {instance_id} has no prediction for input {input_id}")]
    RaggedInstance {
        model_id: String,
        instance_id: String,
        input_id: String,
    },

    #[error("column alignment mismatch: {0}")]
    Alignment(String),

    #[error("invalid column subset: {0}")]
    Subset(String),

    #[error("sample of size {len} is too small; at least {min} values are required")]
    SampleTooSmall { len: usize, min: usize },

    #[error("invalid contingency table: {0}")]
    Table(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("KD1 needs at least 2 instances per model; model {model_id} has {instances}")]
    Kd1TooFewInstances { model_id: String, instances: usize },

    #[error("definition {0} needs predicted labels, but only correctness data is available")]
    LabelsRequired(String),

    #[error("cannot aggregate verdicts: {0}")]
    Aggregate(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Input data problems (as opposed to bad arguments or internal faults).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::BadHeader { .. }
                | Error::EmptyTruth { .. }
                | Error::DuplicateTruthId { .. }
                | Error::EmptyPredictions { .. }
                | Error::UnknownInput { .. }
                | Error::DuplicateCell { .. }
                | Error::RaggedInstance { .. }
                | Error::Alignment(_)
        )
    }
}
