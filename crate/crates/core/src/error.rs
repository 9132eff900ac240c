use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AlprError>;

#[derive(Debug, Error)]
pub enum AlprError {
    #[error("label out of range: sample {index} has label {label}, expected 1..={class_count}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        class_count: usize,
    },
    #[error("class with fewer than 2 samples: class {class} has {count}")]
    SingletonClass { class: usize, count: usize },
    #[error("non-finite feature at feature {feature}, sample {sample}")]
    NonFiniteFeature { feature: usize, sample: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("C < 2: retargeting needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("C too large for enumeration: {0} classes (limit 16)")]
    EnumerationTooLarge(usize),
    #[error("non-positive b entry at index {index}: {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("system not positive definite")]
    NotPositiveDefinite,

    #[error("no features selected")]
    NoFeaturesSelected,
    #[error("train_per_class too large: {requested} requested, class {class} has {available} samples")]
    TrainPerClassTooLarge {
        requested: usize,
        class: usize,
        available: usize,
    },

    #[error("{path}:{line}: ragged row: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: non-numeric field {field:?}")]
    NonNumericField {
        path: PathBuf,
        line: usize,
        field: String,
    },
    #[error("{path}:{line}: labels not contiguous from 1: {detail}")]
    LabelsNotContiguous {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{0}: empty file")]
    EmptyFile(PathBuf),

    #[error("version mismatch: {0}")]
    VersionMismatch(String),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
