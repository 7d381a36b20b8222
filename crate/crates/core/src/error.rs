use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("line {line}: embedding has {found} dimensions, expected {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: duplicate sample ({subject_id}, {sample_id})")]
    DuplicateSample {
        line: usize,
        subject_id: String,
        sample_id: String,
    },

    #[error("line {line}: embedding entry {index} is not finite")]
    NonFinite { line: usize, index: usize },

    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("zero-norm embedding vector")]
    ZeroNorm,

    #[error("subject {0} has a single sample; at least two are required")]
    SingleSample(String),

    #[error("requested {requested} samples but only {available} are available")]
    SampleCountExceedsPopulation { requested: usize, available: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("table is not rectangular: row {row} has {found} columns, expected {expected}")]
    NonRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("morph {morph_id}: subject slot {slot} has {found} probes for {frs_id}, need {needed}")]
    InsufficientProbes {
        morph_id: String,
        frs_id: String,
        slot: usize,
        found: usize,
        needed: usize,
    },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("parents are antipodal; the midpoint direction is undefined")]
    AntipodalParents,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
