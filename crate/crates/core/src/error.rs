use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing view at angular coordinate ({s}, {t})")]
    MissingView { s: i32, t: i32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cannot parse view coordinates from file name `{0}`")]
    UnparseableName(String),

    #[error("invalid layout descriptor `{0}`: {1}")]
    BadLayout(String, String),

    #[error("invalid prediction pattern: {0}")]
    BadPattern(String),

    #[error("translation ({s}, {t}) exceeds layer padding ({s_max}, {t_max})")]
    TranslationOutOfBounds { s: i32, t: i32, s_max: usize, t_max: usize },

    #[error("rank {rank} exceeds min(rows, cols) = {limit}")]
    RankTooLarge { rank: usize, limit: usize },

    #[error("bad row count {rows}: expected a multiple of 3 matching layer height {expected}")]
    BadRowCount { rows: usize, expected: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quantization parameter {0} outside [0, 51]")]
    BadQp(i64),

    #[error("codec unavailable: {0}")]
    CodecUnavailable(String),

    #[error("external codec failed: {0}")]
    ExternalCodec(String),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("payload version {found} not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("codec mismatch: container declares {declared:?}, payload carries {found:?}")]
    CodecMismatch {
        declared: u8,
        found: u8,
    },

    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("malformed container header: {0}")]
    MalformedHeader(String),

    #[error("section table mismatch: {0}")]
    SectionTableMismatch(String),

    #[error("singular regression system at frequency index {0}")]
    SingularSystem(usize),

    #[error("curves have no overlapping quality range")]
    NoOverlap,

    #[error("not enough rate-distortion points: {0} (need at least 4)")]
    TooFewPoints(usize),

    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
