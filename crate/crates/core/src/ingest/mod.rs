//! Event files, synthetic markets and pre-training dataset export.

mod dataset;
mod events;
mod synthetic;

pub use dataset::{
    decode_record, encode_record, export_dataset, label_for, label_windows, movement_ratio, normalize_window,
    reconstruct, window_at, DatasetManifest, ExportConfig, DATASET_MANIFEST, LabeledSample, NormStats, Reconstruction,
    SessionFilter,
};
pub use events::{read_event_file, write_event_file, write_events, EventFileHeader, EventReader};
pub use synthetic::{generate_synthetic, SyntheticMarket, SyntheticMarketConfig};

use thiserror::Error;

use crate::book::BookError;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: sequence {got} does not follow {last}")]
    NonMonotoneSeq { line: u64, last: u64, got: u64 },
    #[error("header declares {declared} events, body has {found}")]
    CountMismatch { declared: u64, found: u64 },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} events, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("dataset record has {got} bytes, expected {expected}")]
    BadRecord { expected: usize, got: usize },
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
