//! Loaders for the evaluation datasets.
//!
//! Three shapes cover every task: word or sentence pairs with a human score,
//! token sequences with tags, and labelled documents. Each shape also has a
//! canonical JSON-lines form that reloads to an identical value.

pub mod conll;
pub mod docclass;
pub mod similarity;
pub mod standoff;

use std::path::PathBuf;

use thiserror::Error;

pub use conll::{load_conll, load_conll_dir, read_conll, split_from_name, Split, TaggedDataset, TaggedSentence};
pub use docclass::{load_docclass, read_docclass, Doc, DocDataset};
pub use similarity::{load_similarity, read_similarity, Granularity, Schema, SimilarityDataset, SimilarityItem};
pub use standoff::{convert_standoff, StandoffRecord, StandoffSpan};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: score {score} outside [{min}, {max}]")]
    Range { line: usize, score: f64, min: f64, max: f64 },
    #[error("no data in {0}")]
    Empty(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: Box<DatasetError> },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        DatasetError::File { path: path.to_path_buf(), source: Box::new(self) }
    }
}
