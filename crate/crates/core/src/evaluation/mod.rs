//! Metrics, the four evaluation tasks and result tables.

pub mod classification;
pub mod correlation;
pub mod knn;
pub mod report;
pub mod split;
pub mod tasks;

use thiserror::Error;

use crate::embeddings::EmbedError;
use crate::neural::NeuralError;

pub use classification::{classification_metrics, ClassStats, ClassificationReport, ConfusionMatrix};
pub use correlation::{average_ranks, cosine, kendall, pearson, spearman, CorrelationReport, PairSplit};
pub use knn::{knn_predict, Distance};
pub use report::{Table, TableRow, CLASSIFICATION_COLUMNS, CORRELATION_COLUMNS};
pub use split::{holdout, stratified_holdout};
pub use tasks::{
    doc_sentences, eval_docclass, eval_ner, eval_sentence_similarity, eval_word_similarity, eval_word_similarity_split, ner_partition, pair_ids,
    similarity_sentences, tagged_sentences, EvalOptions, OUTSIDE_TAG,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("{0}")]
    Config(String),
    #[error("need at least k={k} training items, have {n}")]
    TooFewTraining { k: usize, n: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}
