//! Static embeddings: training, storage and lookup.

pub mod contextual;
pub mod ngrams;
pub mod oov;
pub mod sgns;
pub mod store;
pub mod train;

use thiserror::Error;

pub use contextual::{write_sentences, ContextualRecord, ContextualStore, SentenceRecord};
pub use oov::{embed_sentence, mean_vector, vector, EmbeddingSource, OovPolicy, OovPolicyKind};
pub use store::{LoadStats, NgramTable, StoreKind, VectorStore};
pub use train::{train_fasttext, train_word2vec, training_units, Architecture, TrainConfig, TrainStats};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("no unit reaches min_count = {min_count}")]
    EmptyVocabulary { min_count: u64 },
    #[error("{0}")]
    Shape(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Policy(String),
    #[error("cannot embed an empty sentence")]
    EmptySentence,
    #[error("no contextual vectors for {} sentence(s): {}", ids.len(), ids.join(", "))]
    MissingContextual { ids: Vec<String> },
    #[error("contextual tokens for {id:?} differ from the dataset tokens")]
    Misaligned { id: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
