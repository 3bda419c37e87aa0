//! Word-level and subword tokenization models.
//!
//! All four kinds share [`TokenizerModel`]; the trainer decides which fields
//! are populated. Subword kinds reserve id 0 for the unknown token.
//!
//! | kind        | training                          | encoding                         |
//! |-------------|-----------------------------------|----------------------------------|
//! | `word`      | frequency threshold               | whole word or absent             |
//! | `bpe`       | most frequent adjacent pair       | replay merges in recorded order  |
//! | `wordpiece` | best `freq(ab)/(freq(a)freq(b))`  | greedy longest match             |
//! | `unigram`   | EM over Viterbi segmentations     | Viterbi, maximum log-probability |

mod bpe;
mod unigram;
mod wordpiece;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedCorpus;

pub use bpe::{train_bpe, END_OF_WORD};
pub use unigram::{train_unigram, train_unigram_traced, viterbi_log_likelihood, UnigramTrace};
pub use wordpiece::{pair_score_cmp, train_wordpiece};

/// Id assigned to a word-kind piece that is not in the vocabulary.
pub const ABSENT_ID: u32 = u32::MAX;
pub const DEFAULT_UNK: &str = "<unk>";
pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;
/// Pairs seen fewer times than this are never merged.
pub const MIN_PAIR_FREQUENCY: u64 = 2;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("target vocabulary size {target} is smaller than the base vocabulary ({base})")]
    TargetTooSmall { target: usize, base: usize },
    #[error("id {0} is out of range for this model")]
    IdOutOfRange(u32),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unknown tokenizer kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Word,
    Bpe,
    WordPiece,
    Unigram,
}

impl TokenizerKind {
    pub fn is_subword(self) -> bool {
        !matches!(self, TokenizerKind::Word)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenizerKind::Word => "word",
            TokenizerKind::Bpe => "bpe",
            TokenizerKind::WordPiece => "wordpiece",
            TokenizerKind::Unigram => "unigram",
        }
    }
}

impl fmt::Display for TokenizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenizerKind {
    type Err = TokenizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Self::Word),
            "bpe" => Ok(Self::Bpe),
            "wordpiece" => Ok(Self::WordPiece),
            "unigram" => Ok(Self::Unigram),
            other => Err(TokenizerError::UnknownKind(other.to_string())),
        }
    }
}

/// Training parameters recorded alongside the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_count: Option<u64>,
}

/// Segmentation of a word sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Encoding {
    pub pieces: Vec<String>,
    pub ids: Vec<u32>,
    /// Half-open `(start, end)` piece range for each source word.
    pub word_spans: Vec<(usize, usize)>,
}

impl Encoding {
    fn push_word(&mut self, pieces: impl IntoIterator<Item = (String, u32)>) {
        let start = self.pieces.len();
        for (p, id) in pieces {
            self.pieces.push(p);
            self.ids.push(id);
        }
        self.word_spans.push((start, self.pieces.len()));
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: TokenizerKind,
    vocab: Vec<String>,
    #[serde(default)]
    merges: Vec<(String, String)>,
    #[serde(default)]
    piece_logprobs: BTreeMap<String, f64>,
    continuation_prefix: String,
    unk_token: String,
    config: TokenizerConfig,
}

/// A trained tokenization model. Immutable once built; safe to share.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct TokenizerModel {
    kind: TokenizerKind,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    /// (left id, right id) -> (rank, merged id)
    merge_table: HashMap<(u32, u32), (usize, u32)>,
    logprobs: Vec<f64>,
    min_logprob: f64,
    max_piece_chars: usize,
    continuation_prefix: String,
    unk_token: String,
    config: TokenizerConfig,
}

impl From<TokenizerModel> for ModelFile {
    fn from(m: TokenizerModel) -> Self {
        let piece_logprobs = if m.kind == TokenizerKind::Unigram {
            m.vocab
                .iter()
                .zip(&m.logprobs)
                .filter(|(p, _)| **p != m.unk_token)
                .map(|(p, lp)| (p.clone(), *lp))
                .collect()
        } else {
            BTreeMap::new()
        };
        ModelFile {
            kind: m.kind,
            vocab: m.vocab,
            merges: m.merges,
            piece_logprobs,
            continuation_prefix: m.continuation_prefix,
            unk_token: m.unk_token,
            config: m.config,
        }
    }
}

impl TryFrom<ModelFile> for TokenizerModel {
    type Error = TokenizerError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        let logprobs = if f.kind == TokenizerKind::Unigram {
            f.vocab
                .iter()
                .map(|p| {
                    if *p == f.unk_token {
                        Ok(0.0)
                    } else {
                        f.piece_logprobs.get(p).copied().ok_or_else(|| {
                            TokenizerError::Invalid(format!("piece {p:?} has no log-probability"))
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        TokenizerModel::build(
            f.kind,
            f.vocab,
            f.merges,
            logprobs,
            f.continuation_prefix,
            f.unk_token,
            f.config,
        )
    }
}

impl TokenizerModel {
    fn build(
        kind: TokenizerKind,
        vocab: Vec<String>,
        merges: Vec<(String, String)>,
        logprobs: Vec<f64>,
        continuation_prefix: String,
        unk_token: String,
        config: TokenizerConfig,
    ) -> Result<Self, TokenizerError> {
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(TokenizerError::Invalid(format!("duplicate vocab entry {tok:?}")));
            }
        }
        if let Some(target) = config.target_vocab_size {
            if vocab.len() > target {
                return Err(TokenizerError::Invalid(format!(
                    "vocabulary has {} entries, above the target {target}",
                    vocab.len()
                )));
            }
        }
        if kind.is_subword() && !index.contains_key(&unk_token) {
            return Err(TokenizerError::Invalid("unk token missing from vocabulary".into()));
        }
        let mut merge_table = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let id = |s: &str| {
                index.get(s).copied().ok_or_else(|| {
                    TokenizerError::Invalid(format!("merge ({l:?}, {r:?}) references unknown {s:?}"))
                })
            };
            let (li, ri, mi) = (id(l)?, id(r)?, id(&format!("{l}{r}"))?);
            merge_table.entry((li, ri)).or_insert((rank, mi));
        }
        if kind == TokenizerKind::Unigram {
            if logprobs.len() != vocab.len() {
                return Err(TokenizerError::Invalid("log-probability table size".into()));
            }
            if let Some(bad) = logprobs.iter().find(|lp| !lp.is_finite() || **lp > 0.0) {
                return Err(TokenizerError::Invalid(format!("invalid log-probability {bad}")));
            }
        }
        let max_piece_chars = vocab.iter().map(|p| p.chars().count()).max().unwrap_or(1);
        let min_logprob = logprobs.iter().copied().fold(0.0, f64::min);
        Ok(Self {
            kind,
            vocab,
            index,
            merges,
            merge_table,
            logprobs,
            min_logprob,
            max_piece_chars,
            continuation_prefix,
            unk_token,
            config,
        })
    }

    /// Builds a unigram model from explicit pieces and log-probabilities.
    pub fn unigram_from_pieces(
        pieces: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self, TokenizerError> {
        let mut vocab = vec![DEFAULT_UNK.to_string()];
        let mut logprobs = vec![0.0];
        for (p, lp) in pieces {
            vocab.push(p);
            logprobs.push(lp);
        }
        Self::build(
            TokenizerKind::Unigram,
            vocab,
            Vec::new(),
            logprobs,
            DEFAULT_CONTINUATION_PREFIX.into(),
            DEFAULT_UNK.into(),
            TokenizerConfig::default(),
        )
    }

    /// Builds a wordpiece model from an explicit vocabulary (unk is added).
    pub fn wordpiece_from_vocab(
        pieces: impl IntoIterator<Item = String>,
    ) -> Result<Self, TokenizerError> {
        let mut vocab = vec![DEFAULT_UNK.to_string()];
        vocab.extend(pieces);
        Self::build(
            TokenizerKind::WordPiece,
            vocab,
            Vec::new(),
            Vec::new(),
            DEFAULT_CONTINUATION_PREFIX.into(),
            DEFAULT_UNK.into(),
            TokenizerConfig::default(),
        )
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    /// Vocabulary in id order.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_to_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn id_to_token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Log-probability of a unigram piece.
    pub fn piece_logprob(&self, piece: &str) -> Option<f64> {
        if self.kind != TokenizerKind::Unigram || piece == self.unk_token {
            return None;
        }
        self.index.get(piece).map(|&i| self.logprobs[i as usize])
    }

    /// Unigram pieces with their log-probabilities, in id order.
    pub fn piece_logprobs(&self) -> impl Iterator<Item = (&str, f64)> {
        self.vocab
            .iter()
            .zip(&self.logprobs)
            .filter(move |(p, _)| **p != self.unk_token)
            .map(|(p, lp)| (p.as_str(), *lp))
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn unk_token(&self) -> &str {
        &self.unk_token
    }

    pub fn unk_id(&self) -> Option<u32> {
        self.token_to_id(&self.unk_token)
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    /// Segments a single word into `(piece, id)` pairs.
    pub fn encode_word(&self, word: &str) -> Vec<(String, u32)> {
        match self.kind {
            TokenizerKind::Word => vec![(
                word.to_string(),
                self.token_to_id(word).unwrap_or(ABSENT_ID),
            )],
            TokenizerKind::Bpe => bpe::encode_word(self, word),
            TokenizerKind::WordPiece => wordpiece::encode_word(self, word),
            TokenizerKind::Unigram => unigram::encode_word(self, word),
        }
    }

    /// Pieces of a single word, without ids.
    pub fn pieces(&self, word: &str) -> Vec<String> {
        self.encode_word(word).into_iter().map(|(p, _)| p).collect()
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Encoding {
        let mut enc = Encoding::default();
        for w in words {
            enc.push_word(self.encode_word(w.as_ref()));
        }
        enc
    }

    /// Reassembles words from ids. Unknown or absent pieces decode to the
    /// literal unk token.
    pub fn decode(&self, encoding: &Encoding) -> Result<Vec<String>, TokenizerError> {
        let mut words = Vec::with_capacity(encoding.word_spans.len());
        for &(start, end) in &encoding.word_spans {
            let mut word = String::new();
            for (k, &id) in encoding.ids[start..end].iter().enumerate() {
                let piece = if id == ABSENT_ID && self.kind == TokenizerKind::Word {
                    self.unk_token.as_str()
                } else {
                    self.id_to_token(id).ok_or(TokenizerError::IdOutOfRange(id))?
                };
                match self.kind {
                    TokenizerKind::WordPiece if k > 0 => word.push_str(
                        piece.strip_prefix(self.continuation_prefix.as_str()).unwrap_or(piece),
                    ),
                    _ => word.push_str(piece),
                }
            }
            if self.kind == TokenizerKind::Bpe {
                if let Some(stripped) = word.strip_suffix(END_OF_WORD) {
                    word.truncate(stripped.len());
                }
            }
            words.push(word);
        }
        Ok(words)
    }

    pub fn to_json(&self) -> Result<String, TokenizerError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, TokenizerError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TokenizerError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TokenizerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Word-level vocabulary: every token seen at least `min_count` times,
/// ordered by descending count, then lexicographically.
pub fn train_word(corpus: &TokenizedCorpus, min_count: u64) -> Result<TokenizerModel, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let vocab = corpus
        .sorted_counts()
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    TokenizerModel::build(
        TokenizerKind::Word,
        vocab,
        Vec::new(),
        Vec::new(),
        DEFAULT_CONTINUATION_PREFIX.into(),
        DEFAULT_UNK.into(),
        TokenizerConfig { target_vocab_size: None, min_count: Some(min_count) },
    )
}

/// Dispatches to the trainer for `kind`. `size` is the minimum count for the
/// word kind and the target vocabulary size otherwise.
pub fn train(
    kind: TokenizerKind,
    corpus: &TokenizedCorpus,
    size: usize,
) -> Result<TokenizerModel, TokenizerError> {
    match kind {
        TokenizerKind::Word => train_word(corpus, size as u64),
        TokenizerKind::Bpe => train_bpe(corpus, size),
        TokenizerKind::WordPiece => train_wordpiece(corpus, size),
        TokenizerKind::Unigram => train_unigram(corpus, size),
    }
}

/// Distinct words with counts, sorted by word for deterministic iteration.
pub(crate) fn word_counts(corpus: &TokenizedCorpus) -> Vec<(&str, u64)> {
    let mut v: Vec<_> = corpus.token_counts.iter().map(|(w, c)| (w.as_str(), *c)).collect();
    v.sort_unstable_by(|a, b| a.0.cmp(b.0));
    v
}

pub(crate) fn new_subword_model(
    kind: TokenizerKind,
    vocab: Vec<String>,
    merges: Vec<(String, String)>,
    logprobs: Vec<f64>,
    target: usize,
) -> Result<TokenizerModel, TokenizerError> {
    TokenizerModel::build(
        kind,
        vocab,
        merges,
        logprobs,
        DEFAULT_CONTINUATION_PREFIX.into(),
        DEFAULT_UNK.into(),
        TokenizerConfig { target_vocab_size: Some(target), min_count: None },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(text: &str) -> TokenizedCorpus {
        TokenizedCorpus::from_sentences(
            text.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect(),
        )
    }

    #[test]
    fn word_vocab_threshold_and_order() {
        let c = corpus("a a a b");
        let m = train_word(&c, 2).unwrap();
        assert_eq!(m.vocab(), ["a"]);
        let m = train_word(&corpus("b a c a c c"), 1).unwrap();
        assert_eq!(m.vocab(), ["c", "a", "b"]);
    }

    #[test]
    fn word_encode_flags_absent() {
        let m = train_word(&corpus("x y x"), 1).unwrap();
        let e = m.encode(&["x", "zzz"]);
        assert_eq!(e.ids, vec![0, ABSENT_ID]);
        assert_eq!(e.word_spans, vec![(0, 1), (1, 2)]);
        assert_eq!(m.decode(&e).unwrap(), vec!["x", "<unk>"]);
    }

    #[test]
    fn decode_rejects_out_of_range_ids() {
        let m = train_word(&corpus("x"), 1).unwrap();
        let e = Encoding { pieces: vec!["?".into()], ids: vec![7], word_spans: vec![(0, 1)] };
        assert!(matches!(m.decode(&e), Err(TokenizerError::IdOutOfRange(7))));
        assert!(m.decode(&Encoding::default()).unwrap().is_empty());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty = TokenizedCorpus::default();
        assert!(matches!(train_word(&empty, 1), Err(TokenizerError::EmptyCorpus)));
        assert!(matches!(train_bpe(&empty, 10), Err(TokenizerError::EmptyCorpus)));
    }

    #[test]
    fn json_shape() {
        let m = train_bpe(&corpus("ab ab ab"), 10).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for key in ["kind", "vocab", "merges", "piece_logprobs", "continuation_prefix", "unk_token", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["kind"], "bpe");
        assert_eq!(v["vocab"][0], "<unk>");
    }

    #[test]
    fn corrupt_model_is_rejected() {
        let bad = r###"{"kind":"bpe","vocab":["<unk>","a"],"merges":[["a","a"]],
            "piece_logprobs":{},"continuation_prefix":"##","unk_token":"<unk>","config":{}}"###;
        assert!(TokenizerModel::from_json(bad).is_err());
        let bad = r###"{"kind":"unigram","vocab":["<unk>","a"],"merges":[],
            "piece_logprobs":{"a":0.5},"continuation_prefix":"##","unk_token":"<unk>","config":{}}"###;
        assert!(TokenizerModel::from_json(bad).is_err());
    }
}
