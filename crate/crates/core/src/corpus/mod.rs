//! Raw text ingestion and the training-corpus preprocessing pipeline:
//! lowercasing, punctuation and stopword removal, phrase (bigram) joining
//! and entity masking.
//!
//! Each input line is one sentence. Tokens are split on Unicode whitespace.

mod mask;
mod stopwords;

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

pub use mask::{MaskPatterns, CHEM_TOKEN, NUM_TOKEN, NUM_UNIT_TOKEN};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Utf8 { offset: u64 },
    #[error("corpus is empty after preprocessing")]
    Empty,
    #[error("invalid preprocessing config: {0}")]
    Config(String),
    #[error("masking patterns: {0}")]
    Patterns(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Options for [`preprocess`], [`construct_bigrams`] and [`mask_entities`].
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub stopwords: HashSet<String>,
    pub strip_punctuation: bool,
    pub bigram_min_count: u64,
    pub bigram_score_threshold: f64,
    pub mask_entities: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: default_stopwords(),
            strip_punctuation: true,
            bigram_min_count: 5,
            bigram_score_threshold: 1e-4,
            mask_entities: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.bigram_min_count < 1 {
            return Err(CorpusError::Config("bigram_min_count must be >= 1".into()));
        }
        if self.bigram_score_threshold.is_nan() || self.bigram_score_threshold < 0.0 {
            return Err(CorpusError::Config("bigram_score_threshold must be >= 0".into()));
        }
        Ok(())
    }

    /// Normalizes a single surface token. Returns `None` when the token is
    /// dropped (stopword or punctuation only).
    pub fn normalize_token(&self, raw: &str) -> Option<String> {
        let mut tok = if self.lowercase { raw.to_lowercase() } else { raw.to_string() };
        if self.strip_punctuation {
            let stripped = punct_edges().replace_all(&tok, "");
            if stripped.len() != tok.len() {
                tok = stripped.into_owned();
            }
        }
        if tok.is_empty() || self.stopwords.contains(&tok) {
            return None;
        }
        Some(tok)
    }

    /// Tokenizes one line of text the same way [`preprocess`] does.
    pub fn tokenize_line(&self, line: &str) -> Vec<String> {
        line.split_whitespace().filter_map(|t| self.normalize_token(t)).collect()
    }
}

/// The bundled 179-word English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    stopwords::ENGLISH.iter().map(|s| s.to_string()).collect()
}

/// Reads a stopword file: one word per line, `#` comments allowed.
pub fn read_stopwords(reader: impl BufRead) -> Result<HashSet<String>, CorpusError> {
    let mut out = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() && !w.starts_with('#') {
            out.insert(w.to_string());
        }
    }
    Ok(out)
}

fn punct_edges() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{P}+|\p{P}+$").expect("valid regex"))
}

/// A tokenized training corpus. One entry of `sentences` per input line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenizedCorpus {
    pub sentences: Vec<Vec<String>>,
    pub token_counts: HashMap<String, u64>,
    pub total_tokens: u64,
}

impl TokenizedCorpus {
    pub fn from_sentences(sentences: Vec<Vec<String>>) -> Self {
        let mut corpus = Self { sentences, ..Default::default() };
        corpus.recount();
        corpus
    }

    pub fn recount(&mut self) {
        self.token_counts.clear();
        self.total_tokens = 0;
        for tok in self.sentences.iter().flatten() {
            *self.token_counts.entry(tok.clone()).or_insert(0) += 1;
            self.total_tokens += 1;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total_tokens == 0
    }

    /// Appends another shard. Counts add, so merge order does not affect them.
    pub fn merge(mut self, other: TokenizedCorpus) -> Self {
        for (tok, c) in other.token_counts {
            *self.token_counts.entry(tok).or_insert(0) += c;
        }
        self.total_tokens += other.total_tokens;
        self.sentences.extend(other.sentences);
        self
    }

    /// Counts sorted by descending count, then token.
    pub fn sorted_counts(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.token_counts.iter().map(|(t, c)| (t.as_str(), *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// One sentence per line, tokens separated by a single space.
    pub fn write_text(&self, mut out: impl Write) -> std::io::Result<()> {
        for s in &self.sentences {
            writeln!(out, "{}", s.join(" "))?;
        }
        Ok(())
    }

    /// Counts sidecar: `token<TAB>count`.
    pub fn write_counts(&self, mut out: impl Write) -> std::io::Result<()> {
        for (tok, c) in self.sorted_counts() {
            writeln!(out, "{tok}\t{c}")?;
        }
        Ok(())
    }

    /// Reads an already tokenized corpus file (the format of [`write_text`]).
    ///
    /// [`write_text`]: TokenizedCorpus::write_text
    pub fn read_text(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut sentences = Vec::new();
        for_each_line(reader, |line| {
            sentences.push(line.split_whitespace().map(String::from).collect());
        })?;
        let corpus = Self::from_sentences(sentences);
        if corpus.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(corpus)
    }
}

fn for_each_line(mut reader: impl BufRead, mut f: impl FnMut(&str)) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    let mut offset = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf)
            .map_err(|e| CorpusError::Utf8 { offset: offset + e.valid_up_to() as u64 })?;
        f(line.trim_end_matches(['\n', '\r']));
        offset += n as u64;
    }
    Ok(())
}

/// Tokenizes and filters a line-oriented text stream.
pub fn preprocess(raw: impl BufRead, cfg: &PreprocessConfig) -> Result<TokenizedCorpus, CorpusError> {
    cfg.validate()?;
    let mut sentences = Vec::new();
    for_each_line(raw, |line| sentences.push(cfg.tokenize_line(line)))?;
    let corpus = TokenizedCorpus::from_sentences(sentences);
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(corpus)
}

/// Joins frequent adjacent pairs into `a_b` tokens in a single left-to-right,
/// non-overlapping pass.
///
/// A pair qualifies when `count(ab) >= min_count` and
/// `(count(ab) - min_count) / (count(a) * count(b)) >= threshold`.
pub fn construct_bigrams(
    corpus: &TokenizedCorpus,
    cfg: &PreprocessConfig,
) -> Result<TokenizedCorpus, CorpusError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
    for s in &corpus.sentences {
        for w in s.windows(2) {
            *pair_counts.entry((w[0].as_str(), w[1].as_str())).or_insert(0) += 1;
        }
    }
    let qualifies = |a: &str, b: &str| -> bool {
        let Some(&ab) = pair_counts.get(&(a, b)) else { return false };
        if ab < cfg.bigram_min_count {
            return false;
        }
        let ca = corpus.token_counts.get(a).copied().unwrap_or(0) as f64;
        let cb = corpus.token_counts.get(b).copied().unwrap_or(0) as f64;
        let score = (ab - cfg.bigram_min_count) as f64 / (ca * cb);
        score >= cfg.bigram_score_threshold
    };
    let sentences = corpus
        .sentences
        .iter()
        .map(|s| {
            let mut out = Vec::with_capacity(s.len());
            let mut i = 0;
            while i < s.len() {
                if i + 1 < s.len() && qualifies(&s[i], &s[i + 1]) {
                    out.push(format!("{}_{}", s[i], s[i + 1]));
                    i += 2;
                } else {
                    out.push(s[i].clone());
                    i += 1;
                }
            }
            out
        })
        .collect();
    Ok(TokenizedCorpus::from_sentences(sentences))
}

/// Replaces formulas, quantities and numbers by placeholders.
pub fn mask_entities(
    corpus: &TokenizedCorpus,
    patterns: &MaskPatterns,
) -> Result<TokenizedCorpus, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let sentences = corpus.sentences.iter().map(|s| patterns.mask_sentence(s)).collect();
    Ok(TokenizedCorpus::from_sentences(sentences))
}

/// Runs preprocessing followed by the optional masking and bigram stages.
pub fn run_pipeline(
    raw: impl BufRead,
    cfg: &PreprocessConfig,
    bigrams: bool,
    patterns: &MaskPatterns,
) -> Result<TokenizedCorpus, CorpusError> {
    let mut corpus = preprocess(raw, cfg)?;
    if cfg.mask_entities {
        corpus = mask_entities(&corpus, patterns)?;
    }
    if bigrams {
        corpus = construct_bigrams(&corpus, cfg)?;
    }
    Ok(corpus)
}
