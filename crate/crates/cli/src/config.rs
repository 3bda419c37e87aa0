//! Experiment files: a TOML document describing the corpus, the tokenizer
//! and embedding grid, the evaluation datasets and where to write results.
//!
//! Relative paths are resolved against the directory holding the file.
//! [`RunConfig::validate`] checks everything up front and reports every
//! problem it finds in one error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use embeval::datasets::Schema;
use embeval::embeddings::{Architecture, OovPolicyKind, TrainConfig};
use embeval::evaluation::Distance;
use embeval::neural::TaggerConfig;
use embeval::tokenizers::TokenizerKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokenizer name meaning "train on whole words".
pub const WORD_LEVEL: &str = "word";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Syntax { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Word2vec,
    Fasttext,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Word2vec => "word2vec",
            Self::Fasttext => "fasttext",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    WordSim,
    SentSim,
    Ner,
    Docclass,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WordSim => "word-sim",
            Self::SentSim => "sent-sim",
            Self::Ner => "ner",
            Self::Docclass => "docclass",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub training: TrainOverrides,
    #[serde(default, rename = "tokenizer")]
    pub tokenizers: Vec<TokenizerSpec>,
    #[serde(default, rename = "embedding")]
    pub embeddings: Vec<EmbeddingSpec>,
    #[serde(default)]
    pub grid: Vec<GridSpec>,
    #[serde(default)]
    pub contextual: Vec<ContextualSpec>,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub tagger: TaggerConfig,
}

fn default_seed() -> u64 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default = "yes")]
    pub strip_punctuation: bool,
    /// `"default"`, `"none"` or a path to a one-word-per-line file.
    #[serde(default)]
    pub stopwords: Option<String>,
    #[serde(default)]
    pub bigrams: bool,
    #[serde(default)]
    pub bigram_min_count: Option<u64>,
    #[serde(default)]
    pub bigram_score_threshold: Option<f64>,
    #[serde(default)]
    pub mask_entities: bool,
    #[serde(default)]
    pub mask_patterns: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            paths: vec![],
            lowercase: true,
            strip_punctuation: true,
            stopwords: None,
            bigrams: false,
            bigram_min_count: None,
            bigram_score_threshold: None,
            mask_entities: false,
            mask_patterns: None,
        }
    }
}

/// Training settings; unset fields fall back to the next level up
/// (embedding entry, then `[training]`, then the library defaults).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub min_count: Option<u64>,
    pub subsample: Option<f64>,
    pub min_n: Option<usize>,
    pub max_n: Option<usize>,
    pub buckets: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(dim, window, negatives, epochs, learning_rate, min_count, subsample, min_n, max_n, buckets);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSpec {
    pub name: String,
    pub kind: TokenizerKind,
    /// Target vocabulary size; the minimum count for the word kind.
    pub vocab_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub name: String,
    pub model: ModelFamily,
    pub architecture: Architecture,
    #[serde(default = "word_level")]
    pub tokenizer: String,
    #[serde(default)]
    pub oov: Option<OovPolicyKind>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub min_count: Option<u64>,
    pub subsample: Option<f64>,
    pub min_n: Option<usize>,
    pub max_n: Option<usize>,
    pub buckets: Option<usize>,
}

impl EmbeddingSpec {
    fn new(name: String, model: ModelFamily, architecture: Architecture, tokenizer: String) -> Self {
        Self {
            name,
            model,
            architecture,
            tokenizer,
            oov: None,
            dim: None,
            window: None,
            negatives: None,
            epochs: None,
            learning_rate: None,
            min_count: None,
            subsample: None,
            min_n: None,
            max_n: None,
            buckets: None,
        }
    }

    pub fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            min_count: self.min_count,
            subsample: self.subsample,
            min_n: self.min_n,
            max_n: self.max_n,
            buckets: self.buckets,
        }
    }
}

fn word_level() -> String {
    WORD_LEVEL.into()
}

/// Cartesian product shorthand; entries are named
/// `{model}-{tokenizer}-{architecture}-{dim}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub models: Vec<ModelFamily>,
    #[serde(default = "word_level_list")]
    pub tokenizers: Vec<String>,
    pub architectures: Vec<Architecture>,
    pub dims: Vec<usize>,
}

fn word_level_list() -> Vec<String> {
    vec![word_level()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextualSpec {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub task: Task,
    /// A file, or for NER a directory of CoNLL files.
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "three")]
    pub k: usize,
    #[serde(default = "cosine")]
    pub distance: String,
    #[serde(default = "fifth")]
    pub test_fraction: f64,
    /// Embedding whose vocabulary decides the in-vocab / OOV split of word
    /// pairs for every row. Unset: each store's own vocabulary.
    #[serde(default)]
    pub reference_vocabulary: Option<String>,
}

fn one() -> f64 {
    1.0
}
fn three() -> usize {
    3
}
fn cosine() -> String {
    "cosine".into()
}
fn fifth() -> f64 {
    0.2
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { beta: 1.0, k: 3, distance: cosine(), test_fraction: 0.2, reference_vocabulary: None }
    }
}

impl RunConfig {
    /// Reads and parses `path`, resolving relative paths against its
    /// directory. Returns the config and the raw bytes (for hashing).
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let text = String::from_utf8_lossy(&bytes);
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Syntax { path: path.into(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve(&base);
        Ok((cfg, bytes))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        self.corpus.paths.iter_mut().for_each(fix);
        if let Some(p) = self.corpus.mask_patterns.as_mut() {
            fix(p);
        }
        if let Some(s) = self.corpus.stopwords.as_mut() {
            if s != "default" && s != "none" && Path::new(s.as_str()).is_relative() {
                *s = base.join(&*s).to_string_lossy().into_owned();
            }
        }
        self.contextual.iter_mut().for_each(|c| fix(&mut c.path));
        self.datasets.iter_mut().for_each(|d| fix(&mut d.path));
    }

    /// Explicit embedding entries followed by the grid expansion.
    pub fn all_embeddings(&self) -> Vec<EmbeddingSpec> {
        let mut out = self.embeddings.clone();
        for g in &self.grid {
            for &model in &g.models {
                for tok in &g.tokenizers {
                    for &arch in &g.architectures {
                        for &dim in &g.dims {
                            let arch_name = match arch {
                                Architecture::Cbow => "cbow",
                                Architecture::Skipgram => "skipgram",
                            };
                            let name = format!("{}-{tok}-{arch_name}-{dim}", model.as_str());
                            out.push(EmbeddingSpec { dim: Some(dim), ..EmbeddingSpec::new(name, model, arch, tok.clone()) });
                        }
                    }
                }
            }
        }
        out
    }

    /// Full training config for `spec`: library defaults, then
    /// `[training]`, then the entry itself. The run seed always applies.
    pub fn train_config(&self, spec: &EmbeddingSpec) -> TrainConfig {
        let mut cfg = TrainConfig::new(spec.architecture);
        self.training.apply(&mut cfg);
        spec.overrides().apply(&mut cfg);
        cfg.seed = self.seed;
        cfg.workers = 1;
        cfg
    }

    pub fn tokenizer(&self, name: &str) -> Option<&TokenizerSpec> {
        self.tokenizers.iter().find(|t| t.name == name)
    }

    /// OOV policy for `spec`: explicit, else n-gram mean for FastText,
    /// subword mean with a subword tokenizer, skip otherwise.
    pub fn oov_policy(&self, spec: &EmbeddingSpec) -> OovPolicyKind {
        spec.oov.unwrap_or(match (spec.model, spec.tokenizer.as_str()) {
            (ModelFamily::Fasttext, _) => OovPolicyKind::NgramMean,
            (_, WORD_LEVEL) => OovPolicyKind::Skip,
            _ => OovPolicyKind::SubwordMean,
        })
    }

    pub fn distance(&self) -> Result<Distance, String> {
        self.eval.distance.parse::<Distance>().map_err(|e| e.to_string())
    }

    /// Checks every reference and value, collecting all problems.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let mut exists = |what: String, p: &Path| {
            if !p.exists() {
                problems.push(format!("{what}: {} does not exist", p.display()));
            }
        };
        let embeddings = self.all_embeddings();
        if !embeddings.is_empty() && self.corpus.paths.is_empty() {
            exists("corpus".into(), Path::new("<corpus.paths is empty>"));
        }
        for p in &self.corpus.paths {
            exists("corpus".into(), p);
        }
        if let Some(p) = &self.corpus.mask_patterns {
            exists("corpus.mask_patterns".into(), p);
        }
        if let Some(s) = self.corpus.stopwords.as_deref().filter(|s| *s != "default" && *s != "none") {
            exists("corpus.stopwords".into(), Path::new(s));
        }
        for c in &self.contextual {
            exists(format!("contextual {:?}", c.name), &c.path);
        }
        for d in &self.datasets {
            exists(format!("dataset {:?}", d.name), &d.path);
        }

        let mut tok_names = BTreeSet::new();
        for t in &self.tokenizers {
            if t.name == WORD_LEVEL {
                problems.push(format!("tokenizer name {WORD_LEVEL:?} is reserved for word-level training"));
            }
            if !tok_names.insert(t.name.as_str()) {
                problems.push(format!("duplicate tokenizer {:?}", t.name));
            }
            if t.vocab_size == 0 {
                problems.push(format!("tokenizer {:?}: vocab_size must be positive", t.name));
            }
        }

        let mut source_names = BTreeSet::new();
        for e in &embeddings {
            if !source_names.insert(e.name.clone()) {
                problems.push(format!("duplicate embedding {:?}", e.name));
            }
            let tok = self.tokenizer(&e.tokenizer);
            if e.tokenizer != WORD_LEVEL && tok.is_none() {
                problems.push(format!("embedding {:?}: unknown tokenizer {:?}", e.name, e.tokenizer));
            }
            let subword = tok.is_some_and(|t| t.kind.is_subword());
            match self.oov_policy(e) {
                OovPolicyKind::NgramMean if e.model != ModelFamily::Fasttext => {
                    problems.push(format!("embedding {:?}: ngram_mean needs a fasttext model", e.name))
                }
                OovPolicyKind::SubwordMean if !subword => {
                    problems.push(format!("embedding {:?}: subword_mean needs a subword tokenizer", e.name))
                }
                _ => {}
            }
            if let Err(err) = self.train_config(e).validate(e.model == ModelFamily::Fasttext) {
                problems.push(format!("embedding {:?}: {err}", e.name));
            }
        }
        for c in &self.contextual {
            if !source_names.insert(c.name.clone()) {
                problems.push(format!("duplicate embedding {:?}", c.name));
            }
        }
        if source_names.is_empty() {
            problems.push("no embeddings or contextual sources configured".into());
        }
        if let Some(r) = &self.eval.reference_vocabulary {
            if !embeddings.iter().any(|e| &e.name == r) {
                problems.push(format!("eval.reference_vocabulary: unknown embedding {r:?}"));
            }
        }

        let mut ds_names = BTreeSet::new();
        for d in &self.datasets {
            if !ds_names.insert(d.name.as_str()) {
                problems.push(format!("duplicate dataset {:?}", d.name));
            }
            let needs_schema = matches!(d.task, Task::WordSim | Task::SentSim);
            match (needs_schema, d.schema) {
                (true, None) => problems.push(format!("dataset {:?}: schema is required for {}", d.name, d.task.as_str())),
                (false, Some(_)) => problems.push(format!("dataset {:?}: schema only applies to similarity tasks", d.name)),
                _ => {}
            }
        }
        if self.datasets.is_empty() {
            problems.push("no datasets configured".into());
        }

        if let Err(e) = self.distance() {
            problems.push(format!("eval.distance: {e}"));
        }
        if self.eval.k == 0 {
            problems.push("eval.k must be positive".into());
        }
        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) {
            problems.push(format!("eval.test_fraction must be in (0, 1), got {}", self.eval.test_fraction));
        }
        if !(self.eval.beta > 0.0 && self.eval.beta.is_finite()) {
            problems.push(format!("eval.beta must be positive, got {}", self.eval.beta));
        }
        if let Err(e) = self.tagger.validate() {
            problems.push(format!("tagger: {e}"));
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> RunConfig {
        let mut c: RunConfig = toml::from_str(text).unwrap();
        c.resolve(Path::new("/nonexistent"));
        c
    }

    #[test]
    fn grid_expands_to_named_entries() {
        let c = parse(
            r#"
            output = "out"
            [[tokenizer]]
            name = "bpe"
            kind = "bpe"
            vocab_size = 100
            [[grid]]
            models = ["word2vec"]
            tokenizers = ["word", "bpe"]
            architectures = ["cbow", "skipgram"]
            dims = [100]
            "#,
        );
        let names: Vec<String> = c.all_embeddings().into_iter().map(|e| e.name).collect();
        assert_eq!(
            names,
            ["word2vec-word-cbow-100", "word2vec-word-skipgram-100", "word2vec-bpe-cbow-100", "word2vec-bpe-skipgram-100"]
        );
        let bpe = &c.all_embeddings()[2];
        assert_eq!(c.oov_policy(bpe), OovPolicyKind::SubwordMean);
        assert_eq!(c.train_config(bpe).dim, 100);
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = parse(
            r#"
            output = "out"
            [corpus]
            paths = ["missing.txt"]
            [[embedding]]
            name = "a"
            model = "word2vec"
            architecture = "cbow"
            tokenizer = "nope"
            oov = "ngram_mean"
            [[embedding]]
            name = "a"
            model = "fasttext"
            architecture = "skipgram"
            dim = 0
            [[dataset]]
            name = "sim"
            task = "word-sim"
            path = "sim.csv"
            "#,
        );
        let ConfigError::Invalid(problems) = c.validate().unwrap_err() else { panic!() };
        let all = problems.join("\n");
        for needle in
            ["missing.txt", "unknown tokenizer \"nope\"", "ngram_mean needs", "duplicate embedding \"a\"", "dim must be positive", "schema is required", "sim.csv"]
        {
            assert!(all.contains(needle), "{needle} not in\n{all}");
        }
    }

    #[test]
    fn entry_overrides_beat_training_section() {
        let c = parse(
            r#"
            output = "out"
            seed = 7
            [training]
            dim = 20
            epochs = 2
            [[embedding]]
            name = "e"
            model = "word2vec"
            architecture = "skipgram"
            dim = 30
            "#,
        );
        let t = c.train_config(&c.all_embeddings()[0]);
        assert_eq!((t.dim, t.epochs, t.seed, t.window), (30, 2, 7, 5));
    }
}
