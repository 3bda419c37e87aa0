//! The four evaluation tasks, each taking an embedding source and a dataset.

use crate::corpus::PreprocessConfig;
use crate::datasets::{DocDataset, Split, SimilarityDataset, SimilarityItem, TaggedDataset, TaggedSentence};
use crate::embeddings::{vector, EmbeddingSource, OovPolicy, VectorStore};
use crate::neural::{train_tagger, TaggedSequence, TaggerConfig};

use super::classification::{classification_metrics, ClassificationReport};
use super::correlation::{cosine, CorrelationReport, PairSplit};
use super::knn::{knn_predict, Distance};
use super::split::{holdout, stratified_holdout};
use super::EvalError;

/// The tag excluded from averaged NER precision, recall and F.
pub const OUTSIDE_TAG: &str = "O";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Tokenization of sentences and documents, and case folding of words.
    pub text: PreprocessConfig,
    pub beta: f64,
    pub k: usize,
    pub distance: Distance,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { text: PreprocessConfig::default(), beta: 1.0, k: 3, distance: Distance::Cosine, test_fraction: 0.2, seed: 1 }
    }
}

impl EvalOptions {
    /// Lookup key for a similarity term: case-folded, multiword terms joined
    /// with `_` to match phrase tokens.
    pub fn term_key(&self, term: &str) -> String {
        let t = if self.text.lowercase { term.to_lowercase() } else { term.to_string() };
        t.split_whitespace().collect::<Vec<_>>().join("_")
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.text.tokenize_line(text)
    }

    fn token_key(&self, token: &str) -> String {
        if self.text.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        }
    }
}

/// Word similarity. Returns in-vocab, OOV and overall reports in that
/// order. A pair is OOV when either term is missing from the store's
/// vocabulary; the policy decides whether it still gets a similarity.
pub fn eval_word_similarity(
    store: &VectorStore,
    policy: &OovPolicy,
    data: &SimilarityDataset,
    opts: &EvalOptions,
) -> Result<[CorrelationReport; 3], EvalError> {
    eval_word_similarity_split(store, policy, data, opts, |t| store.contains(t))
}

/// As [`eval_word_similarity`], with the in-vocab test supplied by the
/// caller. Subword stores hold pieces rather than words, so comparing them
/// against a word-level model needs that model's vocabulary here.
pub fn eval_word_similarity_split(
    store: &VectorStore,
    policy: &OovPolicy,
    data: &SimilarityDataset,
    opts: &EvalOptions,
    in_vocab: impl Fn(&str) -> bool,
) -> Result<[CorrelationReport; 3], EvalError> {
    policy.check(store)?;
    let mut oov = Vec::with_capacity(data.len());
    let mut model = Vec::with_capacity(data.len());
    for item in &data.items {
        let (a, b) = (opts.term_key(&item.left), opts.term_key(&item.right));
        oov.push(!in_vocab(&a) || !in_vocab(&b));
        model.push(match (vector(store, &a, policy)?, vector(store, &b, policy)?) {
            (Some(u), Some(v)) => cosine(&u, &v)?,
            _ => f64::NAN,
        });
    }
    let human: Vec<f64> = data.items.iter().map(|it| it.score).collect();
    let pick = |want: bool, v: &[f64]| -> Vec<f64> { v.iter().zip(&oov).filter(|(_, &o)| o == want).map(|(x, _)| *x).collect() };
    let n_oov = oov.iter().filter(|&&o| o).count();
    Ok([
        CorrelationReport::compute(PairSplit::InVocab, &pick(false, &human), &pick(false, &model), 0)?,
        CorrelationReport::compute(PairSplit::Oov, &pick(true, &human), &pick(true, &model), n_oov)?,
        CorrelationReport::compute(PairSplit::Overall, &human, &model, n_oov)?,
    ])
}

/// Contextual-store ids for the two sides of a sentence pair.
pub fn pair_ids(item: &SimilarityItem) -> (String, String) {
    (format!("{}:a", item.id), format!("{}:b", item.id))
}

/// Every sentence the similarity task will look up, as `(id, tokens)`.
pub fn similarity_sentences(data: &SimilarityDataset, opts: &EvalOptions) -> Vec<(String, Vec<String>)> {
    data.items
        .iter()
        .flat_map(|it| {
            let (a, b) = pair_ids(it);
            [(a, opts.tokenize(&it.left)), (b, opts.tokenize(&it.right))]
        })
        .filter(|(_, t)| !t.is_empty())
        .collect()
}

pub fn tagged_sentences(data: &TaggedDataset) -> Vec<(String, Vec<String>)> {
    data.sentences.iter().map(|s| (s.id.clone(), s.tokens.clone())).collect()
}

pub fn doc_sentences(data: &DocDataset, opts: &EvalOptions) -> Vec<(String, Vec<String>)> {
    data.docs
        .iter()
        .map(|d| (d.id.clone(), opts.tokenize(data.text(d))))
        .filter(|(_, t)| !t.is_empty())
        .collect()
}

fn require_all(source: &EmbeddingSource, sentences: &[(String, Vec<String>)]) -> Result<(), EvalError> {
    source.require(sentences.iter().map(|(id, _)| id.as_str()))?;
    Ok(())
}

/// Static sources see case-folded tokens; contextual ones the tokens as
/// exported.
fn lookup_tokens(source: &EmbeddingSource, tokens: &[String], opts: &EvalOptions) -> Vec<String> {
    match source {
        EmbeddingSource::Static { .. } => tokens.iter().map(|t| opts.token_key(t)).collect(),
        EmbeddingSource::Contextual(_) => tokens.to_vec(),
    }
}

fn text_vector(source: &EmbeddingSource, id: &str, tokens: &[String], opts: &EvalOptions) -> Result<Option<Vec<f64>>, EvalError> {
    if tokens.is_empty() {
        return Ok(None);
    }
    Ok(source.sentence_vector(id, &lookup_tokens(source, tokens, opts))?)
}

/// Sentence similarity over mean token vectors. A pair counts as OOV when
/// either side has no vector at all.
pub fn eval_sentence_similarity(
    source: &EmbeddingSource,
    data: &SimilarityDataset,
    opts: &EvalOptions,
) -> Result<CorrelationReport, EvalError> {
    if let EmbeddingSource::Static { store, policy } = source {
        policy.check(store)?;
    }
    require_all(source, &similarity_sentences(data, opts))?;
    let mut human = Vec::with_capacity(data.len());
    let mut model = Vec::with_capacity(data.len());
    let mut n_oov = 0;
    for item in &data.items {
        let (ia, ib) = pair_ids(item);
        let u = text_vector(source, &ia, &opts.tokenize(&item.left), opts)?;
        let v = text_vector(source, &ib, &opts.tokenize(&item.right), opts)?;
        let sim = match (u, v) {
            (Some(u), Some(v)) => cosine(&u, &v)?,
            _ => {
                n_oov += 1;
                f64::NAN
            }
        };
        human.push(item.score);
        model.push(sim);
    }
    CorrelationReport::compute(PairSplit::Overall, &human, &model, n_oov)
}

/// Train and test sentences: the shipped test split, else the dev split,
/// else a seeded holdout by sentence index.
pub fn ner_partition<'a>(data: &'a TaggedDataset, opts: &EvalOptions) -> (Vec<&'a TaggedSentence>, Vec<&'a TaggedSentence>) {
    let eval_split = [Split::Test, Split::Dev].into_iter().find(|&s| data.has_split(s));
    match eval_split {
        Some(s) if data.has_split(Split::Train) => (data.split(Split::Train).collect(), data.split(s).collect()),
        _ => {
            let (tr, te) = holdout(data.len(), opts.test_fraction, opts.seed);
            (tr.iter().map(|&i| &data.sentences[i]).collect(), te.iter().map(|&i| &data.sentences[i]).collect())
        }
    }
}

fn token_inputs(source: &EmbeddingSource, s: &TaggedSentence, opts: &EvalOptions) -> Result<Vec<Vec<f64>>, EvalError> {
    let dim = source.dim();
    Ok(source
        .token_vectors(&s.id, &lookup_tokens(source, &s.tokens, opts))?
        .into_iter()
        .map(|v| v.unwrap_or_else(|| vec![0.0; dim]))
        .collect())
}

/// Trains the BiLSTM probe on frozen token vectors and scores the test
/// tokens. Accuracy counts every token; averaged precision, recall and F
/// leave out the `O` tag. Tokens without a vector are fed as zeros.
pub fn eval_ner(
    source: &EmbeddingSource,
    data: &TaggedDataset,
    cfg: &TaggerConfig,
    opts: &EvalOptions,
) -> Result<ClassificationReport, EvalError> {
    if let EmbeddingSource::Static { store, policy } = source {
        policy.check(store)?;
    }
    require_all(source, &tagged_sentences(data))?;
    let (train, test) = ner_partition(data, opts);
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::Empty("NER train or test partition"));
    }
    let tags: Vec<String> =
        train.iter().flat_map(|s| s.tags.iter().cloned()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let index = |t: &str| tags.iter().position(|x| x == t).expect("tag collected from training data");
    let seqs = train
        .iter()
        .map(|s| Ok(TaggedSequence { inputs: token_inputs(source, s, opts)?, tags: s.tags.iter().map(|t| index(t)).collect() }))
        .collect::<Result<Vec<_>, EvalError>>()?;
    let (model, report) = train_tagger(&seqs, source.dim(), tags.clone(), cfg)?;
    log::info!("ner probe trained: {} steps, final loss {:?}", report.steps, report.epoch_losses.last());
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for s in &test {
        let p = model.predict(&token_inputs(source, s, opts)?)?;
        gold.extend(s.tags.iter().cloned());
        pred.extend(p.into_iter().map(|i| tags[i].clone()));
    }
    classification_metrics(&gold, &pred, opts.beta, &tags, &[OUTSIDE_TAG.to_string()])
}

/// Mean-embedding KNN document classification on a stratified holdout.
/// Documents without any vector are placed at the origin.
pub fn eval_docclass(source: &EmbeddingSource, data: &DocDataset, opts: &EvalOptions) -> Result<ClassificationReport, EvalError> {
    if let EmbeddingSource::Static { store, policy } = source {
        policy.check(store)?;
    }
    require_all(source, &doc_sentences(data, opts))?;
    let dim = source.dim();
    let vectors = data
        .docs
        .iter()
        .map(|d| Ok(text_vector(source, &d.id, &opts.tokenize(data.text(d)), opts)?.unwrap_or_else(|| vec![0.0; dim])))
        .collect::<Result<Vec<_>, EvalError>>()?;
    let labels: Vec<&str> = data.docs.iter().map(|d| d.label.as_str()).collect();
    let (train, test) = stratified_holdout(&labels, opts.test_fraction, opts.seed);
    if test.is_empty() {
        return Err(EvalError::Empty("document test partition"));
    }
    let tv: Vec<Vec<f64>> = train.iter().map(|&i| vectors[i].clone()).collect();
    let tl: Vec<&str> = train.iter().map(|&i| labels[i]).collect();
    let qv: Vec<Vec<f64>> = test.iter().map(|&i| vectors[i].clone()).collect();
    let pred = knn_predict(&tv, &tl, &qv, opts.k, opts.distance)?;
    let gold: Vec<String> = test.iter().map(|&i| labels[i].to_string()).collect();
    let all: Vec<String> = data.label_set.iter().cloned().collect();
    classification_metrics(&gold, &pred, opts.beta, &all, &[])
}
