//! Word2Vec (CBOW, Skipgram) and FastText training with negative sampling.
//!
//! Workers share the parameter matrices without locks. Each row element is an
//! `AtomicU32` holding `f32` bits, read and written with relaxed ordering, so
//! concurrent updates may overwrite each other but never tear. With a single
//! worker training is fully deterministic for a given seed.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ngrams::ngram_buckets;
use super::sgns::sgns_update;
use super::store::{NgramTable, StoreKind, VectorStore};
use super::EmbedError;
use crate::corpus::TokenizedCorpus;
use crate::tokenizers::{TokenizerModel, ABSENT_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cbow,
    Skipgram,
}

impl std::str::FromStr for Architecture {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cbow" => Ok(Self::Cbow),
            "skipgram" | "skip-gram" => Ok(Self::Skipgram),
            _ => Err(EmbedError::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    /// Sub-sampling threshold `t`; 0 disables sub-sampling.
    pub subsample: f64,
    pub seed: u64,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    pub workers: usize,
}

impl TrainConfig {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            architecture,
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: match architecture {
                Architecture::Cbow => 0.05,
                Architecture::Skipgram => 0.025,
            },
            min_count: 5,
            subsample: 1e-3,
            seed: 1,
            min_n: 3,
            max_n: 6,
            buckets: 2_000_000,
            workers: 1,
        }
    }

    pub fn validate(&self, fasttext: bool) -> Result<(), EmbedError> {
        let mut problems = Vec::new();
        if self.dim == 0 {
            problems.push("dim must be positive".to_string());
        }
        if self.window == 0 {
            problems.push("window must be positive".to_string());
        }
        if self.negatives == 0 {
            problems.push("negatives must be positive".to_string());
        }
        if self.epochs == 0 {
            problems.push("epochs must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.subsample >= 0.0 && self.subsample.is_finite()) {
            problems.push(format!("subsample must be >= 0, got {}", self.subsample));
        }
        if self.workers == 0 {
            problems.push("workers must be positive".to_string());
        }
        if fasttext {
            if self.min_n == 0 || self.min_n > self.max_n {
                problems.push(format!("invalid n-gram range {}..={}", self.min_n, self.max_n));
            }
            if self.buckets == 0 {
                problems.push("buckets must be positive".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(EmbedError::Config(problems.join("; ")))
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(Architecture::Skipgram)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub vocab_size: usize,
    pub train_units: u64,
    /// Mean negative-sampling loss per example, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Turns a corpus into training units: tokenizer pieces when a tokenizer is
/// given (absent and unknown pieces dropped), raw tokens otherwise.
pub fn training_units(corpus: &TokenizedCorpus, tokenizer: Option<&TokenizerModel>) -> Vec<Vec<String>> {
    match tokenizer {
        None => corpus.sentences.clone(),
        Some(tok) => {
            let unk = tok.unk_id();
            corpus
                .sentences
                .iter()
                .map(|s| {
                    s.iter()
                        .flat_map(|w| tok.encode_word(w))
                        .filter(|(_, id)| *id != ABSENT_ID && Some(*id) != unk)
                        .map(|(p, _)| p)
                        .collect()
                })
                .collect()
        }
    }
}

pub fn train_word2vec(
    corpus: &TokenizedCorpus,
    tokenizer: Option<&TokenizerModel>,
    cfg: &TrainConfig,
) -> Result<(VectorStore, TrainStats), EmbedError> {
    cfg.validate(false)?;
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    train(&training_units(corpus, tokenizer), cfg, false)
}

pub fn train_fasttext(
    corpus: &TokenizedCorpus,
    tokenizer: Option<&TokenizerModel>,
    cfg: &TrainConfig,
) -> Result<(VectorStore, TrainStats), EmbedError> {
    cfg.validate(true)?;
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    train(&training_units(corpus, tokenizer), cfg, true)
}

struct SharedMatrix {
    data: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    fn new(rows: usize, dim: usize, mut init: impl FnMut() -> f32) -> Self {
        Self { data: (0..rows * dim).map(|_| AtomicU32::new(init().to_bits())).collect(), dim }
    }

    fn read(&self, row: usize, out: &mut [f32]) {
        for (o, a) in out.iter_mut().zip(&self.data[row * self.dim..(row + 1) * self.dim]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn write(&self, row: usize, values: &[f32]) {
        for (a, v) in self.data[row * self.dim..(row + 1) * self.dim].iter().zip(values) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn add(&self, row: usize, delta: &[f32]) {
        for (a, d) in self.data[row * self.dim..(row + 1) * self.dim].iter().zip(delta) {
            let v = f32::from_bits(a.load(Ordering::Relaxed)) + d;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f32> {
        self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

struct Shared<'a> {
    cfg: &'a TrainConfig,
    input: SharedMatrix,
    output: SharedMatrix,
    /// Input rows summed for each unit: the unit itself plus its n-gram rows.
    rows: Vec<Vec<usize>>,
    keep: Vec<f64>,
    negatives: WeightedIndex<f64>,
    processed: AtomicU64,
    total: f64,
}

struct Scratch {
    h: Vec<f32>,
    grad: Vec<f32>,
    out: Vec<f32>,
    row: Vec<f32>,
}

impl Shared<'_> {
    fn learning_rate(&self) -> f32 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let frac = (1.0 - done / (self.total + 1.0)).max(1e-4);
        (self.cfg.learning_rate * frac) as f32
    }

    fn mean_input(&self, units: &[u32], s: &mut Scratch) -> usize {
        s.h.iter_mut().for_each(|v| *v = 0.0);
        let mut n = 0;
        for &u in units {
            for &r in &self.rows[u as usize] {
                self.input.read(r, &mut s.row);
                s.h.iter_mut().zip(&s.row).for_each(|(h, v)| *h += v);
                n += 1;
            }
        }
        let inv = 1.0 / n as f32;
        s.h.iter_mut().for_each(|v| *v *= inv);
        n
    }

    /// One positive target plus sampled negatives against the current `h`.
    fn examples(&self, target: u32, lr: f32, rng: &mut ChaCha8Rng, s: &mut Scratch) -> f64 {
        s.grad.iter_mut().for_each(|v| *v = 0.0);
        let mut loss = 0.0;
        self.output.read(target as usize, &mut s.out);
        loss += sgns_update(&s.h, &mut s.out, true, lr, &mut s.grad) as f64;
        self.output.write(target as usize, &s.out);
        for _ in 0..self.cfg.negatives {
            let neg = self.negatives.sample(rng) as u32;
            if neg == target {
                continue;
            }
            self.output.read(neg as usize, &mut s.out);
            loss += sgns_update(&s.h, &mut s.out, false, lr, &mut s.grad) as f64;
            self.output.write(neg as usize, &s.out);
        }
        loss
    }

    fn apply_grad(&self, units: &[u32], s: &Scratch) {
        for &u in units {
            for &r in &self.rows[u as usize] {
                self.input.add(r, &s.grad);
            }
        }
    }

    fn run(&self, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng, epoch_loss: &mut (f64, u64)) {
        let dim = self.cfg.dim;
        let mut s = Scratch { h: vec![0.0; dim], grad: vec![0.0; dim], out: vec![0.0; dim], row: vec![0.0; dim] };
        let mut kept = Vec::new();
        let mut ctx = Vec::new();
        for sentence in sentences {
            kept.clear();
            kept.extend(sentence.iter().copied().filter(|&u| {
                let p = self.keep[u as usize];
                p >= 1.0 || rng.random::<f64>() < p
            }));
            let lr = self.learning_rate();
            for pos in 0..kept.len() {
                let b = rng.random_range(1..=self.cfg.window);
                let lo = pos.saturating_sub(b);
                let hi = (pos + b + 1).min(kept.len());
                ctx.clear();
                ctx.extend((lo..hi).filter(|&j| j != pos).map(|j| kept[j]));
                if ctx.is_empty() {
                    continue;
                }
                let center = kept[pos];
                match self.cfg.architecture {
                    Architecture::Skipgram => {
                        for &c in &ctx {
                            self.mean_input(&[center], &mut s);
                            epoch_loss.0 += self.examples(c, lr, rng, &mut s);
                            epoch_loss.1 += 1;
                            self.apply_grad(&[center], &s);
                        }
                    }
                    Architecture::Cbow => {
                        self.mean_input(&ctx, &mut s);
                        epoch_loss.0 += self.examples(center, lr, rng, &mut s);
                        epoch_loss.1 += 1;
                        self.apply_grad(&ctx, &s);
                    }
                }
            }
            self.processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
        }
    }
}

fn worker_seed(seed: u64, worker: usize) -> u64 {
    seed ^ (worker as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn train(units: &[Vec<String>], cfg: &TrainConfig, fasttext: bool) -> Result<(VectorStore, TrainStats), EmbedError> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in units {
        for u in s {
            *counts.entry(u.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count).collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary { min_count: cfg.min_count });
    }
    let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, (w, _))| (*w, i as u32)).collect();
    let sentences: Vec<Vec<u32>> = units
        .iter()
        .map(|s| s.iter().filter_map(|u| index.get(u.as_str()).copied()).collect())
        .collect();
    let train_units: u64 = vocab.iter().map(|(_, c)| c).sum();

    let v = vocab.len();
    let dim = cfg.dim;
    let rows: Vec<Vec<usize>> = vocab
        .iter()
        .enumerate()
        .map(|(i, (w, _))| {
            let mut r = vec![i];
            if fasttext {
                r.extend(ngram_buckets(w, cfg.min_n, cfg.max_n, cfg.buckets).into_iter().map(|b| v + b));
            }
            r
        })
        .collect();
    let keep = vocab
        .iter()
        .map(|&(_, c)| {
            if cfg.subsample <= 0.0 {
                return 1.0;
            }
            let t = cfg.subsample * train_units as f64;
            ((c as f64 / t).sqrt() + 1.0) * t / c as f64
        })
        .collect();
    let negatives = WeightedIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(0.75)))
        .map_err(|e| EmbedError::Config(format!("negative sampling table: {e}")))?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f32;
    let input_rows = if fasttext { v + cfg.buckets } else { v };
    let shared = Shared {
        cfg,
        input: SharedMatrix::new(input_rows, dim, || init_rng.random_range(-bound..bound)),
        output: SharedMatrix::new(v, dim, || 0.0),
        rows,
        keep,
        negatives,
        processed: AtomicU64::new(0),
        total: (cfg.epochs as u64 * train_units) as f64,
    };

    let workers = cfg.workers.min(sentences.len().max(1));
    let chunk = sentences.len().div_ceil(workers).max(1);
    let mut rngs: Vec<ChaCha8Rng> = (0..workers).map(|w| ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, w))).collect();
    let mut stats = TrainStats { vocab_size: v, train_units, epoch_losses: Vec::new() };
    for epoch in 0..cfg.epochs {
        let mut losses = vec![(0.0f64, 0u64); workers];
        if workers == 1 {
            shared.run(&sentences, &mut rngs[0], &mut losses[0]);
        } else {
            std::thread::scope(|scope| {
                for ((shard, rng), loss) in sentences.chunks(chunk).zip(rngs.iter_mut()).zip(losses.iter_mut()) {
                    let shared = &shared;
                    scope.spawn(move || shared.run(shard, rng, loss));
                }
            });
        }
        let (sum, n) = losses.iter().fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let mean = if n == 0 { 0.0 } else { sum / n as f64 };
        log::info!("epoch {} mean loss {mean:.5}", epoch + 1);
        stats.epoch_losses.push(mean);
    }

    let input = shared.input.into_vec();
    let words: Vec<String> = vocab.iter().map(|(w, _)| w.to_string()).collect();
    let store = if fasttext {
        let mut matrix = vec![0.0f32; v * dim];
        for (i, r) in shared.rows.iter().enumerate() {
            let out = &mut matrix[i * dim..(i + 1) * dim];
            for &row in r {
                out.iter_mut().zip(&input[row * dim..(row + 1) * dim]).for_each(|(o, x)| *o += x);
            }
            let inv = 1.0 / r.len() as f32;
            out.iter_mut().for_each(|o| *o *= inv);
        }
        let table = NgramTable { min_n: cfg.min_n, max_n: cfg.max_n, buckets: cfg.buckets, matrix: input[v * dim..].to_vec() };
        VectorStore::from_parts(StoreKind::FastText, dim, words, matrix, Some(table))
    } else {
        VectorStore::from_parts(StoreKind::Word2Vec, dim, words, input, None)
    };
    Ok((store, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_corpus() -> TokenizedCorpus {
        let mut sentences = Vec::new();
        for i in 0..300 {
            let s = if i % 2 == 0 {
                "the cat sat on the warm mat near the dog"
            } else {
                "a protein binds the receptor in the cell membrane"
            };
            sentences.push(s.split(' ').map(String::from).collect());
        }
        TokenizedCorpus::from_sentences(sentences)
    }

    fn small_cfg(arch: Architecture) -> TrainConfig {
        TrainConfig { dim: 16, epochs: 3, buckets: 1000, min_count: 1, ..TrainConfig::new(arch) }
    }

    #[test]
    fn single_worker_training_is_deterministic() {
        let c = toy_corpus();
        for arch in [Architecture::Cbow, Architecture::Skipgram] {
            let cfg = small_cfg(arch);
            let (a, _) = train_word2vec(&c, None, &cfg).unwrap();
            let (b, _) = train_word2vec(&c, None, &cfg).unwrap();
            assert_eq!(a, b);
            let (a, _) = train_fasttext(&c, None, &cfg).unwrap();
            let (b, _) = train_fasttext(&c, None, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn loss_decreases_and_vectors_are_finite() {
        let c = toy_corpus();
        let (store, stats) = train_word2vec(&c, None, &small_cfg(Architecture::Skipgram)).unwrap();
        assert!(stats.epoch_losses.last() < stats.epoch_losses.first(), "{:?}", stats.epoch_losses);
        assert!(store.matrix().iter().all(|v| v.is_finite()));
        assert_eq!(store.vocab()[0], "the");
    }

    #[test]
    fn min_count_filters_everything() {
        let cfg = TrainConfig { min_count: 10_000, ..small_cfg(Architecture::Cbow) };
        assert!(matches!(train_word2vec(&toy_corpus(), None, &cfg), Err(EmbedError::EmptyVocabulary { .. })));
    }

    #[test]
    fn fasttext_rows_compose_word_and_ngrams() {
        let c = toy_corpus();
        let cfg = small_cfg(Architecture::Skipgram);
        let (store, _) = train_fasttext(&c, None, &cfg).unwrap();
        let table = store.ngrams().unwrap();
        assert_eq!(table.matrix.len(), 1000 * 16);
        assert!(store.ngram_vector("catz").is_some());
    }

    #[test]
    fn multiple_workers_produce_finite_vectors() {
        let cfg = TrainConfig { workers: 4, ..small_cfg(Architecture::Skipgram) };
        let (store, _) = train_word2vec(&toy_corpus(), None, &cfg).unwrap();
        assert!(store.matrix().iter().all(|v| v.is_finite()));
    }
}
