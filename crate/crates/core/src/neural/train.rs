//! Mini-batch training of the tagger with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{TaggedSequence, TaggerModel, NUM_LAYERS};
use super::NeuralError;

/// Sentences per gradient work unit. Fixed so the summation order, and hence
/// the result, does not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerConfig {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; off unless set.
    pub clip: Option<f64>,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            hidden_size: 128,
            num_layers: NUM_LAYERS,
            epochs: 5,
            lr: 5e-4,
            batch_size: 128,
            seed: 1,
            optimizer: Optimizer::Adam,
            clip: None,
        }
    }
}

pub const DEFAULT_CLIP: f64 = 5.0;

impl TaggerConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let mut problems = Vec::new();
        if self.num_layers != NUM_LAYERS {
            problems.push(format!("num_layers must be {NUM_LAYERS}, got {}", self.num_layers));
        }
        if self.hidden_size == 0 {
            problems.push("hidden_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".into());
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                problems.push(format!("clip must be positive, got {c}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(NeuralError::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean token cross-entropy seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Shuffles, groups sentences of similar length, and shuffles the groups.
fn batches(data: &[TaggedSequence], size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| data[i].inputs.len());
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(|c| c.to_vec()).collect();
    out.shuffle(rng);
    out
}

/// Gradient of the batch's mean token loss, computed on a zero-padded batch
/// with padding masked out.
pub fn batch_gradient(model: &TaggerModel, data: &[TaggedSequence], batch: &[usize]) -> Result<(f64, Vec<f64>), NeuralError> {
    let width = batch.iter().map(|&i| data[i].inputs.len()).max().unwrap_or(0);
    let tokens: usize = batch.iter().map(|&i| data[i].tags.len()).sum();
    let scale = 1.0 / tokens.max(1) as f64;
    let n = model.params().len();
    let parts: Vec<Result<(f64, Vec<f64>), NeuralError>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let mut loss = 0.0;
            for &i in chunk {
                let s = &data[i];
                let mut xs = s.inputs.clone();
                let mut tags = s.tags.clone();
                let mut mask = vec![true; xs.len()];
                xs.resize(width, vec![0.0; model.input_dim()]);
                tags.resize(width, 0);
                mask.resize(width, false);
                loss += model.loss_and_grad(&xs, &mask, &tags, scale, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    for part in parts {
        let (l, g) = part?;
        total += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((total * scale, grad))
}

fn clip_norm(grad: &mut [f64], max: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max {
        let s = max / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

pub fn train_tagger(
    data: &[TaggedSequence],
    input_dim: usize,
    tags: Vec<String>,
    cfg: &TaggerConfig,
) -> Result<(TaggerModel, TrainReport), NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TaggerModel::init(input_dim, cfg.hidden_size, tags, &mut rng)?;
    let mut opt = Adam::new(model.params().len());
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut tokens = 0usize;
        for batch in batches(data, cfg.batch_size, &mut rng) {
            let (loss, mut grad) = batch_gradient(&model, data, &batch)?;
            let n: usize = batch.iter().map(|&i| data[i].tags.len()).sum();
            loss_sum += loss * n as f64;
            tokens += n;
            if let Some(c) = cfg.clip {
                clip_norm(&mut grad, c);
            }
            opt.step(model.params_mut(), &grad, cfg.lr);
            report.steps += 1;
        }
        let mean = loss_sum / tokens.max(1) as f64;
        log::info!("tagger epoch {} loss {mean:.5}", epoch + 1);
        report.epoch_losses.push(mean);
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(NeuralError::Diverged);
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<TaggedSequence> {
        (0..6)
            .map(|i| {
                let len = 2 + i % 3;
                let tags: Vec<usize> = (0..len).map(|t| (i + t) % 2).collect();
                let inputs = tags.iter().map(|&t| if t == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
                TaggedSequence { inputs, tags }
            })
            .collect()
    }

    fn tags() -> Vec<String> {
        vec!["O".into(), "X".into()]
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![1.0, -1.0];
        let mut a = Adam::new(2);
        a.step(&mut p, &[0.3, -2.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = TaggerConfig { hidden_size: 4, batch_size: 4, epochs: 3, ..Default::default() };
        let (a, _) = train_tagger(&toy(), 2, tags(), &cfg).unwrap();
        let (b, _) = train_tagger(&toy(), 2, tags(), &cfg).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn batch_gradient_is_thread_count_independent() {
        let data = toy();
        let m = TaggerModel::random(2, 3, tags(), 5, 0.4).unwrap();
        let batch: Vec<usize> = (0..data.len()).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| batch_gradient(&m, &data, &batch).unwrap());
        let many = batch_gradient(&m, &data, &batch).unwrap();
        assert_eq!(one.0.to_bits(), many.0.to_bits());
        assert_eq!(one.1, many.1);
    }

    #[test]
    fn invalid_config_lists_problems() {
        let cfg = TaggerConfig { num_layers: 1, batch_size: 0, ..Default::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("num_layers") && err.contains("batch_size"));
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = vec![3.0, 4.0];
        clip_norm(&mut g, DEFAULT_CLIP / 5.0);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }
}
