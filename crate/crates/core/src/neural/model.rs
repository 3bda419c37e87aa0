//! Two-layer bidirectional LSTM tagger with a softmax projection.
//!
//! All parameters live in one flat `Vec<f64>` split into named blocks, which
//! keeps the optimizer, the gradient check and checkpointing uniform.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{self, Grads, Weights};
use super::NeuralError;

pub const CHECKPOINT_FORMAT: &str = "embeval-tagger/1";
pub const NUM_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// One input sentence: a vector per token and, for training, a tag index
/// per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSequence {
    pub inputs: Vec<Vec<f64>>,
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    input_dim: usize,
    hidden: usize,
    tags: Vec<String>,
    blocks: Vec<Block>,
    params: Vec<f64>,
}

const DIRS: [&str; 2] = ["fwd", "bwd"];
const PARTS: [&str; 3] = ["w_ih", "w_hh", "bias"];

fn lstm_block(layer: usize, dir: usize, part: usize) -> usize {
    (layer * 2 + dir) * 3 + part
}

const PROJ_WEIGHT: usize = NUM_LAYERS * 2 * 3;
const PROJ_BIAS: usize = PROJ_WEIGHT + 1;

fn layout(input_dim: usize, hidden: usize, num_tags: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, rows: usize, cols: usize| {
        blocks.push(Block { name, offset, rows, cols });
        offset += rows * cols;
    };
    for layer in 0..NUM_LAYERS {
        let input = if layer == 0 { input_dim } else { 2 * hidden };
        for dir in DIRS {
            push(format!("lstm.l{layer}.{dir}.{}", PARTS[0]), 4 * hidden, input);
            push(format!("lstm.l{layer}.{dir}.{}", PARTS[1]), 4 * hidden, hidden);
            push(format!("lstm.l{layer}.{dir}.{}", PARTS[2]), 1, 4 * hidden);
        }
    }
    push("proj.weight".into(), 2 * hidden, num_tags);
    push("proj.bias".into(), 1, num_tags);
    blocks
}

struct Forward {
    layer_inputs: [Vec<Vec<f64>>; NUM_LAYERS],
    traces: Vec<lstm::Trace>,
    top: Vec<Vec<f64>>,
    log_probs: Vec<Vec<f64>>,
}

/// Turns logits into log-probabilities in place.
fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter_mut().for_each(|v| *v -= lse);
}

/// Row-major `rows × cols` matrix (rows >= cols) with orthonormal columns,
/// from Gram-Schmidt on a standard normal draw.
fn orthonormal_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut c: Vec<Vec<f64>> = (0..cols).map(|_| (0..rows).map(|_| StandardNormal.sample(rng)).collect()).collect();
    for j in 0..cols {
        for i in 0..j {
            let d: f64 = c[j].iter().zip(&c[i]).map(|(a, b)| a * b).sum();
            let (lo, hi) = c.split_at_mut(j);
            hi[0].iter_mut().zip(&lo[i]).for_each(|(a, b)| *a -= d * b);
        }
        let n = c[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        c[j].iter_mut().for_each(|v| *v /= n);
    }
    let mut out = vec![0.0; rows * cols];
    for (j, col) in c.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            out[i * cols + j] = *v;
        }
    }
    out
}

impl TaggerModel {
    /// All-zero parameters: every token gets the uniform distribution.
    pub fn zeros(input_dim: usize, hidden: usize, tags: Vec<String>) -> Result<Self, NeuralError> {
        if input_dim == 0 || hidden == 0 {
            return Err(NeuralError::Config("input_dim and hidden_size must be positive".into()));
        }
        if tags.is_empty() {
            return Err(NeuralError::Config("tag set is empty".into()));
        }
        let blocks = layout(input_dim, hidden, tags.len());
        let n = blocks.last().map(|b| b.offset + b.len()).unwrap_or(0);
        Ok(Self { input_dim, hidden, tags, blocks, params: vec![0.0; n] })
    }

    /// Glorot-uniform input weights and projection, orthogonal recurrent
    /// weights, zero biases.
    pub fn init(input_dim: usize, hidden: usize, tags: Vec<String>, rng: &mut ChaCha8Rng) -> Result<Self, NeuralError> {
        let mut m = Self::zeros(input_dim, hidden, tags)?;
        for b in m.blocks.clone() {
            if b.rows == 1 {
                continue;
            }
            if b.name.ends_with("w_hh") {
                m.params[b.range()].copy_from_slice(&orthonormal_columns(b.rows, b.cols, rng));
            } else {
                let limit = (6.0 / (b.rows + b.cols) as f64).sqrt();
                m.params[b.range()].iter_mut().for_each(|p| *p = rng.random_range(-limit..limit));
            }
        }
        Ok(m)
    }

    /// Every parameter uniform in `±scale`; used by the gradient check.
    pub fn random(input_dim: usize, hidden: usize, tags: Vec<String>, seed: u64, scale: f64) -> Result<Self, NeuralError> {
        let mut m = Self::zeros(input_dim, hidden, tags)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.params.iter_mut().for_each(|p| *p = rng.random_range(-scale..scale));
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn projection_range(&self) -> std::ops::Range<usize> {
        self.blocks[PROJ_WEIGHT].offset..self.params.len()
    }

    fn weights(&self, layer: usize, dir: usize) -> Weights<'_> {
        let b = |part| &self.params[self.blocks[lstm_block(layer, dir, part)].range()];
        Weights {
            w_ih: b(0),
            w_hh: b(1),
            bias: b(2),
            input: if layer == 0 { self.input_dim } else { 2 * self.hidden },
            hidden: self.hidden,
        }
    }

    fn check_inputs(&self, xs: &[Vec<f64>]) -> Result<(), NeuralError> {
        if xs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        if let Some(x) = xs.iter().find(|x| x.len() != self.input_dim) {
            return Err(NeuralError::DimMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    fn run(&self, xs: &[Vec<f64>], mask: &[bool]) -> Forward {
        let h = self.hidden;
        let mut traces = Vec::with_capacity(2 * NUM_LAYERS);
        let mut layer_inputs: [Vec<Vec<f64>>; NUM_LAYERS] = Default::default();
        let mut current = xs.to_vec();
        for (layer, slot) in layer_inputs.iter_mut().enumerate() {
            let (fwd, tf) = lstm::run(&self.weights(layer, 0), &current, mask, false);
            let (bwd, tb) = lstm::run(&self.weights(layer, 1), &current, mask, true);
            traces.push(tf);
            traces.push(tb);
            let next = fwd.into_iter().zip(bwd).map(|(mut a, b)| {
                a.extend(b);
                a
            });
            *slot = std::mem::replace(&mut current, next.collect());
        }
        let w = &self.params[self.blocks[PROJ_WEIGHT].range()];
        let bias = &self.params[self.blocks[PROJ_BIAS].range()];
        let k = self.num_tags();
        let log_probs = current
            .iter()
            .map(|hv| {
                let mut logits = bias.to_vec();
                for (hj, row) in hv.iter().zip(w.chunks_exact(k)) {
                    logits.iter_mut().zip(row).for_each(|(l, wv)| *l += hj * wv);
                }
                log_softmax(&mut logits);
                logits
            })
            .collect();
        debug_assert_eq!(current.first().map(|v| v.len()), Some(2 * h));
        Forward { layer_inputs, traces, top: current, log_probs }
    }

    /// Per-token tag distributions.
    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NeuralError> {
        self.check_inputs(xs)?;
        let lp = self.run(xs, &vec![true; xs.len()]).log_probs;
        Ok(lp.into_iter().map(|row| row.into_iter().map(f64::exp).collect()).collect())
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>, NeuralError> {
        Ok(self
            .forward(xs)?
            .iter()
            .map(|p| p.iter().enumerate().fold(0, |best, (i, &v)| if v > p[best] { i } else { best }))
            .collect())
    }

    /// Summed cross-entropy over unmasked tokens; adds the gradient of that
    /// sum, times `scale`, into `grad`.
    pub fn loss_and_grad(
        &self,
        xs: &[Vec<f64>],
        mask: &[bool],
        tags: &[usize],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64, NeuralError> {
        self.check_inputs(xs)?;
        if mask.len() != xs.len() || tags.len() != xs.len() {
            return Err(NeuralError::Config("inputs, mask and tags differ in length".into()));
        }
        if let Some(&t) = tags.iter().zip(mask).find(|(&t, &m)| m && t >= self.num_tags()).map(|(t, _)| t) {
            return Err(NeuralError::UnknownTag(t));
        }
        let fw = self.run(xs, mask);
        let k = self.num_tags();
        let two_h = 2 * self.hidden;
        let mut loss = 0.0;
        let mut d_top = vec![vec![0.0; two_h]; xs.len()];
        let w = &self.params[self.blocks[PROJ_WEIGHT].range()];
        let (lstm_grad, proj_grad) = grad.split_at_mut(self.blocks[PROJ_WEIGHT].offset);
        let (gw, gb) = proj_grad.split_at_mut(two_h * k);
        for t in (0..xs.len()).filter(|&t| mask[t]) {
            let lp = &fw.log_probs[t];
            loss -= lp[tags[t]];
            let mut dl: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
            dl[tags[t]] -= 1.0;
            dl.iter_mut().for_each(|v| *v *= scale);
            gb.iter_mut().zip(&dl).for_each(|(g, d)| *g += d);
            for (j, (&hj, row)) in fw.top[t].iter().zip(w.chunks_exact(k)).enumerate() {
                let grow = &mut gw[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for c in 0..k {
                    grow[c] += hj * dl[c];
                    acc += row[c] * dl[c];
                }
                d_top[t][j] = acc;
            }
        }
        let mut d_out = d_top;
        for layer in (0..NUM_LAYERS).rev() {
            let input = &fw.layer_inputs[layer];
            let mut d_in = vec![vec![0.0; input[0].len()]; xs.len()];
            for dir in 0..2 {
                let d_dir: Vec<Vec<f64>> = d_out
                    .iter()
                    .map(|d| d[dir * self.hidden..(dir + 1) * self.hidden].to_vec())
                    .collect();
                let wt = self.weights(layer, dir);
                let ranges: Vec<_> = (0..3).map(|p| self.blocks[lstm_block(layer, dir, p)].range()).collect();
                let (a, rest) = lstm_grad[ranges[0].start..ranges[2].end].split_at_mut(ranges[0].len());
                let (b, c) = rest.split_at_mut(ranges[1].len());
                let mut g = Grads { w_ih: a, w_hh: b, bias: c };
                let dx = lstm::backprop(&wt, input, &fw.traces[layer * 2 + dir], &d_dir, &mut g);
                for (acc, d) in d_in.iter_mut().zip(dx) {
                    acc.iter_mut().zip(d).for_each(|(x, y)| *x += y);
                }
            }
            d_out = d_in;
        }
        Ok(loss)
    }

    /// Mean token cross-entropy over a dataset.
    pub fn mean_loss(&self, data: &[TaggedSequence]) -> Result<f64, NeuralError> {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for s in data {
            self.check_inputs(&s.inputs)?;
            let lp = self.run(&s.inputs, &vec![true; s.inputs.len()]).log_probs;
            for (p, &t) in lp.iter().zip(&s.tags) {
                total -= p[t];
            }
            tokens += s.tags.len();
        }
        Ok(total / tokens.max(1) as f64)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            input_dim: self.input_dim,
            hidden_size: self.hidden,
            num_layers: NUM_LAYERS,
            tags: self.tags.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| (b.name.clone(), ParamBlock { shape: [b.rows, b.cols], data: self.params[b.range()].to_vec() }))
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, NeuralError> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NeuralError::Checkpoint(format!("unsupported format {:?}", ck.format)));
        }
        if ck.num_layers != NUM_LAYERS {
            return Err(NeuralError::Checkpoint(format!("expected {NUM_LAYERS} layers, found {}", ck.num_layers)));
        }
        let mut m = Self::zeros(ck.input_dim, ck.hidden_size, ck.tags)?;
        if ck.blocks.len() != m.blocks.len() {
            return Err(NeuralError::Checkpoint("unexpected set of parameter blocks".into()));
        }
        for b in &m.blocks {
            let pb = ck.blocks.get(&b.name).ok_or_else(|| NeuralError::Checkpoint(format!("missing block {}", b.name)))?;
            if pb.shape != [b.rows, b.cols] || pb.data.len() != b.len() {
                return Err(NeuralError::Checkpoint(format!("block {} has the wrong shape", b.name)));
            }
            if pb.data.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::Checkpoint(format!("block {} has non-finite values", b.name)));
            }
            m.params[b.range()].copy_from_slice(&pb.data);
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, serde_json::to_string(&self.to_checkpoint())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_checkpoint(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// On-disk tagger: named row-major parameter blocks plus the tag list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub input_dim: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub tags: Vec<String>,
    pub blocks: BTreeMap<String, ParamBlock>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("T{i}")).collect()
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = TaggerModel::zeros(3, 2, tags(4)).unwrap();
        let p = m.forward(&[vec![1.0, -2.0, 0.5]]).unwrap();
        assert_eq!(p.len(), 1);
        for v in &p[0] {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Scalar LSTM recurrence written out cell by cell.
    fn reference_direction(w: &[f64], u: &[f64], b: &[f64], xs: &[Vec<f64>], hid: usize, rev: bool) -> Vec<Vec<f64>> {
        let inp = xs[0].len();
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        let mut out = vec![vec![]; xs.len()];
        let order: Vec<usize> = if rev { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
        for t in order {
            let pre = |gate: usize, j: usize| {
                let r = gate * hid + j;
                let mut s = b[r];
                for k in 0..inp {
                    s += w[r * inp + k] * xs[t][k];
                }
                for k in 0..hid {
                    s += u[r * hid + k] * h[k];
                }
                s
            };
            let mut hn = vec![0.0; hid];
            let mut cn = vec![0.0; hid];
            for j in 0..hid {
                let i = sig(pre(0, j));
                let f = sig(pre(1, j));
                let g = pre(2, j).tanh();
                let o = sig(pre(3, j));
                cn[j] = f * c[j] + i * g;
                hn[j] = o * cn[j].tanh();
            }
            h = hn;
            c = cn;
            out[t] = h.clone();
        }
        out
    }

    #[test]
    fn tiny_model_matches_scalar_recurrence() {
        let mut m = TaggerModel::zeros(3, 2, tags(3)).unwrap();
        // hand-set values: a fixed affine pattern over the flat index
        for (i, p) in m.params.iter_mut().enumerate() {
            *p = ((i * 37 % 23) as f64 - 11.0) / 17.0;
        }
        let xs = vec![vec![0.3, -0.7, 1.1], vec![-0.4, 0.2, 0.9]];
        let blk = |name: &str| m.params[m.block(name).unwrap().range()].to_vec();
        let mut layer_in = xs.clone();
        for layer in 0..2 {
            let f = reference_direction(&blk(&format!("lstm.l{layer}.fwd.w_ih")), &blk(&format!("lstm.l{layer}.fwd.w_hh")), &blk(&format!("lstm.l{layer}.fwd.bias")), &layer_in, 2, false);
            let b = reference_direction(&blk(&format!("lstm.l{layer}.bwd.w_ih")), &blk(&format!("lstm.l{layer}.bwd.w_hh")), &blk(&format!("lstm.l{layer}.bwd.bias")), &layer_in, 2, true);
            layer_in = f.into_iter().zip(b).map(|(mut a, b)| { a.extend(b); a }).collect();
        }
        let pw = blk("proj.weight");
        let pb = blk("proj.bias");
        let got = m.forward(&xs).unwrap();
        for (t, hv) in layer_in.iter().enumerate() {
            let logits: Vec<f64> = (0..3).map(|c| pb[c] + (0..4).map(|j| hv[j] * pw[j * 3 + c]).sum::<f64>()).collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for c in 0..3 {
                assert!((got[t][c] - logits[c].exp() / z).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let m = TaggerModel::zeros(3, 2, tags(2)).unwrap();
        assert!(matches!(m.forward(&[vec![1.0]]), Err(NeuralError::DimMismatch { expected: 3, got: 1 })));
        assert!(matches!(m.forward(&[]), Err(NeuralError::EmptySequence)));
    }

    #[test]
    fn padding_does_not_change_loss() {
        let m = TaggerModel::random(3, 4, tags(3), 7, 0.5).unwrap();
        let xs = vec![vec![0.1, 0.2, 0.3], vec![-0.5, 0.4, 0.0], vec![1.0, -1.0, 0.5]];
        let tg = vec![0, 2, 1];
        let mut g1 = vec![0.0; m.params().len()];
        let l1 = m.loss_and_grad(&xs, &[true; 3], &tg, 1.0, &mut g1).unwrap();
        let mut padded = xs.clone();
        padded.extend([vec![0.0; 3], vec![0.0; 3]]);
        let mut g2 = vec![0.0; m.params().len()];
        let l2 = m.loss_and_grad(&padded, &[true, true, true, false, false], &[0, 2, 1, 0, 0], 1.0, &mut g2).unwrap();
        assert!((l1 - l2).abs() < 1e-10);
        assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = TaggerModel::random(3, 2, tags(3), 1, 0.3).unwrap();
        let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
        let back = TaggerModel::from_checkpoint(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
