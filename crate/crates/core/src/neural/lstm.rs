//! One direction of one LSTM layer, with the cache needed for backprop.
//!
//! Gate order inside the stacked `4H` pre-activation is input, forget, cell,
//! output. Masked timesteps carry the previous state through unchanged and
//! emit a zero output.

use crate::embeddings::sgns::sigmoid;

pub(crate) struct Weights<'a> {
    pub w_ih: &'a [f64],
    pub w_hh: &'a [f64],
    pub bias: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

pub(crate) struct Grads<'a> {
    pub w_ih: &'a mut [f64],
    pub w_hh: &'a mut [f64],
    pub bias: &'a mut [f64],
}

struct Step {
    t: usize,
    /// Activated gates `[i, f, g, o]`, `4H` values.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
}

pub(crate) struct Trace {
    steps: Vec<Step>,
}

fn matvec_acc(m: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Runs the recurrence over `xs` (forward, or right-to-left when `reverse`).
pub(crate) fn run(wt: &Weights, xs: &[Vec<f64>], mask: &[bool], reverse: bool) -> (Vec<Vec<f64>>, Trace) {
    let h = wt.hidden;
    let n = xs.len();
    let mut outputs = vec![vec![0.0; h]; n];
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut steps = Vec::with_capacity(n);
    let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..n).rev()) } else { Box::new(0..n) };
    for t in order {
        if !mask[t] {
            continue;
        }
        let mut z = wt.bias.to_vec();
        matvec_acc(wt.w_ih, wt.input, &xs[t], &mut z);
        matvec_acc(wt.w_hh, h, &h_prev, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        for j in 0..h {
            c[j] = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
            tanh_c[j] = c[j].tanh();
            h_new[j] = z[3 * h + j] * tanh_c[j];
        }
        outputs[t].copy_from_slice(&h_new);
        steps.push(Step { t, gates: z, tanh_c, h_prev: std::mem::replace(&mut h_prev, h_new), c_prev: std::mem::replace(&mut c_prev, c) });
    }
    (outputs, Trace { steps })
}

/// Backpropagates `d_out` (gradient w.r.t. each output) through a trace,
/// accumulating into `grads` and returning the gradient w.r.t. each input.
pub(crate) fn backprop(wt: &Weights, xs: &[Vec<f64>], trace: &Trace, d_out: &[Vec<f64>], grads: &mut Grads) -> Vec<Vec<f64>> {
    let h = wt.hidden;
    let mut dx = vec![vec![0.0; wt.input]; xs.len()];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for step in trace.steps.iter().rev() {
        let g = &step.gates;
        for j in 0..h {
            let dh = d_out[step.t][j] + dh_next[j];
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = step.tanh_c[j];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * gg * i * (1.0 - i);
            dz[h + j] = dc * step.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - gg * gg);
            dz[3 * h + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let x = &xs[step.t];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grads.bias[r] += d;
            let wi = &wt.w_ih[r * wt.input..(r + 1) * wt.input];
            let gi = &mut grads.w_ih[r * wt.input..(r + 1) * wt.input];
            for ((gw, &xv), (dxv, &w)) in gi.iter_mut().zip(x).zip(dx[step.t].iter_mut().zip(wi)) {
                *gw += d * xv;
                *dxv += d * w;
            }
            let wh = &wt.w_hh[r * h..(r + 1) * h];
            let gh = &mut grads.w_hh[r * h..(r + 1) * h];
            for ((gw, &hp), (dhn, &w)) in gh.iter_mut().zip(&step.h_prev).zip(dh_next.iter_mut().zip(wh)) {
                *gw += d * hp;
                *dhn += d * w;
            }
        }
    }
    dx
}
