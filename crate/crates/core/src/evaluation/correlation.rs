//! Cosine similarity and the three correlation coefficients.
//!
//! Every coefficient first drops pairs where either value is NaN. The result
//! is `None` when fewer than two pairs survive or one side is constant.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Cosine of the angle between `u` and `v`, clamped to [-1, 1]. NaN when
/// either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EvalError> {
    if u.len() != v.len() {
        return Err(EvalError::Length { left: u.len(), right: v.len() });
    }
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Ok(f64::NAN);
    }
    Ok((uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

fn finite_pairs(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::Length { left: xs.len(), right: ys.len() });
    }
    Ok(xs.iter().zip(ys).filter(|(x, y)| !x.is_nan() && !y.is_nan()).map(|(&x, &y)| (x, y)).unzip())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn pearson_clean(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || is_constant(xs) || is_constant(ys) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, EvalError> {
    let (xs, ys) = finite_pairs(xs, ys)?;
    Ok(pearson_clean(&xs, &ys))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        idx[i..=j].iter().for_each(|&k| ranks[k] = r);
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, EvalError> {
    let (xs, ys) = finite_pairs(xs, ys)?;
    Ok(pearson_clean(&average_ranks(&xs), &average_ranks(&ys)))
}

/// Pairs `(i, j)` with equal values in each maximal run of a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort that returns the number of inversions.
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid]) + sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, EvalError> {
    let (xs, ys) = finite_pairs(xs, ys)?;
    let n = xs.len() as u64;
    if n < 2 || is_constant(&xs) || is_constant(&ys) {
        return Ok(None);
    }
    let mut pairs: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let x_ties = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let joint_ties = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let y_ties = tied_pairs(&ys);
    let numer = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - x_ties) as f64 * (n0 - y_ties) as f64).sqrt();
    Ok(Some((numer / denom).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSplit {
    InVocab,
    Oov,
    Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub split: PairSplit,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
    pub spearman: Option<f64>,
    pub n_total: usize,
    pub n_oov: usize,
    /// Pairs with a defined model similarity.
    pub n_used: usize,
}

impl CorrelationReport {
    /// `model` may contain NaN for pairs without a usable similarity.
    pub fn compute(split: PairSplit, human: &[f64], model: &[f64], n_oov: usize) -> Result<Self, EvalError> {
        let n_used = human.iter().zip(model).filter(|(h, m)| !h.is_nan() && !m.is_nan()).count();
        Ok(Self {
            split,
            pearson: pearson(human, model)?,
            kendall: kendall(human, model)?,
            spearman: spearman(human, model)?,
            n_total: human.len(),
            n_oov,
            n_used,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_closed_forms() {
        assert_abs_diff_eq!(cosine(&[3.0, -1.0], &[3.0, -1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap().is_nan());
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn perfect_line() {
        let (x, y) = ([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]);
        assert_abs_diff_eq!(pearson(&x, &y).unwrap().unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(spearman(&x, &y).unwrap(), Some(1.0));
        assert_eq!(kendall(&x, &y).unwrap(), Some(1.0));
    }

    #[test]
    fn nan_pairs_are_dropped() {
        let r = pearson(&[1.0, 2.0, f64::NAN], &[2.0, 4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(r.unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(pearson(&[1.0, f64::NAN], &[1.0, 2.0]).unwrap(), None);
    }

    #[test]
    fn constant_side_is_undefined() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[0.1, 0.1, 0.1]).unwrap(), None);
        assert_eq!(kendall(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), None);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn kendall_known_value() {
        // 2 concordant, 4 discordant, no ties.
        let t = kendall(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 0.5]).unwrap().unwrap();
        assert_abs_diff_eq!(t, (2.0 - 4.0) / 6.0, epsilon = 1e-15);
    }
}
