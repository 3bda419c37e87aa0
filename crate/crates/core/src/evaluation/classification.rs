//! Confusion-matrix metrics with support-weighted averaging.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    /// Gold occurrences.
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub matthews: f64,
    /// The MCC denominator was zero; `matthews` is reported as 0.
    pub matthews_undefined: bool,
    pub beta: f64,
    pub averaging: String,
    /// Labels left out of the averaged precision, recall and F.
    pub excluded: Vec<String>,
    pub n: usize,
    pub per_class: Vec<ClassStats>,
}

/// Row-gold, column-predicted counts over `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn build<S: AsRef<str>>(gold: &[S], pred: &[S], extra_labels: &[String]) -> Result<Self, EvalError> {
        if gold.len() != pred.len() {
            return Err(EvalError::Length { left: gold.len(), right: pred.len() });
        }
        if gold.is_empty() {
            return Err(EvalError::Empty("label list"));
        }
        let set: BTreeSet<&str> = gold
            .iter()
            .chain(pred)
            .map(AsRef::as_ref)
            .chain(extra_labels.iter().map(String::as_str))
            .collect();
        let labels: Vec<String> = set.iter().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, usize> = set.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
        for (g, p) in gold.iter().zip(pred) {
            counts[index[g.as_ref()]][index[p.as_ref()]] += 1;
        }
        Ok(Self { labels, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn gold_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn pred_totals(&self) -> Vec<u64> {
        (0..self.labels.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Multiclass Matthews correlation in covariance form; `None` when the
    /// denominator is zero.
    pub fn matthews(&self) -> Option<f64> {
        let s = self.total() as f64;
        let c: f64 = (0..self.labels.len()).map(|k| self.counts[k][k] as f64).sum();
        let t = self.gold_totals();
        let p = self.pred_totals();
        let pt: f64 = t.iter().zip(&p).map(|(&a, &b)| a as f64 * b as f64).sum();
        let pp: f64 = p.iter().map(|&x| (x as f64).powi(2)).sum();
        let tt: f64 = t.iter().map(|&x| (x as f64).powi(2)).sum();
        let denom = ((s * s - pp) * (s * s - tt)).sqrt();
        if denom == 0.0 {
            None
        } else {
            Some(((c * s - pt) / denom).clamp(-1.0, 1.0))
        }
    }
}

fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let d = b2 * p + r;
    if d == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / d
    }
}

/// Accuracy over every item; precision, recall and F averaged over labels
/// not in `exclude`, weighted by gold support; MCC over the full matrix.
///
/// `extra_labels` adds classes that may occur in neither list, so they show
/// up in the per-class table.
pub fn classification_metrics<S: AsRef<str>>(
    gold: &[S],
    pred: &[S],
    beta: f64,
    extra_labels: &[String],
    exclude: &[String],
) -> Result<ClassificationReport, EvalError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(EvalError::Config(format!("beta must be positive, got {beta}")));
    }
    let cm = ConfusionMatrix::build(gold, pred, extra_labels)?;
    let t = cm.gold_totals();
    let p = cm.pred_totals();
    let n = cm.total();
    let correct: u64 = (0..cm.labels.len()).map(|k| cm.counts[k][k]).sum();
    let per_class: Vec<ClassStats> = cm
        .labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let tp = cm.counts[k][k] as f64;
            let precision = if p[k] == 0 { 0.0 } else { tp / p[k] as f64 };
            let recall = if t[k] == 0 { 0.0 } else { tp / t[k] as f64 };
            ClassStats {
                label: label.clone(),
                precision,
                recall,
                f_beta: f_beta(precision, recall, beta),
                support: t[k] as usize,
                predicted: p[k] as usize,
            }
        })
        .collect();
    let scored: Vec<&ClassStats> = per_class.iter().filter(|c| !exclude.contains(&c.label)).collect();
    let weight: usize = scored.iter().map(|c| c.support).sum();
    let avg = |f: fn(&ClassStats) -> f64| {
        if weight == 0 {
            0.0
        } else {
            scored.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / weight as f64
        }
    };
    let mcc = cm.matthews();
    Ok(ClassificationReport {
        accuracy: correct as f64 / n as f64,
        precision: avg(|c| c.precision),
        recall: avg(|c| c.recall),
        f_beta: avg(|c| c.f_beta),
        matthews: mcc.unwrap_or(0.0),
        matthews_undefined: mcc.is_none(),
        beta,
        averaging: "weighted".into(),
        excluded: exclude.to_vec(),
        n: n as usize,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_prediction() {
        let g = ["a", "b", "c", "a"];
        let r = classification_metrics(&g, &g, 1.0, &[], &[]).unwrap();
        for v in [r.accuracy, r.precision, r.recall, r.f_beta, r.matthews] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn complement_is_minus_one() {
        let g = ["x", "y", "x", "y"];
        let p = ["y", "x", "y", "x"];
        let r = classification_metrics(&g, &p, 1.0, &[], &[]).unwrap();
        assert_abs_diff_eq!(r.matthews, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_class_has_undefined_mcc() {
        let g = ["O", "O", "O"];
        let r = classification_metrics(&g, &g, 1.0, &[], &[]).unwrap();
        assert!(r.matthews_undefined);
        assert_eq!(r.matthews, 0.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn unpredicted_class_has_zero_precision() {
        let r = classification_metrics(&["a", "b"], &["a", "a"], 1.0, &["c".to_string()], &[]).unwrap();
        let b = r.per_class.iter().find(|c| c.label == "b").unwrap();
        assert_eq!((b.precision, b.recall, b.predicted), (0.0, 0.0, 0));
        assert!(r.per_class.iter().any(|c| c.label == "c" && c.support == 0));
    }

    #[test]
    fn excluded_label_leaves_the_average() {
        let g = ["O", "O", "B", "B"];
        let p = ["O", "B", "B", "O"];
        let r = classification_metrics(&g, &p, 1.0, &[], &["O".to_string()]).unwrap();
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn errors() {
        assert!(classification_metrics::<&str>(&[], &[], 1.0, &[], &[]).is_err());
        assert!(classification_metrics(&["a"], &["a", "b"], 1.0, &[], &[]).is_err());
        assert!(classification_metrics(&["a"], &["a"], 0.0, &[], &[]).is_err());
    }
}
