//! Central-difference verification of the tagger's analytic gradient.

use super::model::{TaggedSequence, TaggerModel};
use super::NeuralError;

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckScope {
    /// Projection weight and bias only.
    Projection,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub max_rel_error: f64,
    /// Parameter index where the maximum occurred.
    pub worst: usize,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn mean_loss(model: &TaggerModel, s: &TaggedSequence) -> Result<f64, NeuralError> {
    let mut sink = vec![0.0; model.params().len()];
    let n = s.tags.len() as f64;
    Ok(model.loss_and_grad(&s.inputs, &vec![true; s.inputs.len()], &s.tags, 1.0 / n, &mut sink)? / n)
}

/// Compares the analytic gradient of the mean token cross-entropy against
/// central differences. `fault` doubles one analytic component first, to
/// confirm the check can fail.
pub fn gradient_check(
    model: &TaggerModel,
    sample: &TaggedSequence,
    scope: CheckScope,
    fault: Option<usize>,
) -> Result<CheckResult, NeuralError> {
    let n = sample.tags.len() as f64;
    let mut grad = vec![0.0; model.params().len()];
    model.loss_and_grad(&sample.inputs, &vec![true; sample.inputs.len()], &sample.tags, 1.0 / n, &mut grad)?;
    if let Some(i) = fault {
        grad[i] *= 2.0;
    }
    let range = match scope {
        CheckScope::Projection => model.projection_range(),
        CheckScope::All => 0..model.params().len(),
    };
    let mut probe = model.clone();
    let mut result = CheckResult { max_rel_error: 0.0, worst: range.start, checked: 0 };
    for i in range {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + STEP;
        let up = mean_loss(&probe, sample)?;
        probe.params_mut()[i] = orig - STEP;
        let down = mean_loss(&probe, sample)?;
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let err = relative_error(grad[i], numeric);
        if err > result.max_rel_error {
            result.max_rel_error = err;
            result.worst = i;
        }
        result.checked += 1;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Every projection gradient here exceeds 1e-3, well above the ~1e-11
    // rounding noise of the difference quotient at h = 1e-5.
    fn sample() -> (TaggerModel, TaggedSequence) {
        let tags = vec!["O".to_string(), "A".to_string(), "B".to_string()];
        let m = TaggerModel::random(3, 2, tags, 5, 1.0).unwrap();
        let s = TaggedSequence { inputs: vec![vec![0.9, -0.6, 1.2], vec![-1.1, 0.8, 0.4]], tags: vec![1, 2] };
        (m, s)
    }

    #[test]
    fn projection_gradient_is_exact() {
        let (m, s) = sample();
        let r = gradient_check(&m, &s, CheckScope::Projection, None).unwrap();
        assert!(r.max_rel_error <= 1e-8, "{r:?}");
    }

    #[test]
    fn full_gradient_matches() {
        let (m, s) = sample();
        let r = gradient_check(&m, &s, CheckScope::All, None).unwrap();
        assert_eq!(r.checked, m.params().len());
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn planted_fault_is_detected() {
        let (m, s) = sample();
        let r = gradient_check(&m, &s, CheckScope::All, Some(5)).unwrap();
        assert!(r.max_rel_error > 1e-2, "{r:?}");
    }
}
