//! Negative-sampling update kernel shared by CBOW, Skipgram and FastText.
//!
//! For an input vector `h`, an output row `o` and a label `y ∈ {0, 1}` the
//! per-example loss is `-log σ(h·o)` when `y = 1` and `-log σ(-h·o)` when
//! `y = 0`. [`sgns_update`] accumulates `-lr · ∂L/∂h` into `grad_input` and
//! adds `-lr · ∂L/∂o` to `o` in place, reading `o` before modifying it.

use num_traits::Float;

pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus<F: Float>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Applies one positive (`label = true`) or negative example and returns its
/// loss.
pub fn sgns_update<F: Float>(
    input: &[F],
    output: &mut [F],
    label: bool,
    lr: F,
    grad_input: &mut [F],
) -> F {
    let score = dot(input, output);
    let y = if label { F::one() } else { F::zero() };
    let g = (y - sigmoid(score)) * lr;
    for (gi, &o) in grad_input.iter_mut().zip(output.iter()) {
        *gi = *gi + g * o;
    }
    for (o, &h) in output.iter_mut().zip(input) {
        *o = *o + g * h;
    }
    if label {
        softplus(-score)
    } else {
        softplus(score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert!((sigmoid(800.0f64) - 1.0).abs() < 1e-15);
        assert!(softplus(800.0f64).is_finite());
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_leaves_output_untouched() {
        let h = [0.1f32, -0.2, 0.3];
        let mut o = [0.5f32, 0.5, 0.5];
        let mut g = [0.0f32; 3];
        sgns_update(&h, &mut o, true, 0.0, &mut g);
        assert_eq!(o, [0.5, 0.5, 0.5]);
        assert_eq!(g, [0.0; 3]);
    }
}
