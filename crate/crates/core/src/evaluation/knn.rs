//! Exhaustive k-nearest-neighbour classification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::correlation::cosine;
use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    /// `1 - cos`; an undefined cosine (zero vector) counts as distance 1.
    #[default]
    Cosine,
    Euclidean,
}

impl std::str::FromStr for Distance {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "euclidean" => Ok(Self::Euclidean),
            _ => Err(EvalError::Config(format!("unknown distance {s:?}"))),
        }
    }
}

impl Distance {
    pub fn between(self, a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
        match self {
            Self::Cosine => {
                let c = cosine(a, b)?;
                Ok(if c.is_nan() { 1.0 } else { 1.0 - c })
            }
            Self::Euclidean => {
                if a.len() != b.len() {
                    return Err(EvalError::Length { left: a.len(), right: b.len() });
                }
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
        }
    }
}

/// Labels each query by majority vote of its `k` nearest training points.
/// Distance ties go to the lower training index. Among labels tied on
/// votes, the one held by the nearest neighbour wins.
pub fn knn_predict<L: AsRef<str>>(
    train: &[Vec<f64>],
    labels: &[L],
    queries: &[Vec<f64>],
    k: usize,
    distance: Distance,
) -> Result<Vec<String>, EvalError> {
    if train.len() != labels.len() {
        return Err(EvalError::Length { left: train.len(), right: labels.len() });
    }
    if k == 0 {
        return Err(EvalError::Config("k must be at least 1".into()));
    }
    if train.len() < k {
        return Err(EvalError::TooFewTraining { k, n: train.len() });
    }
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let mut d: Vec<(f64, usize)> =
            train.iter().enumerate().map(|(i, t)| Ok((distance.between(q, t)?, i))).collect::<Result<_, EvalError>>()?;
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &d[..k];
        let mut votes: HashMap<&str, usize> = HashMap::new();
        for &(_, i) in nearest {
            *votes.entry(labels[i].as_ref()).or_insert(0) += 1;
        }
        let best = *votes.values().max().expect("k >= 1");
        let winner = nearest
            .iter()
            .map(|&(_, i)| labels[i].as_ref())
            .find(|l| votes[l] == best)
            .expect("some neighbour holds the top vote");
        out.push(winner.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_query_with_three_copies() {
        let train = vec![vec![1.0, 0.0]; 3].into_iter().chain([vec![0.0, 1.0], vec![0.1, 1.0]]).collect::<Vec<_>>();
        let labels = ["a", "a", "a", "b", "b"];
        assert_eq!(knn_predict(&train, &labels, &[vec![1.0, 0.0]], 3, Distance::Cosine).unwrap(), ["a"]);
    }

    #[test]
    fn three_way_tie_goes_to_nearest() {
        let train = vec![vec![1.0, 0.1], vec![1.0, 0.0], vec![1.0, 0.3]];
        let labels = ["x", "y", "z"];
        assert_eq!(knn_predict(&train, &labels, &[vec![1.0, 0.0]], 3, Distance::Cosine).unwrap(), ["y"]);
    }

    #[test]
    fn zero_vector_is_far_from_everything() {
        assert_eq!(Distance::Cosine.between(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn too_few_training_points() {
        let err = knn_predict(&[vec![1.0]], &["a"], &[vec![1.0]], 3, Distance::Cosine).unwrap_err();
        assert!(matches!(err, EvalError::TooFewTraining { k: 3, n: 1 }));
    }
}
