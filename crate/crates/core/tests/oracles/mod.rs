//! Slow reference implementations used as test oracles. Each one is written
//! from the definition, without sharing code with the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn drop_nan(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    xs.iter().zip(ys).filter(|(x, y)| !x.is_nan() && !y.is_nan()).map(|(a, b)| (*a, *b)).unzip()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Rank of each value: 1 + number strictly smaller + half the other ties.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&ranks(xs), &ranks(ys))
}

/// Tau-b by pairwise concordance counting.
pub fn kendall(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let (mut s, mut tx, mut ty, mut pairs) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            let dx = (xs[i] - xs[j]).partial_cmp(&0.0).unwrap() as i64;
            let dy = (ys[i] - ys[j]).partial_cmp(&0.0).unwrap() as i64;
            s += dx * dy;
            tx += (dx == 0) as i64;
            ty += (dy == 0) as i64;
        }
    }
    s as f64 / (((pairs - tx) * (pairs - ty)) as f64).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// 200 distinct syllable words with counts in 1..=30.
pub fn word_fixture() -> Vec<(String, u64)> {
    const SYL: [&str; 12] = ["ka", "ri", "to", "me", "an", "lo", "sen", "ti", "ba", "ru", "qu", "ex"];
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut words = BTreeMap::new();
    while words.len() < 200 {
        let w: String = (0..rng.random_range(1..=4)).map(|_| SYL[rng.random_range(0..SYL.len())]).collect();
        let c = rng.random_range(1..=30u64);
        words.entry(w).or_insert(c);
    }
    words.into_iter().collect()
}

/// One sentence per word, the word repeated `count` times.
pub fn fixture_sentences(words: &[(String, u64)]) -> Vec<Vec<String>> {
    words.iter().map(|(w, c)| vec![w.clone(); *c as usize]).collect()
}

fn merge_all(seq: &[String], l: &str, r: &str, merged: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == l && seq[i + 1] == r {
            out.push(merged.to_string());
            i += 2;
        } else {
            out.push(seq[i].clone());
            i += 1;
        }
    }
    out
}

fn pair_counts(words: &[(Vec<String>, u64)]) -> HashMap<(String, String), u64> {
    let mut counts = HashMap::new();
    for (seq, c) in words {
        for p in seq.windows(2) {
            *counts.entry((p[0].clone(), p[1].clone())).or_insert(0) += c;
        }
    }
    counts
}

/// Greedy BPE recomputing every pair count from scratch each step.
/// Selection: highest count, then lowest left id, then left and right
/// strings ascending. Returns `(vocab, merges)`.
pub fn bpe(words: &[(String, u64)], target: usize) -> (Vec<String>, Vec<(String, String)>) {
    let mut chars: Vec<String> = words.iter().flat_map(|(w, _)| w.chars().map(String::from)).collect();
    chars.sort();
    chars.dedup();
    let mut vocab = vec!["<unk>".to_string()];
    vocab.extend(chars);
    vocab.push("</w>".into());
    let mut seqs: Vec<(Vec<String>, u64)> = words
        .iter()
        .map(|(w, c)| (w.chars().map(String::from).chain(["</w>".to_string()]).collect(), *c))
        .collect();
    let mut merges = Vec::new();
    while vocab.len() < target {
        let id = |s: &str| vocab.iter().position(|v| v == s).unwrap();
        let best = pair_counts(&seqs)
            .into_iter()
            .filter(|(_, c)| *c >= 2)
            .max_by(|a, b| {
                a.1.cmp(&b.1)
                    .then(id(&b.0 .0).cmp(&id(&a.0 .0)))
                    .then(b.0 .0.cmp(&a.0 .0))
                    .then(b.0 .1.cmp(&a.0 .1))
            });
        let Some(((l, r), _)) = best else { break };
        let merged = format!("{l}{r}");
        if !vocab.contains(&merged) {
            vocab.push(merged.clone());
        }
        for (seq, _) in seqs.iter_mut() {
            *seq = merge_all(seq, &l, &r, &merged);
        }
        merges.push((l, r));
    }
    (vocab, merges)
}

/// WordPiece pair selection by exact rational score
/// `count(ab) / (count(a) * count(b))`, recomputed from scratch each step.
pub fn wordpiece(words: &[(String, u64)], target: usize) -> Vec<String> {
    let mut seqs: Vec<(Vec<String>, u64)> = words
        .iter()
        .map(|(w, c)| {
            (w.chars().enumerate().map(|(i, ch)| if i == 0 { ch.to_string() } else { format!("##{ch}") }).collect(), *c)
        })
        .collect();
    let mut base: Vec<String> = seqs.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    base.sort();
    base.dedup();
    let mut vocab = vec!["<unk>".to_string()];
    vocab.extend(base);
    while vocab.len() < target {
        let mut freq: HashMap<String, u64> = HashMap::new();
        for (seq, c) in &seqs {
            for s in seq {
                *freq.entry(s.clone()).or_insert(0) += c;
            }
        }
        let id = |s: &str| vocab.iter().position(|v| v == s).unwrap();
        // a/b > c/d  <=>  a*d > c*b
        let best = pair_counts(&seqs).into_iter().filter(|(_, c)| *c >= 2).max_by(|a, b| {
            let sa = (a.1 as u128, freq[&a.0 .0] as u128 * freq[&a.0 .1] as u128);
            let sb = (b.1 as u128, freq[&b.0 .0] as u128 * freq[&b.0 .1] as u128);
            (sa.0 * sb.1)
                .cmp(&(sb.0 * sa.1))
                .then(id(&b.0 .0).cmp(&id(&a.0 .0)))
                .then(b.0 .0.cmp(&a.0 .0))
                .then(b.0 .1.cmp(&a.0 .1))
        });
        let Some(((l, r), _)) = best else { break };
        let merged = format!("{l}{}", r.strip_prefix("##").unwrap_or(&r));
        if !vocab.contains(&merged) {
            vocab.push(merged.clone());
        }
        for (seq, _) in seqs.iter_mut() {
            *seq = merge_all(seq, &l, &r, &merged);
        }
    }
    vocab
}

/// Best-segmentation log-likelihood of the weighted words, by a forward
/// dynamic program over every substring.
pub fn viterbi_ll(words: &[(String, u64)], logprob: &HashMap<String, f64>) -> f64 {
    words
        .iter()
        .map(|(w, c)| {
            let chars: Vec<char> = w.chars().collect();
            let mut best = vec![f64::NEG_INFINITY; chars.len() + 1];
            best[0] = 0.0;
            for end in 1..=chars.len() {
                for start in 0..end {
                    let piece: String = chars[start..end].iter().collect();
                    if let Some(lp) = logprob.get(&piece) {
                        best[end] = best[end].max(best[start] + lp);
                    }
                }
            }
            best[chars.len()] * *c as f64
        })
        .sum()
}
