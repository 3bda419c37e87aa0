//! Seeded train/test partitions for datasets that ship without one.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn test_count(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Shuffles `0..n` with `seed` and holds out `fraction` of it. Both index
/// lists come back sorted.
pub fn holdout(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(n - test_count(n, fraction));
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}

/// Like [`holdout`], but each label contributes its own share to the test
/// side. A label with a single item stays in training.
pub fn stratified_holdout<L: AsRef<str>>(labels: &[L], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_ref()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut idx in groups.into_values() {
        idx.shuffle(&mut rng);
        let cut = idx.len() - test_count(idx.len(), fraction);
        test.extend_from_slice(&idx[cut..]);
        train.extend_from_slice(&idx[..cut]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
