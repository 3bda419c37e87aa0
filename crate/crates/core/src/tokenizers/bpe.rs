//! Byte-pair encoding over characters with an end-of-word marker.
//!
//! The trainer keeps incremental pair counts and a lazily refreshed max-heap.
//! Pair selection order is `(count desc, left token id asc, left string,
//! right string)`, and only pairs seen at least [`MIN_PAIR_FREQUENCY`] times
//! are merged.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::{
    new_subword_model, word_counts, TokenizerError, TokenizerKind, TokenizerModel, DEFAULT_UNK,
    MIN_PAIR_FREQUENCY,
};
use crate::corpus::TokenizedCorpus;

/// Appended to every word before training and encoding.
pub const END_OF_WORD: &str = "</w>";

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: u32,
    right: u32,
    left_str: String,
    right_str: String,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum: larger count wins, then the smaller
        // left id, then the lexicographically smaller pair.
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.left_str.cmp(&self.left_str))
            .then_with(|| other.right_str.cmp(&self.right_str))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn merge_symbols(symbols: &[u32], pair: (u32, u32), merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(merged);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    out
}

/// Trains a BPE model up to `target_vocab_size` entries (unk included).
pub fn train_bpe(
    corpus: &TokenizedCorpus,
    target_vocab_size: usize,
) -> Result<TokenizerModel, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let words = word_counts(corpus);
    let mut alphabet: Vec<String> = words
        .iter()
        .flat_map(|(w, _)| w.chars())
        .collect::<HashSet<char>>()
        .into_iter()
        .map(String::from)
        .collect();
    alphabet.sort();

    let mut vocab = vec![DEFAULT_UNK.to_string()];
    vocab.extend(alphabet);
    vocab.push(END_OF_WORD.to_string());
    if target_vocab_size < vocab.len() {
        return Err(TokenizerError::TargetTooSmall { target: target_vocab_size, base: vocab.len() });
    }
    let mut index: HashMap<String, u32> =
        vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    let eow = index[END_OF_WORD];

    let mut symbols: Vec<Vec<u32>> = words
        .iter()
        .map(|(w, _)| w.chars().map(|c| index[c.to_string().as_str()]).chain([eow]).collect())
        .collect();
    let counts: Vec<u64> = words.iter().map(|(_, c)| *c).collect();

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, syms) in symbols.iter().enumerate() {
        for p in syms.windows(2) {
            *pair_counts.entry((p[0], p[1])).or_insert(0) += counts[wi];
            pair_words.entry((p[0], p[1])).or_default().insert(wi);
        }
    }
    let candidate = |vocab: &[String], (l, r): (u32, u32), count: u64| Candidate {
        count,
        left: l,
        right: r,
        left_str: vocab[l as usize].clone(),
        right_str: vocab[r as usize].clone(),
    };
    let mut heap: BinaryHeap<Candidate> =
        pair_counts.iter().map(|(&p, &c)| candidate(&vocab, p, c)).collect();

    let mut merges = Vec::new();
    while vocab.len() < target_vocab_size {
        let Some(top) = heap.pop() else { break };
        let pair = (top.left, top.right);
        let current = pair_counts.get(&pair).copied().unwrap_or(0);
        if current != top.count {
            if current > 0 {
                heap.push(candidate(&vocab, pair, current));
            }
            continue;
        }
        if current < MIN_PAIR_FREQUENCY {
            break;
        }
        let merged_str = format!("{}{}", top.left_str, top.right_str);
        let merged = match index.get(&merged_str) {
            Some(&id) => id,
            None => {
                let id = vocab.len() as u32;
                vocab.push(merged_str.clone());
                index.insert(merged_str, id);
                id
            }
        };
        merges.push((top.left_str, top.right_str));

        let mut delta: HashMap<(u32, u32), i64> = HashMap::new();
        let mut affected: Vec<usize> =
            pair_words.remove(&pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for wi in affected {
            let old = &symbols[wi];
            let new = merge_symbols(old, pair, merged);
            if new.len() == old.len() {
                continue;
            }
            let c = counts[wi] as i64;
            for p in old.windows(2) {
                *delta.entry((p[0], p[1])).or_insert(0) -= c;
            }
            for p in new.windows(2) {
                *delta.entry((p[0], p[1])).or_insert(0) += c;
                pair_words.entry((p[0], p[1])).or_default().insert(wi);
            }
            symbols[wi] = new;
        }
        let mut changed: Vec<_> = delta.into_iter().filter(|(_, d)| *d != 0).collect();
        changed.sort_unstable();
        for (p, d) in changed {
            let entry = pair_counts.entry(p).or_insert(0);
            *entry = (*entry as i64 + d) as u64;
            if d > 0 {
                heap.push(candidate(&vocab, p, *entry));
            }
            if *entry == 0 {
                pair_counts.remove(&p);
            }
        }
    }
    new_subword_model(TokenizerKind::Bpe, vocab, merges, Vec::new(), target_vocab_size)
}

/// Applies the learned merges to one word, lowest rank first. Characters
/// outside the alphabet become the unk piece.
pub(crate) fn encode_word(model: &TokenizerModel, word: &str) -> Vec<(String, u32)> {
    let unk = model.unk_id().expect("subword models carry unk");
    let mut symbols: Vec<u32> = word
        .chars()
        .map(|c| {
            let mut buf = [0u8; 4];
            model.token_to_id(c.encode_utf8(&mut buf)).unwrap_or(unk)
        })
        .collect();
    symbols.push(model.token_to_id(END_OF_WORD).unwrap_or(unk));
    loop {
        let best = symbols
            .windows(2)
            .filter_map(|p| model.merge_table.get(&(p[0], p[1])).map(|&(rank, id)| (rank, (p[0], p[1]), id)))
            .min_by_key(|(rank, _, _)| *rank);
        let Some((_, pair, merged)) = best else { break };
        symbols = merge_symbols(&symbols, pair, merged);
    }
    symbols
        .into_iter()
        .map(|id| (model.vocab[id as usize].clone(), id))
        .collect()
}
