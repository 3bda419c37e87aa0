//! WordPiece: pair selection by `freq(ab) / (freq(a) * freq(b))`, encoding
//! by greedy longest match. Only the vocabulary is stored.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{
    new_subword_model, word_counts, TokenizerError, TokenizerKind, TokenizerModel,
    DEFAULT_CONTINUATION_PREFIX, DEFAULT_UNK, MIN_PAIR_FREQUENCY,
};
use crate::corpus::TokenizedCorpus;

/// Compares the scores `pair_a / (left_a * right_a)` and
/// `pair_b / (left_b * right_b)` exactly, by cross-multiplication.
pub fn pair_score_cmp(a: (u64, u64, u64), b: (u64, u64, u64)) -> Ordering {
    let lhs = a.0 as u128 * (b.1 as u128 * b.2 as u128);
    let rhs = b.0 as u128 * (a.1 as u128 * a.2 as u128);
    lhs.cmp(&rhs)
}

struct Scored<'a> {
    pair: (u32, u32),
    stats: (u64, u64, u64),
    left_str: &'a str,
    right_str: &'a str,
}

// Greater = preferred.
fn preference(a: &Scored, b: &Scored) -> Ordering {
    pair_score_cmp(a.stats, b.stats)
        .then_with(|| b.pair.0.cmp(&a.pair.0))
        .then_with(|| b.left_str.cmp(a.left_str))
        .then_with(|| b.right_str.cmp(a.right_str))
}

fn merged_string(left: &str, right: &str, prefix: &str) -> String {
    format!("{left}{}", right.strip_prefix(prefix).unwrap_or(right))
}

pub fn train_wordpiece(
    corpus: &TokenizedCorpus,
    target_vocab_size: usize,
) -> Result<TokenizerModel, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let prefix = DEFAULT_CONTINUATION_PREFIX;
    let words = word_counts(corpus);
    let initial_symbols: Vec<Vec<String>> = words
        .iter()
        .map(|(w, _)| {
            w.chars()
                .enumerate()
                .map(|(i, c)| if i == 0 { c.to_string() } else { format!("{prefix}{c}") })
                .collect()
        })
        .collect();
    let mut alphabet: Vec<String> = initial_symbols
        .iter()
        .flatten()
        .cloned()
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    alphabet.sort();
    let mut vocab = vec![DEFAULT_UNK.to_string()];
    vocab.extend(alphabet);
    if target_vocab_size < vocab.len() {
        return Err(TokenizerError::TargetTooSmall { target: target_vocab_size, base: vocab.len() });
    }
    let mut index: HashMap<String, u32> =
        vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    let mut symbols: Vec<Vec<u32>> = initial_symbols
        .iter()
        .map(|s| s.iter().map(|t| index[t]).collect())
        .collect();
    let counts: Vec<u64> = words.iter().map(|(_, c)| *c).collect();

    let mut token_freq: HashMap<u32, u64> = HashMap::new();
    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, syms) in symbols.iter().enumerate() {
        for &s in syms {
            *token_freq.entry(s).or_insert(0) += counts[wi];
        }
        for p in syms.windows(2) {
            *pair_counts.entry((p[0], p[1])).or_insert(0) += counts[wi];
            pair_words.entry((p[0], p[1])).or_default().insert(wi);
        }
    }

    while vocab.len() < target_vocab_size {
        let best = pair_counts
            .par_iter()
            .filter(|(_, &c)| c >= MIN_PAIR_FREQUENCY)
            .map(|(&pair, &c)| Scored {
                pair,
                stats: (c, token_freq[&pair.0], token_freq[&pair.1]),
                left_str: &vocab[pair.0 as usize],
                right_str: &vocab[pair.1 as usize],
            })
            .max_by(preference)
            .map(|s| (s.pair, merged_string(s.left_str, s.right_str, prefix)));
        let Some((pair, merged_str)) = best else { break };
        let merged = match index.get(&merged_str) {
            Some(&id) => id,
            None => {
                let id = vocab.len() as u32;
                vocab.push(merged_str.clone());
                index.insert(merged_str, id);
                id
            }
        };

        let mut affected: Vec<usize> =
            pair_words.remove(&pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for wi in affected {
            let old = std::mem::take(&mut symbols[wi]);
            let c = counts[wi];
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && (old[i], old[i + 1]) == pair {
                    new.push(merged);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            for &s in &old {
                *token_freq.get_mut(&s).expect("counted") -= c;
            }
            for &s in &new {
                *token_freq.entry(s).or_insert(0) += c;
            }
            for p in old.windows(2) {
                let e = pair_counts.get_mut(&(p[0], p[1])).expect("counted");
                *e -= c;
                if *e == 0 {
                    pair_counts.remove(&(p[0], p[1]));
                }
            }
            for p in new.windows(2) {
                *pair_counts.entry((p[0], p[1])).or_insert(0) += c;
                pair_words.entry((p[0], p[1])).or_default().insert(wi);
            }
            symbols[wi] = new;
        }
    }
    new_subword_model(TokenizerKind::WordPiece, vocab, Vec::new(), Vec::new(), target_vocab_size)
}

/// Greedy longest-match-first segmentation. A word with any unmatchable
/// position becomes a single unk piece.
pub(crate) fn encode_word(model: &TokenizerModel, word: &str) -> Vec<(String, u32)> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let prefix = model.continuation_prefix();
    let mut out = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut end = chars.len().min(start + model.max_piece_chars);
        let mut found = None;
        while end > start {
            let lo = chars[start].0;
            let hi = chars.get(end).map_or(word.len(), |c| c.0);
            candidate.clear();
            if start > 0 {
                candidate.push_str(prefix);
            }
            candidate.push_str(&word[lo..hi]);
            if let Some(id) = model.token_to_id(&candidate) {
                found = Some((candidate.clone(), id));
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => {
                out.push(piece);
                start = end;
            }
            None => {
                let unk = model.unk_id().expect("subword models carry unk");
                return vec![(model.unk_token().to_string(), unk)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(words: &[(&str, usize)]) -> TokenizedCorpus {
        let mut s = Vec::new();
        for (w, n) in words {
            s.extend(std::iter::repeat_n(w.to_string(), *n));
        }
        TokenizedCorpus::from_sentences(vec![s])
    }

    #[test]
    fn score_prefers_rare_constituents() {
        // freq(ab)=4, freq(a)=8, freq(b)=4 vs freq(cd)=3, freq(c)=3, freq(d)=3
        let ab = (4, 8, 4);
        let cd = (3, 3, 3);
        // hand-computed: 4/32 = 0.125, 3/9 = 0.333...
        assert!(4.0 / 32.0 < 3.0 / 9.0);
        assert_eq!(pair_score_cmp(cd, ab), Ordering::Greater);

        let c = corpus(&[("ab", 4), ("a", 4), ("cd", 3)]);
        let m = train_wordpiece(&c, 6).unwrap();
        assert_eq!(m.vocab().last().unwrap(), "cd");
    }

    #[test]
    fn single_pair_corpus_matches_bpe_first_merge() {
        let c = corpus(&[("xy", 3)]);
        let wp = train_wordpiece(&c, 4).unwrap();
        let bpe = super::super::train_bpe(&c, 5).unwrap();
        assert_eq!(wp.vocab().last().unwrap(), "xy");
        assert_eq!(bpe.merges()[0], ("x".to_string(), "y".to_string()));
    }

    #[test]
    fn forced_and_unmatchable_segmentation() {
        let m = TokenizerModel::wordpiece_from_vocab(["h".into(), "##i".into()]).unwrap();
        assert_eq!(m.pieces("hi"), vec!["h", "##i"]);
        assert_eq!(m.pieces("hz"), vec!["<unk>"]);
        let e = m.encode(&["hi", "hz"]);
        assert_eq!(m.decode(&e).unwrap(), vec!["hi", "<unk>"]);
    }

    #[test]
    fn whole_words_in_vocab_are_single_pieces() {
        let c = corpus(&[("low", 6), ("lower", 3), ("lowest", 2)]);
        let m = train_wordpiece(&c, 40).unwrap();
        for w in ["low", "lower", "lowest"] {
            if m.token_to_id(w).is_some() {
                assert_eq!(m.pieces(w), vec![w.to_string()]);
            }
            assert_eq!(m.decode(&m.encode(&[w])).unwrap(), vec![w]);
        }
    }
}
