//! Unigram language-model tokenizer.
//!
//! Training starts from every substring (up to [`MAX_PIECE_CHARS`]) seen at
//! least twice, then alternates hard EM (Viterbi E-step, maximum-likelihood
//! M-step) with pruning of the 20% of multi-character pieces whose removal
//! costs the least likelihood. Single characters are never pruned.
//!
//! Within a round the M-step is the exact maximum-likelihood estimate for the
//! current segmentation, so the Viterbi log-likelihood never decreases from
//! one E-step to the next. A character whose count drops to zero is kept
//! dormant (probability zero) until the end of the round, then revived with
//! a half-count before the distribution is renormalized.

use std::collections::{HashMap, HashSet};

use super::{
    new_subword_model, word_counts, TokenizerError, TokenizerKind, TokenizerModel, DEFAULT_UNK,
};
use crate::corpus::TokenizedCorpus;

pub const MAX_PIECE_CHARS: usize = 8;
pub const SEED_FACTOR: usize = 10;
pub const PRUNE_FRACTION: f64 = 0.2;
pub const EM_ITERATIONS: usize = 2;
/// Penalty below the least likely piece for characters outside the alphabet.
const UNK_PENALTY: f64 = 10.0;
const REVIVE_COUNT: f64 = 0.5;

/// One E-step of training: the corpus log-likelihood under `pieces`.
#[derive(Debug, Clone)]
pub struct EmStep {
    pub round: usize,
    pub iteration: usize,
    pub log_likelihood: f64,
    pub pieces: HashMap<String, f64>,
}

/// Per-E-step record of a training run.
#[derive(Debug, Clone, Default)]
pub struct UnigramTrace {
    pub steps: Vec<EmStep>,
}

impl UnigramTrace {
    /// Last E-step of every round.
    pub fn round_ends(&self) -> Vec<&EmStep> {
        let mut out: Vec<&EmStep> = Vec::new();
        for s in &self.steps {
            match out.last() {
                Some(last) if last.round == s.round => *out.last_mut().unwrap() = s,
                _ => out.push(s),
            }
        }
        out
    }
}

/// Best segmentation of `chars` under `logprob`, as `(score, piece ends)`.
/// Returns `None` when some position cannot be covered.
fn viterbi(
    chars: &[char],
    max_len: usize,
    mut logprob: impl FnMut(&str, usize) -> Option<f64>,
) -> Option<(f64, Vec<usize>)> {
    let n = chars.len();
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = 0.0;
    let mut buf = String::new();
    for end in 1..=n {
        for len in 1..=max_len.min(end) {
            let start = end - len;
            if best[start] == f64::NEG_INFINITY {
                continue;
            }
            buf.clear();
            buf.extend(&chars[start..end]);
            if let Some(lp) = logprob(&buf, len) {
                let score = best[start] + lp;
                if score > best[end] {
                    best[end] = score;
                    back[end] = start;
                }
            }
        }
    }
    if best[n] == f64::NEG_INFINITY {
        return None;
    }
    let mut ends = Vec::new();
    let mut pos = n;
    while pos > 0 {
        ends.push(pos);
        pos = back[pos];
    }
    ends.reverse();
    Some((best[n], ends))
}

/// Total Viterbi log-likelihood of the corpus words under `pieces`, or
/// `None` if some word cannot be segmented.
pub fn viterbi_log_likelihood(
    words: &[(&str, u64)],
    pieces: &HashMap<String, f64>,
) -> Option<f64> {
    let max_len = pieces.keys().map(|p| p.chars().count()).max().unwrap_or(1);
    let mut total = 0.0;
    for (w, c) in words {
        let chars: Vec<char> = w.chars().collect();
        let (score, _) = viterbi(&chars, max_len, |s, _| pieces.get(s).copied())?;
        total += score * *c as f64;
    }
    Some(total)
}

struct Trainer<'a> {
    words: Vec<(Vec<char>, u64)>,
    alphabet: HashSet<String>,
    /// log-probabilities; dormant characters hold `-inf`
    logprobs: HashMap<String, f64>,
    trace: Option<&'a mut UnigramTrace>,
}

impl Trainer<'_> {
    fn max_len(&self) -> usize {
        self.logprobs.keys().map(|p| p.chars().count()).max().unwrap_or(1)
    }

    /// Returns (log-likelihood, piece counts, per-word segmentation).
    fn e_step(&self) -> (f64, HashMap<String, f64>, Vec<Vec<String>>) {
        let max_len = self.max_len();
        let mut counts: HashMap<String, f64> = HashMap::new();
        let mut segs = Vec::with_capacity(self.words.len());
        let mut ll = 0.0;
        for (chars, c) in &self.words {
            let (score, ends) = viterbi(chars, max_len, |s, _| {
                self.logprobs.get(s).copied().filter(|lp| lp.is_finite())
            })
            .expect("live characters cover every word");
            ll += score * *c as f64;
            let mut seg = Vec::with_capacity(ends.len());
            let mut start = 0;
            for end in ends {
                let piece: String = chars[start..end].iter().collect();
                *counts.entry(piece.clone()).or_insert(0.0) += *c as f64;
                seg.push(piece);
                start = end;
            }
            segs.push(seg);
        }
        (ll, counts, segs)
    }

    fn record(&mut self, round: usize, iteration: usize, ll: f64) {
        if let Some(trace) = self.trace.as_deref_mut() {
            let pieces = self
                .logprobs
                .iter()
                .filter(|(_, lp)| lp.is_finite())
                .map(|(p, lp)| (p.clone(), *lp))
                .collect();
            trace.steps.push(EmStep { round, iteration, log_likelihood: ll, pieces });
        }
    }

    fn m_step(&mut self, counts: &HashMap<String, f64>) {
        let total: f64 = counts.values().sum();
        let alphabet = &self.alphabet;
        self.logprobs.retain(|p, _| counts.contains_key(p) || alphabet.contains(p));
        for (p, lp) in self.logprobs.iter_mut() {
            *lp = match counts.get(p) {
                Some(c) => (c / total).ln(),
                None => f64::NEG_INFINITY,
            };
        }
    }

    /// Gives dormant characters a half count and renormalizes.
    fn revive_and_normalize(&mut self, counts: &HashMap<String, f64>) {
        let mut mass: HashMap<&String, f64> = HashMap::new();
        for p in self.logprobs.keys() {
            let c = counts.get(p).copied().unwrap_or(0.0);
            mass.insert(p, if c > 0.0 { c } else { REVIVE_COUNT });
        }
        let total: f64 = mass.values().sum();
        let updated: Vec<(String, f64)> =
            mass.into_iter().map(|(p, m)| (p.clone(), (m / total).ln())).collect();
        self.logprobs.extend(updated);
    }

    /// Removes up to `n` multi-character pieces with the smallest likelihood
    /// loss. Returns how many were removed.
    fn prune(&mut self, segs: &[Vec<String>], n: usize) -> usize {
        let mut usage: HashMap<&str, f64> = HashMap::new();
        for (seg, (_, c)) in segs.iter().zip(&self.words) {
            for p in seg {
                *usage.entry(p.as_str()).or_insert(0.0) += *c as f64;
            }
        }
        let max_len = self.max_len();
        let mut losses: Vec<(f64, String)> = self
            .logprobs
            .iter()
            .filter(|(p, _)| !self.alphabet.contains(*p))
            .map(|(p, lp)| {
                let uses = usage.get(p.as_str()).copied().unwrap_or(0.0);
                let loss = if uses == 0.0 {
                    0.0
                } else {
                    let chars: Vec<char> = p.chars().collect();
                    let alt = viterbi(&chars, max_len, |s, _| {
                        if s == p {
                            None
                        } else {
                            self.logprobs.get(s).copied().filter(|x| x.is_finite())
                        }
                    })
                    .map_or(f64::NEG_INFINITY, |(score, _)| score);
                    uses * (lp - alt)
                };
                (loss, p.clone())
            })
            .collect();
        losses.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let removed = n.min(losses.len());
        for (_, p) in losses.into_iter().take(removed) {
            self.logprobs.remove(&p);
        }
        removed
    }
}

pub fn train_unigram(
    corpus: &TokenizedCorpus,
    target_vocab_size: usize,
) -> Result<TokenizerModel, TokenizerError> {
    train(corpus, target_vocab_size, None)
}

/// Like [`train_unigram`], also recording every E-step.
pub fn train_unigram_traced(
    corpus: &TokenizedCorpus,
    target_vocab_size: usize,
) -> Result<(TokenizerModel, UnigramTrace), TokenizerError> {
    let mut trace = UnigramTrace::default();
    let model = train(corpus, target_vocab_size, Some(&mut trace))?;
    Ok((model, trace))
}

fn train(
    corpus: &TokenizedCorpus,
    target_vocab_size: usize,
    trace: Option<&mut UnigramTrace>,
) -> Result<TokenizerModel, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let words: Vec<(Vec<char>, u64)> =
        word_counts(corpus).into_iter().map(|(w, c)| (w.chars().collect(), c)).collect();
    let alphabet: HashSet<String> =
        words.iter().flat_map(|(w, _)| w.iter().map(|c| c.to_string())).collect();
    // unk + characters
    let base = alphabet.len() + 1;
    if target_vocab_size < base {
        return Err(TokenizerError::TargetTooSmall { target: target_vocab_size, base });
    }

    let mut substr_counts: HashMap<String, u64> = HashMap::new();
    for (chars, c) in &words {
        for start in 0..chars.len() {
            for end in start + 1..=chars.len().min(start + MAX_PIECE_CHARS) {
                *substr_counts.entry(chars[start..end].iter().collect()).or_insert(0) += c;
            }
        }
    }
    let mut multi: Vec<(String, u64)> = substr_counts
        .iter()
        .filter(|(s, c)| **c >= 2 && !alphabet.contains(*s))
        .map(|(s, c)| (s.clone(), *c))
        .collect();
    multi.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    multi.truncate((SEED_FACTOR * target_vocab_size).saturating_sub(alphabet.len()));
    let seed: Vec<(String, u64)> = alphabet
        .iter()
        .map(|a| (a.clone(), substr_counts[a]))
        .chain(multi)
        .collect();
    let seed_total: f64 = seed.iter().map(|(_, c)| *c as f64).sum();
    let logprobs = seed.into_iter().map(|(s, c)| (s, (c as f64 / seed_total).ln())).collect();

    let mut t = Trainer { words, alphabet, logprobs, trace };
    let mut round = 0;
    loop {
        let mut last = None;
        for iteration in 0..=EM_ITERATIONS {
            let (ll, counts, segs) = t.e_step();
            t.record(round, iteration, ll);
            if iteration < EM_ITERATIONS {
                t.m_step(&counts);
            } else {
                last = Some((counts, segs));
            }
        }
        let (counts, segs) = last.expect("at least one E-step");
        t.revive_and_normalize(&counts);
        let vocab_size = t.logprobs.len() + 1;
        if vocab_size <= target_vocab_size {
            break;
        }
        let want = ((vocab_size as f64) * PRUNE_FRACTION).ceil() as usize;
        let removed = t.prune(&segs, want.min(vocab_size - target_vocab_size));
        if removed == 0 {
            break;
        }
        // renormalize over the survivors
        let z: f64 = t.logprobs.values().map(|lp| lp.exp()).sum();
        for lp in t.logprobs.values_mut() {
            *lp -= z.ln();
        }
        round += 1;
    }

    let mut pieces: Vec<(String, f64)> = t.logprobs.into_iter().collect();
    pieces.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut vocab = vec![DEFAULT_UNK.to_string()];
    let mut lps = vec![0.0];
    for (p, lp) in pieces {
        vocab.push(p);
        lps.push(lp.min(0.0));
    }
    new_subword_model(TokenizerKind::Unigram, vocab, Vec::new(), lps, target_vocab_size)
}

/// Viterbi segmentation maximizing the summed piece log-probabilities.
/// Characters outside the vocabulary become unk pieces.
pub(crate) fn encode_word(model: &TokenizerModel, word: &str) -> Vec<(String, u32)> {
    let chars: Vec<char> = word.chars().collect();
    let unk = model.unk_id().expect("subword models carry unk");
    let unk_score = model.min_logprob - UNK_PENALTY;
    let (_, ends) = viterbi(&chars, model.max_piece_chars.max(1), |s, len| {
        match model.piece_logprob(s) {
            Some(lp) => Some(lp),
            None if len == 1 => Some(unk_score),
            None => None,
        }
    })
    .unwrap_or((0.0, Vec::new()));
    let mut out = Vec::with_capacity(ends.len());
    let mut start = 0;
    for end in ends {
        let piece: String = chars[start..end].iter().collect();
        match model.token_to_id(&piece).filter(|&id| id != unk) {
            Some(id) => out.push((piece, id)),
            None => out.push((model.unk_token().to_string(), unk)),
        }
        start = end;
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

    /// Every segmentation of `word` into pieces present in `lp`, scored.
    fn enumerate(word: &str, lp: &HashMap<String, f64>) -> Vec<(Option<f64>, Vec<String>)> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        let mut out = Vec::new();
        for mask in 0u32..(1 << (n - 1)) {
            let mut pieces = Vec::new();
            let mut start = 0;
            for i in 1..=n {
                if i == n || mask & (1 << (i - 1)) != 0 {
                    pieces.push(chars[start..i].iter().collect::<String>());
                    start = i;
                }
            }
            let score = pieces.iter().map(|p| lp.get(p).copied()).sum::<Option<f64>>();
            out.push((score, pieces));
        }
        out
    }

    #[test]
    fn viterbi_matches_exhaustive_enumeration() {
        let lp: HashMap<String, f64> =
            [("a", 0.2f64.ln()), ("aa", 0.5f64.ln()), ("aaa", 0.3f64.ln())]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let model = TokenizerModel::unigram_from_pieces(lp.clone()).unwrap();
        for word in ["a", "aa", "aaa", "aaaa"] {
            let all = enumerate(word, &lp);
            assert_eq!(all.len(), 1 << (word.len() - 1));
            let best = all
                .iter()
                .filter_map(|(s, p)| s.map(|s| (s, p)))
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            assert_eq!(&model.pieces(word), best.1, "word {word}");
        }
        // ln .5 + ln .5 = -1.39 beats ln .2 + ln .3 = -2.81 and 4 ln .2 = -6.44
        assert_eq!(model.pieces("aaaa"), vec!["aa", "aa"]);
    }

    #[test]
    fn trained_on_repeated_aaaa_prefers_long_pieces() {
        let c = corpus(&[("aaaa", 10)]);
        let m = train_unigram(&c, 3).unwrap();
        assert!(m.vocab_size() <= 3);
        let pieces = m.pieces("aaaa");
        assert!(pieces.len() <= 2, "{pieces:?}");
    }

    #[test]
    fn alphabet_only_target_keeps_characters() {
        let c = corpus(&[("aaaa", 10), ("a", 3)]);
        let m = train_unigram(&c, 2).unwrap();
        assert_eq!(m.vocab(), ["<unk>", "a"]);
        let total: f64 = m.piece_logprobs().map(|(_, lp)| lp.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_characters_become_unk() {
        let c = corpus(&[("abab", 5), ("ba", 3)]);
        let m = train_unigram(&c, 6).unwrap();
        let e = m.encode(&["abzab"]);
        assert!(e.pieces.contains(&"<unk>".to_string()));
        assert_eq!(m.decode(&e).unwrap(), vec!["ab<unk>ab"]);
    }

    #[test]
    fn em_never_lowers_likelihood_within_a_round() {
        let c = corpus(&[
            ("hello", 7), ("help", 5), ("helper", 3), ("yellow", 4), ("fellow", 2),
            ("low", 9), ("lower", 3), ("slow", 2), ("hollow", 2), ("bellow", 1),
        ]);
        let (model, trace) = train_unigram_traced(&c, 20).unwrap();
        assert!(model.vocab_size() <= 20);
        assert!(trace.steps.len() > 3);
        for w in trace.steps.windows(2) {
            if w[0].round == w[1].round {
                let tol = 1e-9 * w[0].log_likelihood.abs();
                assert!(w[1].log_likelihood >= w[0].log_likelihood - tol);
            }
        }
    }
}
