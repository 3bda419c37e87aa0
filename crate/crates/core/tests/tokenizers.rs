mod oracles;

use embeval::corpus::TokenizedCorpus;
use embeval::tokenizers::{train, train_bpe, train_unigram_traced, train_wordpiece, TokenizerKind, TokenizerModel};

fn fixture() -> (Vec<(String, u64)>, TokenizedCorpus) {
    let words = oracles::word_fixture();
    let corpus = TokenizedCorpus::from_sentences(oracles::fixture_sentences(&words));
    (words, corpus)
}

#[test]
fn bpe_merges_equal_brute_force_greedy() {
    let (words, corpus) = fixture();
    for target in [40, 120, 400] {
        let model = train_bpe(&corpus, target).unwrap();
        let (vocab, merges) = oracles::bpe(&words, target);
        assert_eq!(model.merges(), merges.as_slice(), "target {target}");
        assert_eq!(model.vocab(), vocab.as_slice(), "target {target}");
    }
}

#[test]
fn wordpiece_vocab_equals_score_oracle() {
    let (words, corpus) = fixture();
    for target in [40, 120, 300] {
        let model = train_wordpiece(&corpus, target).unwrap();
        assert_eq!(model.vocab(), oracles::wordpiece(&words, target).as_slice(), "target {target}");
    }
}

#[test]
fn unigram_em_never_raises_negative_log_likelihood() {
    let (words, corpus) = fixture();
    let (_, trace) = train_unigram_traced(&corpus, 60).unwrap();
    assert!(trace.round_ends().len() > 1, "expected several pruning rounds");
    for step in &trace.steps {
        let dp = oracles::viterbi_ll(&words, &step.pieces);
        assert!((dp - step.log_likelihood).abs() <= 1e-9 * dp.abs(), "{dp} vs {}", step.log_likelihood);
    }
    for w in trace.steps.windows(2) {
        if w[0].round == w[1].round {
            let (a, b) = (oracles::viterbi_ll(&words, &w[0].pieces), oracles::viterbi_ll(&words, &w[1].pieces));
            assert!(-b <= -a + 1e-9 * a.abs(), "round {}: nll rose from {} to {}", w[0].round, -a, -b);
        }
    }
}

fn all_kinds(corpus: &TokenizedCorpus) -> Vec<TokenizerModel> {
    [TokenizerKind::Bpe, TokenizerKind::WordPiece, TokenizerKind::Unigram]
        .into_iter()
        .map(|k| train(k, corpus, 80).unwrap())
        .collect()
}

#[test]
fn decode_inverts_encode_on_fixture_words() {
    let (words, corpus) = fixture();
    let ws: Vec<&str> = words.iter().map(|(w, _)| w.as_str()).collect();
    for model in all_kinds(&corpus) {
        let enc = model.encode(&ws);
        assert!(enc.ids.iter().all(|&id| Some(id) != model.unk_id()), "{:?} produced unk", model.kind());
        assert_eq!(enc.word_spans.len(), ws.len());
        assert_eq!(model.decode(&enc).unwrap(), ws, "{:?}", model.kind());
    }
}

#[test]
fn serialization_is_deterministic() {
    let (_, corpus) = fixture();
    let first: Vec<String> = all_kinds(&corpus).iter().map(|m| m.to_json().unwrap()).collect();
    let second: Vec<String> = all_kinds(&corpus).iter().map(|m| m.to_json().unwrap()).collect();
    assert_eq!(first, second);
    for json in &first {
        assert_eq!(&TokenizerModel::from_json(json).unwrap().to_json().unwrap(), json);
    }
}
