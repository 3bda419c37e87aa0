//! Vector resolution for tokens missing from a store.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::contextual::ContextualStore;
use super::store::VectorStore;
use super::EmbedError;
use crate::tokenizers::TokenizerModel;

/// Serializable name of an [`OovPolicy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicyKind {
    Skip,
    Zero,
    SubwordMean,
    NgramMean,
}

impl std::str::FromStr for OovPolicyKind {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(Self::Skip),
            "zero" => Ok(Self::Zero),
            "subword_mean" => Ok(Self::SubwordMean),
            "ngram_mean" => Ok(Self::NgramMean),
            _ => Err(EmbedError::Policy(format!("unknown OOV policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum OovPolicy {
    /// The token has no vector and is left out of averages.
    Skip,
    Zero,
    /// Mean of the vectors of the token's subword pieces.
    SubwordMean(Arc<TokenizerModel>),
    /// Mean of the token's hashed character n-gram rows.
    NgramMean,
}

impl OovPolicy {
    pub fn kind(&self) -> OovPolicyKind {
        match self {
            Self::Skip => OovPolicyKind::Skip,
            Self::Zero => OovPolicyKind::Zero,
            Self::SubwordMean(_) => OovPolicyKind::SubwordMean,
            Self::NgramMean => OovPolicyKind::NgramMean,
        }
    }

    /// Rejects policies the store cannot serve.
    pub fn check(&self, store: &VectorStore) -> Result<(), EmbedError> {
        match self {
            Self::SubwordMean(tok) if !tok.kind().is_subword() => Err(EmbedError::Policy(format!(
                "subword_mean needs a subword tokenizer, got {}",
                tok.kind()
            ))),
            Self::NgramMean if store.ngrams().is_none() => {
                Err(EmbedError::Policy("ngram_mean needs a store with n-gram rows".into()))
            }
            _ => Ok(()),
        }
    }
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Vector for `token`, or `None` when the policy skips it.
pub fn vector(store: &VectorStore, token: &str, policy: &OovPolicy) -> Result<Option<Vec<f64>>, EmbedError> {
    if let Some(v) = store.get(token) {
        return Ok(Some(to_f64(v)));
    }
    Ok(match policy {
        OovPolicy::Skip => None,
        OovPolicy::Zero => Some(vec![0.0; store.dim()]),
        OovPolicy::SubwordMean(tok) => {
            let rows: Vec<&[f32]> = tok.pieces(token).iter().filter_map(|p| store.get(p)).collect();
            let mut out = vec![0.0; store.dim()];
            if !rows.is_empty() {
                for r in &rows {
                    out.iter_mut().zip(r.iter()).for_each(|(o, &x)| *o += x as f64);
                }
                out.iter_mut().for_each(|o| *o /= rows.len() as f64);
            }
            Some(out)
        }
        OovPolicy::NgramMean => Some(
            store
                .ngram_vector(token)
                .ok_or_else(|| EmbedError::Policy("ngram_mean needs a store with n-gram rows".into()))?,
        ),
    })
}

/// Mean of `vectors`, ignoring `None`; `None` when nothing is left.
pub fn mean_vector(vectors: &[Option<Vec<f64>>]) -> Option<Vec<f64>> {
    let present: Vec<&Vec<f64>> = vectors.iter().flatten().collect();
    let first = present.first()?;
    let mut out = vec![0.0; first.len()];
    for v in &present {
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += x);
    }
    out.iter_mut().for_each(|o| *o /= present.len() as f64);
    Some(out)
}

/// Sentence embedding as the mean of its token vectors.
pub fn embed_sentence<S: AsRef<str>>(
    store: &VectorStore,
    tokens: &[S],
    policy: &OovPolicy,
) -> Result<Option<Vec<f64>>, EmbedError> {
    if tokens.is_empty() {
        return Err(EmbedError::EmptySentence);
    }
    let vectors = tokens.iter().map(|t| vector(store, t.as_ref(), policy)).collect::<Result<Vec<_>, _>>()?;
    Ok(mean_vector(&vectors))
}

/// Either a static table with an OOV policy, or precomputed contextual
/// vectors addressed by sentence id.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a> {
    Static { store: &'a VectorStore, policy: &'a OovPolicy },
    Contextual(&'a ContextualStore),
}

impl<'a> EmbeddingSource<'a> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Static { store, .. } => store.dim(),
            Self::Contextual(c) => c.dim(),
        }
    }

    /// Fails with the full list of ids that have no contextual vectors.
    pub fn require<'b>(&self, ids: impl IntoIterator<Item = &'b str>) -> Result<(), EmbedError> {
        if let Self::Contextual(c) = self {
            let missing = c.missing(ids);
            if !missing.is_empty() {
                return Err(EmbedError::MissingContextual { ids: missing });
            }
        }
        Ok(())
    }

    pub fn token_vectors(&self, id: &str, tokens: &[String]) -> Result<Vec<Option<Vec<f64>>>, EmbedError> {
        match self {
            Self::Static { store, policy } => tokens.iter().map(|t| vector(store, t, policy)).collect(),
            Self::Contextual(c) => Ok(c.vectors(id, tokens)?.iter().map(|v| Some(to_f64(v))).collect()),
        }
    }

    pub fn sentence_vector(&self, id: &str, tokens: &[String]) -> Result<Option<Vec<f64>>, EmbedError> {
        if tokens.is_empty() {
            return Err(EmbedError::EmptySentence);
        }
        Ok(mean_vector(&self.token_vectors(id, tokens)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenizedCorpus;
    use crate::embeddings::store::{NgramTable, StoreKind};
    use crate::tokenizers::{train, train_word, TokenizerKind};

    fn store() -> VectorStore {
        VectorStore::new(
            StoreKind::External,
            2,
            [("cat".to_string(), vec![1.0, 0.0]), ("dog".to_string(), vec![0.0, 1.0])],
        )
        .unwrap()
    }

    #[test]
    fn policies_on_missing_token() {
        let s = store();
        assert_eq!(vector(&s, "cow", &OovPolicy::Skip).unwrap(), None);
        assert_eq!(vector(&s, "cow", &OovPolicy::Zero).unwrap(), Some(vec![0.0, 0.0]));
        assert!(vector(&s, "cow", &OovPolicy::NgramMean).is_err());
        assert_eq!(vector(&s, "dog", &OovPolicy::Skip).unwrap(), Some(vec![0.0, 1.0]));
    }

    #[test]
    fn ngram_mean_averages_bucket_rows() {
        let table = NgramTable { min_n: 3, max_n: 3, buckets: 1, matrix: vec![2.0, 4.0] };
        let s = store().with_ngrams(table).unwrap();
        assert_eq!(vector(&s, "cow", &OovPolicy::NgramMean).unwrap(), Some(vec![2.0, 4.0]));
    }

    #[test]
    fn subword_mean_uses_pieces_present_in_store() {
        let corpus = TokenizedCorpus::from_sentences(vec![vec!["ab".into(), "ab".into(), "cd".into()]]);
        let tok = train(TokenizerKind::Bpe, &corpus, 7).unwrap();
        let pieces = tok.pieces("abcd");
        let rows = pieces.iter().enumerate().map(|(i, p)| (p.clone(), vec![i as f32, 1.0]));
        let s = VectorStore::new(StoreKind::External, 2, rows).unwrap();
        let v = vector(&s, "abcd", &OovPolicy::SubwordMean(Arc::new(tok))).unwrap().unwrap();
        let n = pieces.len() as f64;
        assert!((v[0] - (0..pieces.len()).sum::<usize>() as f64 / n).abs() < 1e-12);
        assert_eq!(v[1], 1.0);
    }

    #[test]
    fn subword_mean_rejects_word_tokenizer() {
        let corpus = TokenizedCorpus::from_sentences(vec![vec!["ab".into()]]);
        let tok = train_word(&corpus, 1).unwrap();
        assert!(OovPolicy::SubwordMean(Arc::new(tok)).check(&store()).is_err());
    }

    #[test]
    fn sentence_mean_skips_absent() {
        let s = store();
        let v = embed_sentence(&s, &["cat", "cow", "dog"], &OovPolicy::Skip).unwrap();
        assert_eq!(v, Some(vec![0.5, 0.5]));
        assert_eq!(embed_sentence(&s, &["cow"], &OovPolicy::Skip).unwrap(), None);
        assert!(matches!(embed_sentence::<&str>(&s, &[], &OovPolicy::Skip), Err(EmbedError::EmptySentence)));
    }
}
