//! Precomputed contextual vectors exchanged as JSON lines.
//!
//! Sentences go out as `{"id": …, "tokens": […]}`. Vectors come back as
//! `{"id": …, "tokens": […], "vectors": [[…], …]}` with one vector per
//! token, or `{"id": …, "error": "…"}` for a sentence the provider skipped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EmbedError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct VectorRecord {
    id: String,
    #[serde(default)]
    tokens: Vec<String>,
    #[serde(default)]
    vectors: Option<Vec<Vec<f32>>>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualRecord {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextualStore {
    dim: usize,
    records: HashMap<String, ContextualRecord>,
    skipped: Vec<(String, String)>,
}

pub fn write_sentences<'a>(
    mut out: impl Write,
    sentences: impl IntoIterator<Item = (&'a str, &'a [String])>,
) -> Result<(), EmbedError> {
    for (id, tokens) in sentences {
        let rec = SentenceRecord { id: id.to_string(), tokens: tokens.to_vec() };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

impl ContextualStore {
    pub fn read(reader: impl BufRead) -> Result<Self, EmbedError> {
        let mut store = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: VectorRecord = serde_json::from_str(&line)
                .map_err(|e| EmbedError::Parse { line: lineno, message: e.to_string() })?;
            let bad = |message: String| EmbedError::Parse { line: lineno, message };
            if store.records.contains_key(&rec.id) || store.skipped.iter().any(|(id, _)| *id == rec.id) {
                return Err(bad(format!("duplicate id {:?}", rec.id)));
            }
            let vectors = match (rec.vectors, rec.error) {
                (_, Some(err)) => {
                    log::warn!("contextual provider skipped {:?}: {err}", rec.id);
                    store.skipped.push((rec.id, err));
                    continue;
                }
                (Some(v), None) => v,
                (None, None) => return Err(bad(format!("record {:?} has neither vectors nor error", rec.id))),
            };
            if vectors.len() != rec.tokens.len() {
                return Err(bad(format!(
                    "record {:?} has {} tokens but {} vectors",
                    rec.id,
                    rec.tokens.len(),
                    vectors.len()
                )));
            }
            for v in &vectors {
                if store.dim == 0 {
                    store.dim = v.len();
                }
                if v.len() != store.dim || v.is_empty() {
                    return Err(bad(format!("record {:?} has a vector of length {}, expected {}", rec.id, v.len(), store.dim)));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(bad(format!("record {:?} has a non-finite value", rec.id)));
                }
            }
            if let Some(w) = &rec.warning {
                log::warn!("contextual record {:?}: {w}", rec.id);
            }
            store.records.insert(rec.id, ContextualRecord { tokens: rec.tokens, vectors, warning: rec.warning });
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sentences the provider reported as failed, with its message.
    pub fn skipped(&self) -> &[(String, String)] {
        &self.skipped
    }

    pub fn get(&self, id: &str) -> Option<&ContextualRecord> {
        self.records.get(id)
    }

    /// Ids from `ids` with no vectors, in input order.
    pub fn missing<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        ids.into_iter().filter(|id| !self.records.contains_key(*id)).map(String::from).collect()
    }

    /// Vectors for sentence `id`, checking that the stored tokens match.
    pub fn vectors(&self, id: &str, tokens: &[String]) -> Result<&[Vec<f32>], EmbedError> {
        let rec = self.records.get(id).ok_or_else(|| EmbedError::MissingContextual { ids: vec![id.to_string()] })?;
        if rec.tokens != tokens {
            return Err(EmbedError::Misaligned { id: id.to_string() });
        }
        Ok(&rec.vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences_round_trip_through_jsonl() {
        let toks = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_sentences(&mut buf, [("s1", &toks[..])]).unwrap();
        let rec: SentenceRecord = serde_json::from_slice(buf.trim_ascii_end()).unwrap();
        assert_eq!(rec, SentenceRecord { id: "s1".into(), tokens: toks });
    }

    #[test]
    fn loads_vectors_and_skips_errors() {
        let text = r#"{"id":"s1","tokens":["a","b"],"vectors":[[1,0],[0,1]]}
{"id":"s2","error":"too long"}
"#;
        let s = ContextualStore::read(text.as_bytes()).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 1);
        assert_eq!(s.skipped(), [("s2".to_string(), "too long".to_string())]);
        assert_eq!(s.missing(["s1", "s2", "s3"]), vec!["s2", "s3"]);
        let toks = vec!["a".to_string(), "b".to_string()];
        assert_eq!(s.vectors("s1", &toks).unwrap()[1], vec![0.0, 1.0]);
        let wrong = vec!["a".to_string(), "c".to_string()];
        assert!(matches!(s.vectors("s1", &wrong), Err(EmbedError::Misaligned { .. })));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let text = r#"{"id":"s1","tokens":["a","b"],"vectors":[[1,0]]}"#;
        assert!(matches!(ContextualStore::read(text.as_bytes()), Err(EmbedError::Parse { line: 1, .. })));
    }

    #[test]
    fn ragged_dims_are_rejected() {
        let text = "{\"id\":\"s1\",\"tokens\":[\"a\"],\"vectors\":[[1,0]]}\n{\"id\":\"s2\",\"tokens\":[\"a\"],\"vectors\":[[1,0,0]]}\n";
        assert!(matches!(ContextualStore::read(text.as_bytes()), Err(EmbedError::Parse { line: 2, .. })));
    }
}
