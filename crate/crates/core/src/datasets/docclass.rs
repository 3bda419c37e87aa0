//! Single-label document classification sets.
//!
//! Input is JSON lines `{"id", "text", "label"}`. Texts are concatenated into
//! one backing string (joined by `\n`) and each document keeps its character
//! span into it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Doc {
    pub id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub label: String,
    byte_start: usize,
    byte_end: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocDataset {
    pub backing: String,
    pub docs: Vec<Doc>,
    pub label_set: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
struct DocRecord {
    id: String,
    text: String,
    label: String,
}

impl DocDataset {
    pub fn push(&mut self, id: String, text: &str, label: String) {
        if !self.backing.is_empty() {
            self.backing.push('\n');
        }
        let char_start = self.docs.last().map(|d| d.char_end + 1).unwrap_or(0);
        let byte_start = self.backing.len();
        self.backing.push_str(text);
        self.label_set.insert(label.clone());
        self.docs.push(Doc {
            id,
            char_start,
            char_end: char_start + text.chars().count(),
            label,
            byte_start,
            byte_end: self.backing.len(),
        });
    }

    pub fn text(&self, doc: &Doc) -> &str {
        &self.backing[doc.byte_start..doc.byte_end]
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Documents per label.
    pub fn supports(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for d in &self.docs {
            *out.entry(d.label.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Writes the input format back out; reloading yields an equal dataset.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), DatasetError> {
        for d in &self.docs {
            let rec = DocRecord { id: d.id.clone(), text: self.text(d).to_string(), label: d.label.clone() };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_docclass(reader: impl BufRead) -> Result<DocDataset, DatasetError> {
    let mut ds = DocDataset::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
        if rec.text.trim().is_empty() {
            return Err(DatasetError::Parse { line: i + 1, message: format!("document {:?} has empty text", rec.id) });
        }
        ds.push(rec.id, &rec.text, rec.label);
    }
    Ok(ds)
}

pub fn load_docclass(path: &Path) -> Result<DocDataset, DatasetError> {
    read_docclass(BufReader::new(File::open(path)?)).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{"id":"d1","text":"grain prices rose","label":"a"}
{"id":"d2","text":"naïve café","label":"b"}
{"id":"d3","text":"wheat exports","label":"a"}
{"id":"d4","text":"bank merger","label":"b"}
"#;

    #[test]
    fn supports_and_spans() {
        let d = read_docclass(FIXTURE.as_bytes()).unwrap();
        assert_eq!(d.supports(), BTreeMap::from([("a".to_string(), 2), ("b".to_string(), 2)]));
        let chars: Vec<char> = d.backing.chars().collect();
        for doc in &d.docs {
            assert!(doc.char_start < doc.char_end && doc.char_end <= chars.len());
            let s: String = chars[doc.char_start..doc.char_end].iter().collect();
            assert_eq!(s, d.text(doc));
        }
        assert_eq!(d.text(&d.docs[1]), "naïve café");
    }

    #[test]
    fn empty_text_is_rejected_with_id() {
        let err = read_docclass(r#"{"id":"x9","text":"  ","label":"a"}"#.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("x9"));
    }

    #[test]
    fn missing_field_is_an_error() {
        assert!(read_docclass(r#"{"id":"x","text":"t"}"#.as_bytes()).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let d = read_docclass(FIXTURE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        assert_eq!(read_docclass(&buf[..]).unwrap(), d);
    }
}
