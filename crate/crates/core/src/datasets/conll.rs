//! CoNLL-style column files: one token per line, token in the first column,
//! tag in the last, blank lines between sentences.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// Split implied by a file name such as `eng.train`, `eng.testa`,
/// `dev.txt` or `test.conll`.
pub fn split_from_name(name: &str) -> Option<Split> {
    let n = name.to_ascii_lowercase();
    if n.contains("testa") || n.contains("dev") || n.contains("valid") {
        Some(Split::Dev)
    } else if n.contains("testb") || n.contains("test") {
        Some(Split::Test)
    } else if n.contains("train") {
        Some(Split::Train)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggedDataset {
    pub sentences: Vec<TaggedSentence>,
    pub tag_set: BTreeSet<String>,
}

impl TaggedDataset {
    pub fn new(sentences: Vec<TaggedSentence>) -> Self {
        let tag_set = sentences.iter().flat_map(|s| s.tags.iter().cloned()).collect();
        Self { sentences, tag_set }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn has_split(&self, split: Split) -> bool {
        self.sentences.iter().any(|s| s.split == split)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &TaggedSentence> {
        self.sentences.iter().filter(move |s| s.split == split)
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), DatasetError> {
        for s in &self.sentences {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self, DatasetError> {
        let mut sentences = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: TaggedSentence =
                serde_json::from_str(&line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
            if s.tokens.len() != s.tags.len() {
                return Err(DatasetError::Parse { line: i + 1, message: "tokens and tags differ in length".into() });
            }
            sentences.push(s);
        }
        Ok(Self::new(sentences))
    }
}

/// Parses CoNLL text. Sentence ids are `{prefix}:{n}` with `n` counting
/// from 0.
pub fn read_conll(reader: impl BufRead, prefix: &str, split: Split) -> Result<TaggedDataset, DatasetError> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>, sentences: &mut Vec<TaggedSentence>| {
        if !tokens.is_empty() {
            sentences.push(TaggedSentence {
                id: format!("{prefix}:{}", sentences.len()),
                tokens: std::mem::take(tokens),
                tags: std::mem::take(tags),
                split,
            });
        }
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut tokens, &mut tags, &mut sentences);
            continue;
        }
        if cols[0] == "-DOCSTART-" {
            flush(&mut tokens, &mut tags, &mut sentences);
            continue;
        }
        if cols.len() < 2 {
            return Err(DatasetError::Parse { line: i + 1, message: format!("expected at least 2 columns, found {}", cols.len()) });
        }
        tokens.push(cols[0].to_string());
        tags.push(cols[cols.len() - 1].to_string());
    }
    flush(&mut tokens, &mut tags, &mut sentences);
    Ok(TaggedDataset::new(sentences))
}

/// Loads one file; its split comes from the file name, defaulting to train.
pub fn load_conll(path: &Path) -> Result<TaggedDataset, DatasetError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let split = split_from_name(&name).unwrap_or(Split::Train);
    let stem = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or(name);
    read_conll(BufReader::new(File::open(path)?), &stem, split).map_err(|e| e.in_file(path))
}

/// Loads every file in `dir` whose name implies a split, in name order.
pub fn load_conll_dir(dir: &Path) -> Result<TaggedDataset, DatasetError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).and_then(split_from_name).is_some())
        .collect();
    files.sort();
    let mut sentences = Vec::new();
    for f in &files {
        sentences.extend(load_conll(f)?.sentences);
    }
    if sentences.is_empty() {
        return Err(DatasetError::Empty(dir.display().to_string()));
    }
    Ok(TaggedDataset::new(sentences))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "-DOCSTART- -X- -X- O\n\nEU NNP B-NP I-ORG\nrejects VBZ B-VP O\nGerman JJ B-NP I-MISC\n\nPeter NNP B-NP I-PER\nBlackburn NNP I-NP I-PER\n";

    #[test]
    fn two_sentences_with_verbatim_tags() {
        let d = read_conll(FIXTURE.as_bytes(), "x", Split::Train).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.sentences[0].tokens, ["EU", "rejects", "German"]);
        assert_eq!(d.sentences[1].tags, ["I-PER", "I-PER"]);
        let mut tags: Vec<&str> = d.sentences.iter().flat_map(|s| s.tags.iter().map(String::as_str)).collect();
        tags.sort();
        assert_eq!(tags, ["I-MISC", "I-ORG", "I-PER", "I-PER", "O"]);
        assert_eq!(d.sentences[1].id, "x:1");
    }

    #[test]
    fn single_column_row_is_an_error() {
        let err = read_conll("a O\nb\n".as_bytes(), "x", Split::Train).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }));
    }

    #[test]
    fn split_names() {
        assert_eq!(split_from_name("eng.train"), Some(Split::Train));
        assert_eq!(split_from_name("eng.testa"), Some(Split::Dev));
        assert_eq!(split_from_name("eng.testb"), Some(Split::Test));
        assert_eq!(split_from_name("readme.md"), None);
    }

    #[test]
    fn jsonl_round_trip() {
        let d = read_conll(FIXTURE.as_bytes(), "x", Split::Test).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        assert_eq!(TaggedDataset::read_jsonl(&buf[..]).unwrap(), d);
    }
}
