//! Converts stand-off entity annotations to CoNLL columns.
//!
//! Input is JSON lines, one sentence or passage per record:
//!
//! ```json
//! {"id": "p1", "text": "Aspirin inhibits COX-1 .", "entities": [{"start": 0, "end": 7, "type": "CHEM"}]}
//! ```
//!
//! Offsets are character positions, `end` exclusive. Text is split on
//! whitespace; a token whose span overlaps an entity is tagged `B-TYPE` if it
//! is the first such token, `I-TYPE` otherwise, and `O` when it overlaps
//! nothing. Records are separated by blank lines in the output.

use std::io::{BufRead, Write};

use serde::Deserialize;

use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StandoffSpan {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StandoffRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub entities: Vec<StandoffSpan>,
}

/// Whitespace tokens with their character spans.
fn char_tokens(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !cur.is_empty() {
                out.push((std::mem::take(&mut cur), start, i));
            }
        } else {
            if cur.is_empty() {
                start = i;
            }
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        let n = text.chars().count();
        out.push((cur, start, n));
    }
    out
}

/// Tags for one record.
pub fn tag_record(rec: &StandoffRecord) -> Result<Vec<(String, String)>, String> {
    let len = rec.text.chars().count();
    for e in &rec.entities {
        if e.start >= e.end || e.end > len {
            return Err(format!("record {:?}: entity span {}..{} outside text of {len} chars", rec.id, e.start, e.end));
        }
    }
    let mut prev: Option<usize> = None;
    Ok(char_tokens(&rec.text)
        .into_iter()
        .map(|(tok, s, e)| {
            let hit = rec.entities.iter().position(|en| s < en.end && en.start < e);
            let tag = match hit {
                None => "O".to_string(),
                Some(k) if prev == Some(k) => format!("I-{}", rec.entities[k].kind),
                Some(k) => format!("B-{}", rec.entities[k].kind),
            };
            prev = hit;
            (tok, tag)
        })
        .collect())
}

/// Returns the number of records converted.
pub fn convert_standoff(reader: impl BufRead, mut out: impl Write) -> Result<usize, DatasetError> {
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StandoffRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
        let rows = tag_record(&rec).map_err(|message| DatasetError::Parse { line: i + 1, message })?;
        if rows.is_empty() {
            continue;
        }
        if n > 0 {
            out.write_all(b"\n")?;
        }
        for (tok, tag) in rows {
            writeln!(out, "{tok} {tag}")?;
        }
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::conll::{read_conll, Split};

    #[test]
    fn multi_token_entity_gets_b_then_i() {
        let input = r#"{"id":"p1","text":"Low  dose aspirin helps","entities":[{"start":0,"end":9,"type":"DOSE"},{"start":10,"end":17,"type":"CHEM"}]}"#;
        let mut out = Vec::new();
        assert_eq!(convert_standoff(input.as_bytes(), &mut out).unwrap(), 1);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "Low B-DOSE\ndose I-DOSE\naspirin B-CHEM\nhelps O\n");
        let d = read_conll(text.as_bytes(), "p", Split::Train).unwrap();
        assert_eq!(d.sentences[0].tags, ["B-DOSE", "I-DOSE", "B-CHEM", "O"]);
    }

    #[test]
    fn span_outside_text_is_rejected() {
        let input = r#"{"id":"p1","text":"ab","entities":[{"start":0,"end":9,"type":"X"}]}"#;
        assert!(matches!(convert_standoff(input.as_bytes(), Vec::new()), Err(DatasetError::Parse { line: 1, .. })));
    }
}
