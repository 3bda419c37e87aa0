//! Word-pair (UMNSRS CSV) and sentence-pair (STS TSV) similarity sets.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Word,
    Sentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    /// Header row naming a score column and two term columns.
    UmnsrsCsv,
    /// `score<TAB>sentence1<TAB>sentence2`, scores in [0, 5].
    StsTsv,
}

impl std::str::FromStr for Schema {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "umnsrs_csv" => Ok(Self::UmnsrsCsv),
            "sts_tsv" => Ok(Self::StsTsv),
            _ => Err(DatasetError::Parse { line: 0, message: format!("unknown similarity schema {s:?}") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityItem {
    pub id: String,
    pub left: String,
    pub right: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDataset {
    pub items: Vec<SimilarityItem>,
    pub scale: (f64, f64),
    pub granularity: Granularity,
    /// Rows skipped as malformed, with line number and reason.
    #[serde(default)]
    pub rejected: Vec<(usize, String)>,
}

pub const STS_SCALE: (f64, f64) = (0.0, 5.0);

const SCORE_COLUMNS: &[&str] = &["mean", "score", "similarity", "relatedness", "sim"];
const LEFT_COLUMNS: &[&str] = &["term1", "word1", "term 1", "w1"];
const RIGHT_COLUMNS: &[&str] = &["term2", "word2", "term 2", "w2"];

fn find_column(headers: &[String], names: &[&str], label: &str) -> Result<usize, DatasetError> {
    headers
        .iter()
        .position(|h| names.contains(&h.trim().to_ascii_lowercase().as_str()))
        .ok_or_else(|| DatasetError::MissingColumn(label.to_string()))
}

fn parse_score(raw: &str, line: usize) -> Result<f64, DatasetError> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DatasetError::Parse { line, message: format!("unparseable score {raw:?}") }),
    }
}

fn read_umnsrs(reader: impl Read) -> Result<SimilarityDataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let score = find_column(&headers, SCORE_COLUMNS, "score")?;
    let left = find_column(&headers, LEFT_COLUMNS, "term1")?;
    let right = find_column(&headers, RIGHT_COLUMNS, "term2")?;
    let mut items = Vec::new();
    let mut rejected = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let (Some(s), Some(l), Some(r)) = (rec.get(score), rec.get(left), rec.get(right)) else {
            rejected.push((line, format!("expected {} fields, found {}", headers.len(), rec.len())));
            continue;
        };
        if l.trim().is_empty() || r.trim().is_empty() {
            rejected.push((line, "empty term".into()));
            continue;
        }
        items.push(SimilarityItem {
            id: format!("umnsrs-{}", items.len() + rejected.len()),
            left: l.trim().to_string(),
            right: r.trim().to_string(),
            score: parse_score(s, line)?,
        });
    }
    let (min, max) = items.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), it| (a.min(it.score), b.max(it.score)));
    Ok(SimilarityDataset { items, scale: (min, max), granularity: Granularity::Word, rejected })
}

fn read_sts(reader: impl BufRead) -> Result<SimilarityDataset, DatasetError> {
    let (min, max) = STS_SCALE;
    let mut items = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            rejected.push((lineno, format!("expected 3 tab-separated fields, found {}", fields.len())));
            continue;
        }
        let score = parse_score(fields[0], lineno)?;
        if !(min..=max).contains(&score) {
            return Err(DatasetError::Range { line: lineno, score, min, max });
        }
        items.push(SimilarityItem {
            id: format!("sts-{}", items.len() + rejected.len()),
            left: fields[1].trim().to_string(),
            right: fields[2].trim().to_string(),
            score,
        });
    }
    Ok(SimilarityDataset { items, scale: STS_SCALE, granularity: Granularity::Sentence, rejected })
}

pub fn read_similarity(reader: impl BufRead, schema: Schema) -> Result<SimilarityDataset, DatasetError> {
    let d = match schema {
        Schema::UmnsrsCsv => read_umnsrs(reader)?,
        Schema::StsTsv => read_sts(reader)?,
    };
    for (line, why) in &d.rejected {
        log::warn!("rejected row at line {line}: {why}");
    }
    Ok(d)
}

pub fn load_similarity(path: &Path, schema: Schema) -> Result<SimilarityDataset, DatasetError> {
    read_similarity(BufReader::new(File::open(path)?), schema).map_err(|e| e.in_file(path))
}

impl SimilarityDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Canonical form: a header line with scale and granularity, then one
    /// item per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), DatasetError> {
        let header = serde_json::json!({ "scale": [self.scale.0, self.scale.1], "granularity": self.granularity, "rejected": self.rejected });
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for it in &self.items {
            serde_json::to_writer(&mut out, it)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self, DatasetError> {
        #[derive(Deserialize)]
        struct Header {
            scale: (f64, f64),
            granularity: Granularity,
            #[serde(default)]
            rejected: Vec<(usize, String)>,
        }
        let mut lines = reader.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| DatasetError::Empty("similarity jsonl".into()))?;
        let h: Header = serde_json::from_str(&first?).map_err(|e| DatasetError::Parse { line: 1, message: e.to_string() })?;
        let mut items = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            items.push(serde_json::from_str(&line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?);
        }
        Ok(Self { items, scale: h.scale, granularity: h.granularity, rejected: h.rejected })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_sts() {
        let d = read_similarity("5\ta b\ta b\n0.5\tx\ty\n3.2\tp q\tp r\n".as_bytes(), Schema::StsTsv).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.items.iter().all(|it| (0.0..=5.0).contains(&it.score)));
        assert_eq!(d.granularity, Granularity::Sentence);
    }

    #[test]
    fn sts_score_out_of_range() {
        let err = read_similarity("5.5\ta\tb\n".as_bytes(), Schema::StsTsv).unwrap_err();
        assert!(matches!(err, DatasetError::Range { line: 1, .. }));
    }

    #[test]
    fn sts_malformed_rows_are_counted() {
        let d = read_similarity("1\ta\tb\nbroken row\n".as_bytes(), Schema::StsTsv).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.rejected.len(), 1);
        assert_eq!(d.rejected[0].0, 2);
    }

    #[test]
    fn umnsrs_header_driven() {
        let csv = "Mean,Stdev,CUI1,CUI2,Term1,Term2\n1210.25,10,C1,C2,Heart,Myocardium\n500,3,C3,C4,\"aspirin, low dose\",Tylenol\n";
        let d = read_similarity(csv.as_bytes(), Schema::UmnsrsCsv).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.items[1].left, "aspirin, low dose");
        assert_eq!(d.items[0].score, 1210.25);
        assert_eq!(d.granularity, Granularity::Word);
    }

    #[test]
    fn umnsrs_missing_column() {
        let err = read_similarity("Mean,Term1\n1,a\n".as_bytes(), Schema::UmnsrsCsv).unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn(c) if c == "term2"));
    }

    #[test]
    fn umnsrs_bad_score() {
        let err = read_similarity("Mean,Term1,Term2\nx,a,b\n".as_bytes(), Schema::UmnsrsCsv).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn jsonl_round_trip() {
        let d = read_similarity("5\ta b\ta b\n0.5\tx\ty\nbad\n".as_bytes(), Schema::StsTsv).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        assert_eq!(SimilarityDataset::read_jsonl(&buf[..]).unwrap(), d);
    }
}
