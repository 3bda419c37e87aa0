//! Dense token → vector tables and their on-disk formats.
//!
//! Vectors are written in the common word2vec text format: a `count dim`
//! header followed by `token v1 … v_dim` per line. FastText stores also get
//! a binary sidecar (`<path>.ngrams`) holding the hashed n-gram rows:
//!
//! ```text
//! magic    8 bytes   "EMBNGRM1"
//! min_n    u32 LE
//! max_n    u32 LE
//! buckets  u64 LE
//! dim      u32 LE
//! rows     buckets * dim f32 LE, row-major
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ngrams::ngram_buckets;
use super::EmbedError;

const NGRAM_MAGIC: &[u8; 8] = b"EMBNGRM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    Word2Vec,
    FastText,
    External,
}

/// Hashed character n-gram rows of a FastText model.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramTable {
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    pub matrix: Vec<f32>,
}

impl NgramTable {
    pub fn buckets_for(&self, word: &str) -> Vec<usize> {
        ngram_buckets(word, self.min_n, self.max_n, self.buckets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    kind: StoreKind,
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
    ngrams: Option<NgramTable>,
}

/// Outcome details of [`VectorStore::load`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadStats {
    pub header: Option<(usize, usize)>,
    pub duplicates: Vec<(usize, String)>,
}

impl VectorStore {
    /// Builds a store from rows. Duplicate tokens keep their first row.
    pub fn new(
        kind: StoreKind,
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<f32>)>,
    ) -> Result<Self, EmbedError> {
        let mut store = Self {
            kind,
            dim,
            vocab: Vec::new(),
            index: HashMap::new(),
            matrix: Vec::new(),
            ngrams: None,
        };
        for (tok, row) in rows {
            if row.len() != dim {
                return Err(EmbedError::Shape(format!(
                    "row {tok:?} has {} values, expected {dim}",
                    row.len()
                )));
            }
            store.push(tok, &row)?;
        }
        Ok(store)
    }

    pub(crate) fn from_parts(
        kind: StoreKind,
        dim: usize,
        vocab: Vec<String>,
        matrix: Vec<f32>,
        ngrams: Option<NgramTable>,
    ) -> Self {
        debug_assert_eq!(vocab.len() * dim, matrix.len());
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { kind, dim, vocab, index, matrix, ngrams }
    }

    fn push(&mut self, tok: String, row: &[f32]) -> Result<bool, EmbedError> {
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(EmbedError::Shape(format!("row {tok:?} contains non-finite value {bad}")));
        }
        if self.index.contains_key(&tok) {
            return Ok(false);
        }
        self.index.insert(tok.clone(), self.vocab.len());
        self.vocab.push(tok);
        self.matrix.extend_from_slice(row);
        Ok(true)
    }

    pub fn with_ngrams(mut self, table: NgramTable) -> Result<Self, EmbedError> {
        if table.matrix.len() != table.buckets * self.dim {
            return Err(EmbedError::Shape("n-gram table does not match store dim".into()));
        }
        self.kind = StoreKind::FastText;
        self.ngrams = Some(table);
        Ok(self)
    }

    pub fn kind(&self) -> StoreKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn ngrams(&self) -> Option<&NgramTable> {
        self.ngrams.as_ref()
    }

    /// Mean of the hashed n-gram rows of `word`; `None` without a table.
    /// Rows are summed in bucket order, so the result depends only on the
    /// multiset of n-grams.
    pub fn ngram_vector(&self, word: &str) -> Option<Vec<f64>> {
        let table = self.ngrams.as_ref()?;
        let mut buckets = table.buckets_for(word);
        buckets.sort_unstable();
        let mut out = vec![0.0f64; self.dim];
        for b in &buckets {
            for (o, &v) in out.iter_mut().zip(&table.matrix[b * self.dim..(b + 1) * self.dim]) {
                *o += v as f64;
            }
        }
        let n = buckets.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Some(out)
    }

    pub fn write_text(&self, out: impl Write) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, tok) in self.vocab.iter().enumerate() {
            out.write_all(tok.as_bytes())?;
            for v in self.row(i) {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    /// Parses the text format. The header line is optional; without it the
    /// dimension is taken from the first row.
    pub fn read_text(reader: impl BufRead) -> Result<(Self, LoadStats), EmbedError> {
        let mut stats = LoadStats::default();
        let mut store: Option<VectorStore> = None;
        let mut row = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let tok = fields.next().expect("non-empty line");
            row.clear();
            for (col, f) in fields.enumerate() {
                row.push(f.parse::<f32>().map_err(|_| EmbedError::Parse {
                    line: lineno,
                    message: format!("field {} ({f:?}) is not a number", col + 2),
                })?);
            }
            if lineno == 1 && row.len() == 1 {
                if let (Ok(count), Ok(dim)) = (tok.parse::<usize>(), line.split(' ').nth(1).unwrap_or("").parse::<usize>()) {
                    stats.header = Some((count, dim));
                    store = Some(VectorStore::new(StoreKind::External, dim, [])?);
                    continue;
                }
            }
            let s = store.get_or_insert_with(|| VectorStore {
                kind: StoreKind::External,
                dim: row.len(),
                vocab: Vec::new(),
                index: HashMap::new(),
                matrix: Vec::new(),
                ngrams: None,
            });
            if row.len() != s.dim {
                return Err(EmbedError::Parse {
                    line: lineno,
                    message: format!("ragged row: {} values, expected {}", row.len(), s.dim),
                });
            }
            if !s.push(tok.to_string(), &row).map_err(|e| EmbedError::Parse {
                line: lineno,
                message: e.to_string(),
            })? {
                log::warn!("duplicate token {tok:?} at line {lineno}; keeping the first row");
                stats.duplicates.push((lineno, tok.to_string()));
            }
        }
        let store = store.ok_or(EmbedError::Parse { line: 0, message: "empty vector file".into() })?;
        if let Some((count, _)) = stats.header {
            if count != store.len() + stats.duplicates.len() {
                log::warn!("header declares {count} rows, file has {}", store.len());
            }
        }
        Ok((store, stats))
    }

    pub fn ngram_sidecar(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".ngrams");
        PathBuf::from(s)
    }

    /// Writes the text file and, for FastText stores, the n-gram sidecar.
    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        self.write_text(File::create(path)?)?;
        if let Some(t) = &self.ngrams {
            let mut out = BufWriter::new(File::create(Self::ngram_sidecar(path))?);
            out.write_all(NGRAM_MAGIC)?;
            out.write_all(&(t.min_n as u32).to_le_bytes())?;
            out.write_all(&(t.max_n as u32).to_le_bytes())?;
            out.write_all(&(t.buckets as u64).to_le_bytes())?;
            out.write_all(&(self.dim as u32).to_le_bytes())?;
            for v in &t.matrix {
                out.write_all(&v.to_le_bytes())?;
            }
            out.flush()?;
        }
        Ok(())
    }

    /// Loads a text vector file, picking up an n-gram sidecar if present.
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let (mut store, _) = Self::read_text(BufReader::new(File::open(path)?))?;
        let sidecar = Self::ngram_sidecar(path);
        if sidecar.exists() {
            let table = read_ngrams(&sidecar, store.dim)?;
            store = store.with_ngrams(table)?;
        }
        Ok(store)
    }
}

fn read_ngrams(path: &Path, dim: usize) -> Result<NgramTable, EmbedError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NGRAM_MAGIC {
        return Err(EmbedError::Shape(format!("{} is not an n-gram table", path.display())));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u32buf)?;
    let min_n = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let max_n = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u64buf)?;
    let buckets = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) as usize != dim {
        return Err(EmbedError::Shape("n-gram table dim differs from vector file".into()));
    }
    let mut bytes = vec![0u8; buckets * dim * 4];
    r.read_exact(&mut bytes)?;
    let matrix = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(NgramTable { min_n, max_n, buckets, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VectorStore {
        let rows = (0..5).map(|i| {
            (format!("t{i}"), (0..4).map(|j| (i * 4 + j) as f32 * 0.123_456_7 - 1.0).collect())
        });
        VectorStore::new(StoreKind::Word2Vec, 4, rows).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact_enough() {
        let s = small();
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        let (back, stats) = VectorStore::read_text(&buf[..]).unwrap();
        assert_eq!(stats.header, Some((5, 4)));
        assert_eq!(back.vocab(), s.vocab());
        let max = s.matrix().iter().zip(back.matrix()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(max <= 1e-6);
    }

    #[test]
    fn headerless_file_infers_dim() {
        let (s, stats) = VectorStore::read_text("a 1 2 3\nb 4 5 6\n".as_bytes()).unwrap();
        assert_eq!(stats.header, None);
        assert_eq!(s.dim(), 3);
        assert_eq!(s.get("b").unwrap(), [4.0, 5.0, 6.0]);
    }

    #[test]
    fn ragged_row_names_its_line() {
        let err = VectorStore::read_text("2 3\na 1 2 3\nb 1 2 3 4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbedError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn non_numeric_field_is_rejected() {
        let err = VectorStore::read_text("a 1 x 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbedError::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_keeps_first() {
        let (s, stats) = VectorStore::read_text("a 1 2\nb 3 4\na 5 6\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.get("a").unwrap(), [1.0, 2.0]);
        assert_eq!(stats.duplicates, vec![(3, "a".to_string())]);
    }

    #[test]
    fn header_of_a_published_file_parses_exactly() {
        // first line of the 400k-word, 100-d GloVe-to-word2vec conversion
        let head = "400000 100\n";
        let mut text = head.to_string();
        text.push_str("the");
        for _ in 0..100 {
            text.push_str(" 0.5");
        }
        text.push('\n');
        let (_, stats) = VectorStore::read_text(text.as_bytes()).unwrap();
        let bytes = head.trim_end().as_bytes();
        let sep = bytes.iter().position(|&b| b == b' ').unwrap();
        let count: usize = std::str::from_utf8(&bytes[..sep]).unwrap().parse().unwrap();
        let dim: usize = std::str::from_utf8(&bytes[sep + 1..]).unwrap().parse().unwrap();
        assert_eq!(stats.header, Some((count, dim)));
    }

    #[test]
    fn save_and_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vec");
        let table = NgramTable { min_n: 3, max_n: 4, buckets: 7, matrix: (0..28).map(|i| i as f32).collect() };
        let s = small().with_ngrams(table.clone()).unwrap();
        s.save(&path).unwrap();
        let back = VectorStore::load(&path).unwrap();
        assert_eq!(back.kind(), StoreKind::FastText);
        assert_eq!(back.ngrams(), Some(&table));
    }
}
