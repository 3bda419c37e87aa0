use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use embeval::datasets::{
    convert_standoff, load_conll, load_conll_dir, load_docclass, load_similarity, read_conll, Schema, SimilarityDataset,
    Split, TaggedDataset,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Counts tags by scanning raw lines, without any sentence logic.
fn scan_tags(text: &str) -> (usize, BTreeMap<String, usize>) {
    let mut counts = BTreeMap::new();
    let mut sentences = 0;
    let mut in_sentence = false;
    for line in text.lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() || cols[0] == "-DOCSTART-" {
            in_sentence = false;
            continue;
        }
        if !in_sentence {
            sentences += 1;
            in_sentence = true;
        }
        *counts.entry(cols.last().unwrap().to_string()).or_insert(0) += 1;
    }
    (sentences, counts)
}

#[test]
fn conll_fixture_matches_line_scan() {
    let dir = fixtures().join("conll");
    let d = load_conll_dir(&dir).unwrap();
    assert_eq!(d.len(), 100);
    let mut expected = BTreeMap::new();
    let mut n = 0;
    for f in ["eng.train", "eng.testb"] {
        let (s, c) = scan_tags(&std::fs::read_to_string(dir.join(f)).unwrap());
        n += s;
        for (k, v) in c {
            *expected.entry(k).or_insert(0) += v;
        }
    }
    let mut got = BTreeMap::new();
    for s in &d.sentences {
        assert_eq!(s.tokens.len(), s.tags.len());
        for t in &s.tags {
            *got.entry(t.clone()).or_insert(0) += 1;
        }
    }
    assert_eq!(d.len(), n);
    assert_eq!(got, expected);
    assert_eq!(d.split(Split::Train).count(), 80);
    assert_eq!(d.split(Split::Test).count(), 20);
    assert!(d.sentences.iter().all(|s| s.tags.iter().all(|t| d.tag_set.contains(t))));
}

#[test]
fn conll_file_split_and_ids() {
    let d = load_conll(&fixtures().join("conll/eng.testb")).unwrap();
    assert!(d.sentences.iter().all(|s| s.split == Split::Test));
    assert_eq!(d.sentences[3].id, "eng:3");
}

#[test]
fn umnsrs_mean_matches_column_average() {
    let path = fixtures().join("umnsrs_similarity.csv");
    let d = load_similarity(&path, Schema::UmnsrsCsv).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let col: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(d.len(), col.len());
    assert!(d.len() >= 10);
    let oracle = col.iter().sum::<f64>() / col.len() as f64;
    let mean = d.items.iter().map(|i| i.score).sum::<f64>() / d.len() as f64;
    assert!((mean - oracle).abs() < 1e-9);
    assert!(d.items.iter().all(|i| i.score >= d.scale.0 && i.score <= d.scale.1));
}

#[test]
fn fixtures_round_trip_through_canonical_jsonl() {
    let t = load_conll_dir(&fixtures().join("conll")).unwrap();
    let mut buf = Vec::new();
    t.write_jsonl(&mut buf).unwrap();
    assert_eq!(TaggedDataset::read_jsonl(&buf[..]).unwrap(), t);

    let s = load_similarity(&fixtures().join("sts.tsv"), Schema::StsTsv).unwrap();
    let mut buf = Vec::new();
    s.write_jsonl(&mut buf).unwrap();
    assert_eq!(SimilarityDataset::read_jsonl(&buf[..]).unwrap(), s);

    let docs = load_docclass(&fixtures().join("docs.jsonl")).unwrap();
    let mut buf = Vec::new();
    docs.write_jsonl(&mut buf).unwrap();
    assert_eq!(embeval::datasets::read_docclass(&buf[..]).unwrap(), docs);
    assert_eq!(docs.supports().values().sum::<usize>(), 60);
}

#[test]
fn standoff_fixture_converts_to_loadable_conll() {
    let input = std::fs::read(fixtures().join("standoff.jsonl")).unwrap();
    let mut out = Vec::new();
    assert_eq!(convert_standoff(&input[..], &mut out).unwrap(), 3);
    let d = read_conll(&out[..], "standoff", Split::Train).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.sentences[0].tags, ["B-CHEM", "I-CHEM", "I-CHEM", "O", "B-GENE", "O", "O"]);
    assert_eq!(d.sentences[2].tags.iter().filter(|t| *t != "O").count(), 0);
}

#[test]
fn load_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.train");
    std::fs::write(&p, "a O\nlonely\n").unwrap();
    let msg = load_conll(&p).unwrap_err().to_string();
    assert!(msg.contains("bad.train") && msg.contains("line 2"), "{msg}");
}
