//! Runs a whole experiment grid: preprocess the corpus, train tokenizers
//! and embeddings (reusing cached artifacts), evaluate every
//! (source, dataset) cell and write per-cell reports, tables and a summary.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, IsTerminal};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use anyhow::{anyhow, Context, Result};
use embeval::corpus::{default_stopwords, read_stopwords, run_pipeline, MaskPatterns, PreprocessConfig, TokenizedCorpus};
use embeval::datasets::{load_conll, load_conll_dir, load_docclass, load_similarity, DocDataset, SimilarityDataset, TaggedDataset};
use embeval::embeddings::{train_fasttext, train_word2vec, ContextualStore, EmbeddingSource, OovPolicy, OovPolicyKind, VectorStore};
use embeval::evaluation::{
    eval_docclass, eval_ner, eval_sentence_similarity, eval_word_similarity_split, ClassificationReport,
    CorrelationReport, EvalOptions, Table, CLASSIFICATION_COLUMNS, CORRELATION_COLUMNS,
};
use embeval::tokenizers::{self, TokenizerModel};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{CorpusSection, DatasetSpec, EmbeddingSpec, ModelFamily, RunConfig, Task, TokenizerSpec, WORD_LEVEL};

pub const VERSION: &str = concat!("embeval ", env!("CARGO_PKG_VERSION"));

/// Environment variable naming the artifact cache directory.
pub const CACHE_ENV: &str = "EMBEVAL_CACHE";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    /// Artifact cache; `<output>/cache` when unset.
    pub cache: Option<PathBuf>,
    /// Print one line per finished cell on stdout.
    pub progress: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            cache: std::env::var_os(CACHE_ENV).map(PathBuf::from),
            progress: std::io::stdout().is_terminal(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a file, or of a directory's files in name order.
pub fn path_sha256(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut h = Sha256::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.retain(|p| p.is_file());
        entries.sort();
        for p in entries {
            h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
            h.update([0]);
            h.update(fs::read(&p)?);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    } else {
        Ok(sha256_hex(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Role (`vectors`, `ngrams`, `tokenizer`, `contextual`) to file hash.
    pub artifacts: BTreeMap<String, String>,
    pub dataset_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TaskResult {
    WordSim { in_vocab: CorrelationReport, oov: CorrelationReport, overall: CorrelationReport },
    Correlation(CorrelationReport),
    Classification(ClassificationReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub dataset: String,
    pub task: Task,
    pub source: String,
    pub provenance: Provenance,
    pub result: TaskResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStatus {
    pub dataset: String,
    pub source: String,
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub cells: Vec<CellStatus>,
    pub tables: Vec<String>,
}

impl RunSummary {
    pub fn failed(&self) -> Vec<&CellStatus> {
        self.cells.iter().filter(|c| c.error.is_some()).collect()
    }
}

/// Builds the preprocessing settings described by `[corpus]`.
pub fn preprocess_config(c: &CorpusSection) -> Result<PreprocessConfig> {
    let stopwords = match c.stopwords.as_deref() {
        None | Some("default") => default_stopwords(),
        Some("none") => HashSet::new(),
        Some(p) => read_stopwords(BufReader::new(File::open(p).with_context(|| format!("opening {p}"))?))?,
    };
    let d = PreprocessConfig::default();
    Ok(PreprocessConfig {
        lowercase: c.lowercase,
        stopwords,
        strip_punctuation: c.strip_punctuation,
        bigram_min_count: c.bigram_min_count.unwrap_or(d.bigram_min_count),
        bigram_score_threshold: c.bigram_score_threshold.unwrap_or(d.bigram_score_threshold),
        mask_entities: c.mask_entities,
    })
}

pub fn eval_options(cfg: &RunConfig) -> Result<EvalOptions> {
    Ok(EvalOptions {
        text: preprocess_config(&cfg.corpus)?,
        beta: cfg.eval.beta,
        k: cfg.eval.k,
        distance: cfg.distance().map_err(|e| anyhow!(e))?,
        test_fraction: cfg.eval.test_fraction,
        seed: cfg.seed,
    })
}

/// Reads, concatenates and preprocesses the corpus files.
pub fn load_corpus(c: &CorpusSection) -> Result<TokenizedCorpus> {
    let pre = preprocess_config(c)?;
    let patterns = match &c.mask_patterns {
        Some(p) => MaskPatterns::from_file(p)?,
        None => MaskPatterns::default(),
    };
    let mut text = Vec::new();
    for p in &c.paths {
        text.extend(fs::read(p).with_context(|| format!("reading {}", p.display()))?);
        if !text.ends_with(b"\n") {
            text.push(b'\n');
        }
    }
    Ok(run_pipeline(&text[..], &pre, c.bigrams, &patterns)?)
}

/// Cache key of the preprocessed corpus: input hashes plus every option.
fn corpus_key(c: &CorpusSection) -> Result<String> {
    let mut stop: Vec<String> = preprocess_config(c)?.stopwords.into_iter().collect();
    stop.sort();
    let files = c.paths.iter().map(|p| path_sha256(p)).collect::<Result<Vec<_>>>()?;
    let patterns = c.mask_patterns.as_deref().map(path_sha256).transpose()?;
    let desc = serde_json::json!({
        "version": VERSION,
        "files": files,
        "lowercase": c.lowercase,
        "strip_punctuation": c.strip_punctuation,
        "stopwords": stop,
        "bigrams": c.bigrams,
        "bigram_min_count": c.bigram_min_count,
        "bigram_score_threshold": c.bigram_score_threshold,
        "mask_entities": c.mask_entities,
        "mask_patterns": patterns,
    });
    Ok(sha256_hex(desc.to_string().as_bytes()))
}

/// Writes through a temporary name so readers never see partial files.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

struct Artifacts<'a> {
    cache: PathBuf,
    corpus_key: String,
    corpus_section: &'a CorpusSection,
    corpus: OnceLock<Result<TokenizedCorpus, String>>,
}

impl Artifacts<'_> {
    fn corpus(&self) -> Result<&TokenizedCorpus> {
        self.corpus
            .get_or_init(|| {
                log::info!("preprocessing {} corpus file(s)", self.corpus_section.paths.len());
                load_corpus(self.corpus_section).map_err(|e| format!("{e:#}"))
            })
            .as_ref()
            .map_err(|e| anyhow!("corpus: {e}"))
    }

    fn tokenizer(&self, spec: &TokenizerSpec) -> Result<(Arc<TokenizerModel>, String, String)> {
        let key = sha256_hex(format!("{}|{}|{}", self.corpus_key, spec.kind, spec.vocab_size).as_bytes());
        let path = self.cache.join("tokenizers").join(format!("{key}.json"));
        if !path.exists() {
            log::info!("training tokenizer {:?} ({} {})", spec.name, spec.kind, spec.vocab_size);
            let model = tokenizers::train(spec.kind, self.corpus()?, spec.vocab_size)?;
            write_atomic(&path, model.to_json()?.as_bytes())?;
        } else {
            log::info!("tokenizer {:?} from cache", spec.name);
        }
        let model = TokenizerModel::load(&path)?;
        Ok((Arc::new(model), path_sha256(&path)?, key))
    }

    fn embedding(
        &self,
        cfg: &RunConfig,
        spec: &EmbeddingSpec,
        tokenizer: Option<&(Arc<TokenizerModel>, String, String)>,
    ) -> Result<StaticSource> {
        let train = cfg.train_config(spec);
        let tok_key = tokenizer.map_or(WORD_LEVEL, |t| t.2.as_str());
        let desc = format!("{}|{tok_key}|{}|{}", self.corpus_key, spec.model.as_str(), serde_json::to_string(&train)?);
        let key = sha256_hex(desc.as_bytes());
        let path = self.cache.join("embeddings").join(format!("{key}.vec"));
        let sidecar = VectorStore::ngram_sidecar(&path);
        let fasttext = spec.model == ModelFamily::Fasttext;
        if !path.exists() || (fasttext && !sidecar.exists()) {
            log::info!("training embedding {:?}", spec.name);
            let corpus = self.corpus()?;
            let tok = tokenizer.map(|t| t.0.as_ref());
            let (store, stats) = match spec.model {
                ModelFamily::Word2vec => train_word2vec(corpus, tok, &train)?,
                ModelFamily::Fasttext => train_fasttext(corpus, tok, &train)?,
            };
            log::info!("embedding {:?}: {} rows, epoch losses {:?}", spec.name, stats.vocab_size, stats.epoch_losses);
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
            store.save(&tmp)?;
            if fasttext {
                fs::rename(VectorStore::ngram_sidecar(&tmp), &sidecar)?;
            }
            fs::rename(&tmp, &path)?;
        } else {
            log::info!("embedding {:?} from cache", spec.name);
        }
        let store = VectorStore::load(&path)?;
        let mut hashes = BTreeMap::from([("vectors".to_string(), path_sha256(&path)?)]);
        if fasttext {
            hashes.insert("ngrams".into(), path_sha256(&sidecar)?);
        }
        if let Some(t) = tokenizer {
            hashes.insert("tokenizer".into(), t.1.clone());
        }
        let policy = match cfg.oov_policy(spec) {
            OovPolicyKind::Skip => OovPolicy::Skip,
            OovPolicyKind::Zero => OovPolicy::Zero,
            OovPolicyKind::NgramMean => OovPolicy::NgramMean,
            OovPolicyKind::SubwordMean => OovPolicy::SubwordMean(
                tokenizer.map(|t| t.0.clone()).ok_or_else(|| anyhow!("subword_mean needs a tokenizer"))?,
            ),
        };
        Ok(StaticSource { store, policy, hashes })
    }
}

struct StaticSource {
    store: VectorStore,
    policy: OovPolicy,
    hashes: BTreeMap<String, String>,
}

enum Source {
    Static(StaticSource),
    Contextual(ContextualStore, String),
}

impl Source {
    fn as_embedding(&self) -> EmbeddingSource<'_> {
        match self {
            Source::Static(s) => EmbeddingSource::Static { store: &s.store, policy: &s.policy },
            Source::Contextual(c, _) => EmbeddingSource::Contextual(c),
        }
    }

    fn hashes(&self) -> BTreeMap<String, String> {
        match self {
            Source::Static(s) => s.hashes.clone(),
            Source::Contextual(_, h) => BTreeMap::from([("contextual".to_string(), h.clone())]),
        }
    }
}

enum Data {
    Similarity(SimilarityDataset),
    Tagged(TaggedDataset),
    Docs(DocDataset),
}

fn load_dataset(spec: &DatasetSpec) -> Result<Data> {
    Ok(match spec.task {
        Task::WordSim | Task::SentSim => {
            let schema = spec.schema.ok_or_else(|| anyhow!("schema is required"))?;
            let d = load_similarity(&spec.path, schema)?;
            if !d.rejected.is_empty() {
                log::warn!("dataset {:?}: {} malformed row(s) rejected", spec.name, d.rejected.len());
            }
            Data::Similarity(d)
        }
        Task::Ner if spec.path.is_dir() => Data::Tagged(load_conll_dir(&spec.path)?),
        Task::Ner => Data::Tagged(load_conll(&spec.path)?),
        Task::Docclass => Data::Docs(load_docclass(&spec.path)?),
    })
}

type Slot<T> = Result<T, String>;

fn flatten<T>(r: Result<T>) -> Slot<T> {
    r.map_err(|e| format!("{e:#}"))
}

fn safe_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Runs the grid described by `cfg`. Cell failures are recorded in the
/// summary; only setup problems (bad config, unwritable output) are errors.
pub fn run(cfg: &RunConfig, config_bytes: &[u8], opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let config_sha256 = sha256_hex(config_bytes);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build()?;
    let eval_opts = eval_options(cfg)?;
    let embeddings = cfg.all_embeddings();
    let artifacts = Artifacts {
        cache: opts.cache.clone().unwrap_or_else(|| cfg.output.join("cache")),
        corpus_key: if embeddings.is_empty() { String::new() } else { corpus_key(&cfg.corpus)? },
        corpus_section: &cfg.corpus,
        corpus: OnceLock::new(),
    };

    let (tokenizers, sources, datasets) = pool.install(|| {
        let needed: HashSet<&str> = embeddings.iter().map(|e| e.tokenizer.as_str()).collect();
        let tokenizers: BTreeMap<&str, Slot<_>> = cfg
            .tokenizers
            .par_iter()
            .filter(|t| needed.contains(t.name.as_str()))
            .map(|t| (t.name.as_str(), flatten(artifacts.tokenizer(t))))
            .collect();
        let mut sources: Vec<(String, Slot<Source>)> = embeddings
            .par_iter()
            .map(|e| {
                let tok = match e.tokenizer.as_str() {
                    WORD_LEVEL => Ok(None),
                    name => tokenizers[name].as_ref().map(Some).map_err(|err| format!("tokenizer {name:?}: {err}")),
                };
                let src = tok.and_then(|t| flatten(artifacts.embedding(cfg, e, t))).map(Source::Static);
                (e.name.clone(), src)
            })
            .collect();
        sources.extend(cfg.contextual.par_iter().map(|c| {
            let src = flatten(
                ContextualStore::load(&c.path)
                    .map_err(anyhow::Error::from)
                    .and_then(|s| Ok(Source::Contextual(s, path_sha256(&c.path)?))),
            );
            (c.name.clone(), src)
        }).collect::<Vec<_>>());
        let datasets: Vec<Slot<(Data, String)>> = cfg
            .datasets
            .par_iter()
            .map(|d| flatten(load_dataset(d).and_then(|data| Ok((data, path_sha256(&d.path)?)))))
            .collect();
        (tokenizers, sources, datasets)
    });
    drop(tokenizers);

    let reference = cfg.eval.reference_vocabulary.as_ref().map(|name| {
        match sources.iter().find(|(n, _)| n == name).map(|(_, s)| s) {
            Some(Ok(Source::Static(s))) => Ok(&s.store),
            Some(Err(e)) => Err(format!("reference vocabulary {name:?}: {e}")),
            _ => Err(format!("reference vocabulary {name:?} is not a static embedding")),
        }
    });

    let mut cells = Vec::new();
    for (di, d) in cfg.datasets.iter().enumerate() {
        for (si, (name, _)) in sources.iter().enumerate() {
            let contextual = cfg.contextual.iter().any(|c| &c.name == name);
            if d.task == Task::WordSim && contextual {
                continue;
            }
            cells.push((di, si));
        }
    }

    let done = AtomicUsize::new(0);
    let total = cells.len();
    let results: Vec<Slot<CellReport>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(di, si)| {
                let spec = &cfg.datasets[di];
                let (name, src) = &sources[si];
                let out = (|| -> Slot<CellReport> {
                    let src = src.as_ref().map_err(|e| format!("embedding {name:?}: {e}"))?;
                    let (data, data_sha) = datasets[di].as_ref().map_err(|e| format!("dataset {:?}: {e}", spec.name))?;
                    let result = evaluate(cfg, &eval_opts, spec, data, src, reference.as_ref()).map_err(|e| format!("{e:#}"))?;
                    Ok(CellReport {
                        dataset: spec.name.clone(),
                        task: spec.task,
                        source: name.clone(),
                        provenance: Provenance {
                            version: VERSION.into(),
                            config_sha256: config_sha256.clone(),
                            seed: cfg.seed,
                            artifacts: src.hashes(),
                            dataset_sha256: data_sha.clone(),
                        },
                        result,
                    })
                })();
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                match &out {
                    Ok(_) => log::info!("cell {name} x {} done", spec.name),
                    Err(e) => log::error!("cell {name} x {} failed: {e}", spec.name),
                }
                if opts.progress {
                    println!("[{n}/{total}] {name} x {}: {}", spec.name, if out.is_ok() { "ok" } else { "FAILED" });
                }
                out
            })
            .collect()
    });

    let mut statuses = Vec::new();
    for (&(di, si), r) in cells.iter().zip(&results) {
        let spec = &cfg.datasets[di];
        let source = sources[si].0.clone();
        let status = match r {
            Ok(report) => {
                let rel = format!("reports/{}/{}.json", safe_name(&spec.name), safe_name(&source));
                write_json(&cfg.output.join(&rel), report)?;
                CellStatus { dataset: spec.name.clone(), source, task: spec.task, report: Some(rel), error: None }
            }
            Err(e) => CellStatus { dataset: spec.name.clone(), source, task: spec.task, report: None, error: Some(e.clone()) },
        };
        statuses.push(status);
    }

    let mut table_files = Vec::new();
    for (di, spec) in cfg.datasets.iter().enumerate() {
        let reports: Vec<&CellReport> =
            cells.iter().zip(&results).filter(|((d, _), _)| *d == di).filter_map(|(_, r)| r.as_ref().ok()).collect();
        let failed: Vec<String> = statuses.iter().filter(|s| s.dataset == spec.name && s.error.is_some()).map(|s| s.source.clone()).collect();
        for (stem, mut table) in tables_for(spec, &reports) {
            if !failed.is_empty() {
                table.notes.push(format!("failed cells: {}", failed.join(", ")));
            }
            let base = cfg.output.join("tables").join(safe_name(&stem));
            write_json(&base.with_extension("json"), &table)?;
            write_atomic(&base.with_extension("md"), table.to_markdown().as_bytes())?;
            write_atomic(&base.with_extension("csv"), table.to_csv()?.as_bytes())?;
            table_files.push(format!("tables/{}.md", safe_name(&stem)));
        }
    }

    let summary = RunSummary { version: VERSION.into(), config_sha256, seed: cfg.seed, cells: statuses, tables: table_files };
    write_json(&cfg.output.join("summary.json"), &summary)?;
    Ok(summary)
}

fn evaluate(
    cfg: &RunConfig,
    opts: &EvalOptions,
    spec: &DatasetSpec,
    data: &Data,
    source: &Source,
    reference: Option<&Result<&VectorStore, String>>,
) -> Result<TaskResult> {
    let emb = source.as_embedding();
    Ok(match (spec.task, data) {
        (Task::WordSim, Data::Similarity(d)) => {
            let Source::Static(s) = source else { return Err(anyhow!("word similarity needs a static embedding")) };
            let [in_vocab, oov, overall] = match reference {
                None => eval_word_similarity_split(&s.store, &s.policy, d, opts, |t| s.store.contains(t))?,
                Some(Ok(r)) => eval_word_similarity_split(&s.store, &s.policy, d, opts, |t| r.contains(t))?,
                Some(Err(e)) => return Err(anyhow!("{e}")),
            };
            TaskResult::WordSim { in_vocab, oov, overall }
        }
        (Task::SentSim, Data::Similarity(d)) => TaskResult::Correlation(eval_sentence_similarity(&emb, d, opts)?),
        (Task::Ner, Data::Tagged(d)) => {
            let tagger = embeval::neural::TaggerConfig { seed: cfg.seed, ..cfg.tagger.clone() };
            TaskResult::Classification(eval_ner(&emb, d, &tagger, opts)?)
        }
        (Task::Docclass, Data::Docs(d)) => TaskResult::Classification(eval_docclass(&emb, d, opts)?),
        _ => unreachable!("dataset shape follows the task"),
    })
}

/// Result tables for one dataset, as `(file stem, table)`.
fn tables_for(spec: &DatasetSpec, reports: &[&CellReport]) -> Vec<(String, Table)> {
    match spec.task {
        Task::WordSim => {
            let mut split = Table::new(format!("{}: Pearson by vocabulary split", spec.name), &["In Vocab", "OOV", "Overall"]);
            let mut full = Table::new(format!("{}: correlations over all pairs", spec.name), &CORRELATION_COLUMNS);
            for r in reports {
                if let TaskResult::WordSim { in_vocab, oov, overall } = &r.result {
                    split.push(&r.source, vec![in_vocab.pearson, oov.pearson, overall.pearson]);
                    full.push_correlation(&r.source, overall);
                    split.notes.push(format!(
                        "{}: {} of {} pairs OOV, overall over {} pairs",
                        r.source, overall.n_oov, overall.n_total, overall.n_used
                    ));
                }
            }
            vec![(spec.name.clone(), split), (format!("{}-all", spec.name), full)]
        }
        Task::SentSim => {
            let mut t = Table::new(spec.name.clone(), &CORRELATION_COLUMNS);
            for r in reports {
                if let TaskResult::Correlation(c) = &r.result {
                    t.push_correlation(&r.source, c);
                }
            }
            vec![(spec.name.clone(), t)]
        }
        Task::Ner | Task::Docclass => {
            let mut t = Table::new(spec.name.clone(), &CLASSIFICATION_COLUMNS);
            for r in reports {
                if let TaskResult::Classification(c) = &r.result {
                    t.push_classification(&r.source, c);
                }
            }
            vec![(spec.name.clone(), t)]
        }
    }
}
