use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use embeval::corpus::TokenizedCorpus;
use embeval::datasets::{convert_standoff, load_conll, load_conll_dir, load_docclass, load_similarity, Schema};
use embeval::embeddings::{
    train_fasttext, train_word2vec, vector, write_sentences, Architecture, ContextualStore, EmbeddingSource,
    OovPolicy, OovPolicyKind, TrainConfig, VectorStore,
};
use embeval::evaluation::{
    cosine, doc_sentences, eval_docclass, eval_ner, eval_sentence_similarity, eval_word_similarity_split,
    similarity_sentences, tagged_sentences, Distance, EvalOptions, Table,
};
use embeval::neural::TaggerConfig;
use embeval::tokenizers::{self, TokenizerKind, TokenizerModel};
use embeval_cli::config::{CorpusSection, RunConfig, Task};
use embeval_cli::logging;
use embeval_cli::pipeline::{self, RunOptions, TaskResult, CACHE_ENV};
use serde::Serialize;

/// Exit code for invalid input or configuration.
const USAGE: u8 = 2;
/// Exit code when some grid cells failed.
const CELLS_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "embeval", version, about = "Train subword tokenizers and static embeddings, and evaluate embeddings")]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, filter and optionally mask and phrase-join raw text.
    Preprocess(PreprocessArgs),
    /// Train or apply a subword tokenizer.
    #[command(subcommand)]
    Tok(TokCommand),
    /// Train or inspect a static embedding.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Evaluate embeddings on one dataset, or run a whole experiment file.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Render result tables as Markdown or CSV.
    Report(ReportArgs),
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Args, Clone)]
struct TextArgs {
    /// Keep the original case.
    #[arg(long)]
    keep_case: bool,
    /// Keep punctuation-only tokens and edge punctuation.
    #[arg(long)]
    keep_punctuation: bool,
    /// Stopword list: "default", "none" or a file with one word per line.
    #[arg(long, default_value = "default")]
    stopwords: String,
}

impl TextArgs {
    fn section(&self) -> CorpusSection {
        CorpusSection {
            lowercase: !self.keep_case,
            strip_punctuation: !self.keep_punctuation,
            stopwords: Some(self.stopwords.clone()),
            ..CorpusSection::default()
        }
    }
}

#[derive(Args)]
struct PreprocessArgs {
    /// Raw text files, one sentence or paragraph per line.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Preprocessed corpus, one sentence of space-separated tokens per line.
    #[arg(long)]
    output: PathBuf,
    /// Also write token counts here.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[command(flatten)]
    text: TextArgs,
    /// Join frequent adjacent pairs into phrase tokens.
    #[arg(long)]
    bigrams: bool,
    #[arg(long)]
    bigram_min_count: Option<u64>,
    #[arg(long)]
    bigram_threshold: Option<f64>,
    /// Replace formulas, quantities and numbers by placeholders.
    #[arg(long)]
    mask_entities: bool,
    /// Override file for the masking patterns.
    #[arg(long)]
    mask_patterns: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TokCommand {
    /// Train a tokenizer on a preprocessed corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Target vocabulary size (minimum count for the word kind).
        #[arg(long, default_value_t = tokenizers::DEFAULT_VOCAB_SIZE)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Segment whitespace-separated words, one line in, one line out.
    Encode {
        #[arg(long)]
        model: PathBuf,
        /// Input file; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Print ids instead of pieces.
        #[arg(long)]
        ids: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Word,
    Bpe,
    Wordpiece,
    Unigram,
}

impl From<KindArg> for TokenizerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Word => TokenizerKind::Word,
            KindArg::Bpe => TokenizerKind::Bpe,
            KindArg::Wordpiece => TokenizerKind::WordPiece,
            KindArg::Unigram => TokenizerKind::Unigram,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Word2vec,
    Fasttext,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Cbow,
    Skipgram,
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Train Word2Vec or FastText vectors.
    Train(EmbedTrainArgs),
    /// Print a store summary and, for chosen words, their nearest neighbours.
    Inspect {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long = "word")]
        words: Vec<String>,
        #[arg(long, default_value_t = 5)]
        neighbours: usize,
    },
}

#[derive(Args)]
struct EmbedTrainArgs {
    /// Preprocessed corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "word2vec")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "skipgram")]
    arch: ArchArg,
    /// Train on this tokenizer's pieces instead of whole words.
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    min_n: Option<usize>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    buckets: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training threads. More than one is faster but not reproducible.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SourceArgs {
    /// Static vector file (text format, optional n-gram sidecar).
    #[arg(long, conflicts_with = "contextual", required_unless_present = "contextual")]
    vectors: Option<PathBuf>,
    /// Contextual vector file (JSON Lines).
    #[arg(long)]
    contextual: Option<PathBuf>,
    /// Tokenizer the vectors were trained on.
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    /// OOV policy: skip, zero, subword_mean or ngram_mean. Defaults to
    /// ngram_mean with an n-gram sidecar, subword_mean with a tokenizer,
    /// skip otherwise.
    #[arg(long)]
    oov: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Dataset file (or CoNLL directory for NER).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    text: TextArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Word similarity: in-vocab, OOV and overall correlations.
    WordSim {
        #[command(flatten)]
        args: EvalArgs,
        #[arg(long, value_enum, default_value = "umnsrs-csv")]
        schema: SchemaArg,
        /// Vector file whose vocabulary decides the in-vocab split.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Sentence similarity from mean token vectors.
    SentSim {
        #[command(flatten)]
        args: EvalArgs,
        #[arg(long, value_enum, default_value = "sts-tsv")]
        schema: SchemaArg,
    },
    /// NER with the BiLSTM probe on frozen vectors.
    Ner {
        #[command(flatten)]
        args: EvalArgs,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Document classification with KNN over mean document vectors.
    Docclass {
        #[command(flatten)]
        args: EvalArgs,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        distance: String,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Run every cell of an experiment file.
    All(AllArgs),
}

#[derive(Args)]
struct AllArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent cells.
    #[arg(long, short = 'j', default_value_t = 1)]
    jobs: usize,
    /// Override the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact cache directory (default: $EMBEVAL_CACHE, else <output>/cache).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Validate the configuration and stop.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaArg {
    UmnsrsCsv,
    StsTsv,
}

impl From<SchemaArg> for Schema {
    fn from(s: SchemaArg) -> Self {
        match s {
            SchemaArg::UmnsrsCsv => Schema::UmnsrsCsv,
            SchemaArg::StsTsv => Schema::StsTsv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// A table JSON file, or a run output directory (renders tables/*.json).
    input: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Write the sentences a task will look up as {id, tokens} JSON Lines,
    /// the input expected by contextual vector exporters.
    ExportSentences {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        schema: Option<SchemaArg>,
        #[command(flatten)]
        text: TextArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Convert stand-off entity annotations to CoNLL columns.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    SentSim,
    Ner,
    Docclass,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logging::init(cli.verbose, cli.quiet);
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Preprocess(a) => preprocess(a)?,
        Command::Tok(TokCommand::Train { corpus, kind, size, output }) => {
            let corpus = read_corpus(&corpus)?;
            let model = tokenizers::train(kind.into(), &corpus, size)?;
            model.save(&output)?;
            println!("{} vocabulary: {} entries", model.kind(), model.vocab_size());
        }
        Command::Tok(TokCommand::Encode { model, input, ids }) => encode(&model, input.as_deref(), ids)?,
        Command::Embed(EmbedCommand::Train(a)) => embed_train(a)?,
        Command::Embed(EmbedCommand::Inspect { vectors, words, neighbours }) => inspect(&vectors, &words, neighbours)?,
        Command::Eval(EvalCommand::All(a)) => return eval_all(a),
        Command::Eval(e) => eval_single(e)?,
        Command::Report(a) => report(a)?,
        Command::Dataset(DatasetCommand::ExportSentences { task, data, schema, text, output }) => {
            export_sentences(task, &data, schema, &text, &output)?
        }
        Command::Dataset(DatasetCommand::Convert { input, output }) => {
            let n = convert_standoff(BufReader::new(File::open(&input)?), BufWriter::new(File::create(&output)?))?;
            println!("converted {n} record(s)");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_corpus(path: &Path) -> Result<TokenizedCorpus> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(TokenizedCorpus::read_text(BufReader::new(f))?)
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let section = CorpusSection {
        paths: a.inputs,
        bigrams: a.bigrams,
        bigram_min_count: a.bigram_min_count,
        bigram_score_threshold: a.bigram_threshold,
        mask_entities: a.mask_entities,
        mask_patterns: a.mask_patterns,
        ..a.text.section()
    };
    let corpus = pipeline::load_corpus(&section)?;
    corpus.write_text(BufWriter::new(File::create(&a.output)?))?;
    if let Some(p) = a.counts {
        corpus.write_counts(BufWriter::new(File::create(p)?))?;
    }
    println!("{} sentences, {} tokens, {} types", corpus.sentences.len(), corpus.total_tokens, corpus.token_counts.len());
    Ok(())
}

fn encode(model: &Path, input: Option<&Path>, ids: bool) -> Result<()> {
    let model = TokenizerModel::load(model)?;
    let reader: Box<dyn BufRead> = match input {
        Some(p) => Box::new(BufReader::new(File::open(p)?)),
        None => Box::new(io::stdin().lock()),
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for line in reader.lines() {
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let enc = model.encode(&words);
        let cells: Vec<String> = if ids {
            enc.ids.iter().map(u32::to_string).collect()
        } else {
            enc.ids.iter().map(|&i| model.id_to_token(i).unwrap_or(model.unk_token()).to_string()).collect()
        };
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

fn embed_train(a: EmbedTrainArgs) -> Result<()> {
    let arch = match a.arch {
        ArchArg::Cbow => Architecture::Cbow,
        ArchArg::Skipgram => Architecture::Skipgram,
    };
    let mut cfg = TrainConfig::new(arch);
    macro_rules! set {
        ($($arg:ident => $f:ident),*) => { $(if let Some(v) = a.$arg { cfg.$f = v; })* };
    }
    set!(dim => dim, window => window, negatives => negatives, epochs => epochs, lr => learning_rate,
        min_count => min_count, subsample => subsample, min_n => min_n, max_n => max_n, buckets => buckets);
    cfg.seed = a.seed;
    cfg.workers = a.threads;
    let corpus = read_corpus(&a.corpus)?;
    let tok = a.tokenizer.as_deref().map(TokenizerModel::load).transpose()?;
    let (store, stats) = match a.model {
        ModelArg::Word2vec => train_word2vec(&corpus, tok.as_ref(), &cfg)?,
        ModelArg::Fasttext => train_fasttext(&corpus, tok.as_ref(), &cfg)?,
    };
    store.save(&a.output)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

#[derive(Serialize)]
struct WordInfo {
    word: String,
    in_vocab: bool,
    norm: Option<f64>,
    neighbours: Vec<(String, f64)>,
}

fn inspect(path: &Path, words: &[String], k: usize) -> Result<()> {
    let store = VectorStore::load(path)?;
    let policy = if store.ngrams().is_some() { OovPolicy::NgramMean } else { OovPolicy::Skip };
    let mut infos = Vec::new();
    for w in words {
        let v = vector(&store, w, &policy)?;
        let mut neighbours = Vec::new();
        if let Some(v) = &v {
            let mut scored: Vec<(String, f64)> = store
                .vocab()
                .iter()
                .enumerate()
                .filter(|(_, t)| *t != w)
                .map(|(i, t)| {
                    let row: Vec<f64> = store.row(i).iter().map(|&x| x as f64).collect();
                    Ok((t.clone(), cosine(v, &row)?))
                })
                .collect::<Result<_, embeval::evaluation::EvalError>>()?;
            scored.retain(|(_, c)| !c.is_nan());
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            scored.truncate(k);
            neighbours = scored;
        }
        infos.push(WordInfo {
            word: w.clone(),
            in_vocab: store.contains(w),
            norm: v.map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()),
            neighbours,
        });
    }
    let summary = serde_json::json!({
        "kind": store.kind(),
        "dim": store.dim(),
        "rows": store.len(),
        "ngrams": store.ngrams().map(|t| serde_json::json!({"min_n": t.min_n, "max_n": t.max_n, "buckets": t.buckets})),
        "words": infos,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

enum Loaded {
    Static(VectorStore, OovPolicy),
    Contextual(ContextualStore),
}

impl Loaded {
    fn source(&self) -> EmbeddingSource<'_> {
        match self {
            Loaded::Static(store, policy) => EmbeddingSource::Static { store, policy },
            Loaded::Contextual(c) => EmbeddingSource::Contextual(c),
        }
    }
}

fn load_source(a: &SourceArgs) -> Result<Loaded> {
    if let Some(p) = &a.contextual {
        return Ok(Loaded::Contextual(ContextualStore::load(p)?));
    }
    let path = a.vectors.as_ref().expect("clap requires vectors or contextual");
    let store = VectorStore::load(path)?;
    let tok = a.tokenizer.as_deref().map(TokenizerModel::load).transpose()?.map(Arc::new);
    let kind = match &a.oov {
        Some(s) => s.parse::<OovPolicyKind>()?,
        None if store.ngrams().is_some() => OovPolicyKind::NgramMean,
        None if tok.is_some() => OovPolicyKind::SubwordMean,
        None => OovPolicyKind::Skip,
    };
    let policy = match kind {
        OovPolicyKind::Skip => OovPolicy::Skip,
        OovPolicyKind::Zero => OovPolicy::Zero,
        OovPolicyKind::NgramMean => OovPolicy::NgramMean,
        OovPolicyKind::SubwordMean => match tok {
            Some(t) => OovPolicy::SubwordMean(t),
            None => bail!("--oov subword_mean needs --tokenizer"),
        },
    };
    Ok(Loaded::Static(store, policy))
}

fn options(text: &TextArgs, seed: u64) -> Result<EvalOptions> {
    Ok(EvalOptions { text: pipeline::preprocess_config(&text.section())?, seed, ..EvalOptions::default() })
}

fn eval_single(cmd: EvalCommand) -> Result<()> {
    let (args, result) = match cmd {
        EvalCommand::WordSim { args, schema, reference } => {
            let Loaded::Static(store, policy) = load_source(&args.source)? else {
                bail!("word similarity needs --vectors");
            };
            let data = load_similarity(&args.data, schema.into())?;
            let opts = options(&args.text, args.seed)?;
            let reference = reference.as_deref().map(VectorStore::load).transpose()?;
            let vocab = reference.as_ref().unwrap_or(&store);
            let [in_vocab, oov, overall] = eval_word_similarity_split(&store, &policy, &data, &opts, |t| vocab.contains(t))?;
            (args, TaskResult::WordSim { in_vocab, oov, overall })
        }
        EvalCommand::SentSim { args, schema } => {
            let src = load_source(&args.source)?;
            let data = load_similarity(&args.data, schema.into())?;
            let r = eval_sentence_similarity(&src.source(), &data, &options(&args.text, args.seed)?)?;
            (args, TaskResult::Correlation(r))
        }
        EvalCommand::Ner { args, hidden, epochs, lr, batch_size } => {
            let src = load_source(&args.source)?;
            let data = if args.data.is_dir() { load_conll_dir(&args.data)? } else { load_conll(&args.data)? };
            let d = TaggerConfig::default();
            let cfg = TaggerConfig {
                hidden_size: hidden.unwrap_or(d.hidden_size),
                epochs: epochs.unwrap_or(d.epochs),
                lr: lr.unwrap_or(d.lr),
                batch_size: batch_size.unwrap_or(d.batch_size),
                seed: args.seed,
                ..d
            };
            let r = eval_ner(&src.source(), &data, &cfg, &options(&args.text, args.seed)?)?;
            (args, TaskResult::Classification(r))
        }
        EvalCommand::Docclass { args, k, distance, test_fraction } => {
            let src = load_source(&args.source)?;
            let data = load_docclass(&args.data)?;
            let opts = EvalOptions { k, distance: distance.parse::<Distance>()?, test_fraction, ..options(&args.text, args.seed)? };
            (args, TaskResult::Classification(eval_docclass(&src.source(), &data, &opts)?))
        }
        EvalCommand::All(_) => unreachable!("handled by eval_all"),
    };
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    match args.output {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn eval_all(a: AllArgs) -> Result<ExitCode> {
    let (mut cfg, bytes) = RunConfig::load(&a.config)?;
    if let Some(o) = a.output {
        cfg.output = o;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return Ok(ExitCode::from(USAGE));
    }
    if a.check {
        println!("configuration ok: {} embedding(s), {} dataset(s)", cfg.all_embeddings().len() + cfg.contextual.len(), cfg.datasets.len());
        return Ok(ExitCode::SUCCESS);
    }
    let opts = RunOptions { jobs: a.jobs, cache: a.cache.or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from)), ..RunOptions::default() };
    let summary = pipeline::run(&cfg, &bytes, &opts)?;
    let failed = summary.failed();
    if io::stdout().is_terminal() || !failed.is_empty() {
        println!("{} cell(s), {} failed; results in {}", summary.cells.len(), failed.len(), cfg.output.display());
    }
    if failed.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for c in &failed {
        eprintln!("failed: {} x {} ({}): {}", c.source, c.dataset, c.task.as_str(), c.error.as_deref().unwrap_or(""));
    }
    Ok(ExitCode::from(CELLS_FAILED))
}

fn report(a: ReportArgs) -> Result<()> {
    let files: Vec<PathBuf> = if a.input.is_dir() {
        let dir = if a.input.join("tables").is_dir() { a.input.join("tables") } else { a.input.clone() };
        let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![a.input.clone()]
    };
    if files.is_empty() {
        bail!("no table JSON files under {}", a.input.display());
    }
    let mut out = String::new();
    for (i, f) in files.iter().enumerate() {
        let table: Table = serde_json::from_reader(BufReader::new(File::open(f)?))
            .with_context(|| format!("reading table {}", f.display()))?;
        if i > 0 {
            out.push('\n');
        }
        match a.format {
            Format::Md => out.push_str(&table.to_markdown()),
            Format::Csv => out.push_str(&table.to_csv()?),
        }
    }
    match a.output {
        Some(p) => std::fs::write(p, out)?,
        None => io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}

fn export_sentences(task: TaskArg, data: &Path, schema: Option<SchemaArg>, text: &TextArgs, output: &Path) -> Result<()> {
    let opts = options(text, 1)?;
    let sentences = match task {
        TaskArg::SentSim => similarity_sentences(&load_similarity(data, schema.unwrap_or(SchemaArg::StsTsv).into())?, &opts),
        TaskArg::Ner => tagged_sentences(&if data.is_dir() { load_conll_dir(data)? } else { load_conll(data)? }),
        TaskArg::Docclass => doc_sentences(&load_docclass(data)?, &opts),
    };
    let mut out = BufWriter::new(File::create(output)?);
    write_sentences(&mut out, sentences.iter().map(|(id, t)| (id.as_str(), t.as_slice())))?;
    out.flush()?;
    println!("wrote {} sentence(s) for {}", sentences.len(), match task {
        TaskArg::SentSim => Task::SentSim,
        TaskArg::Ner => Task::Ner,
        TaskArg::Docclass => Task::Docclass,
    }.as_str());
    Ok(())
}
