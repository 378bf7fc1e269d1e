use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow_lite::Context as _;
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use equnova::ndns::{evaluate_run, report};
use equnova::pipeline::{run_batch, EntailmentBackend, GeneratorBackend, RelevanceBackend, Task};
use equnova::{
    Corpus, Index, IndexConfig, Judgments, PipelineConfig, QuestionSet, Run, Scorers, Variant,
};

/// Tiny context-attaching helper so errors name the file involved.
mod anyhow_lite {
    pub type Error = Box<dyn std::error::Error + Send + Sync>;

    pub trait Context<T> {
        fn context(self, what: impl FnOnce() -> String) -> Result<T, Error>;
    }

    impl<T, E: std::fmt::Display> Context<T> for Result<T, E> {
        fn context(self, what: impl FnOnce() -> String) -> Result<T, Error> {
            self.map_err(|e| format!("{}: {e}", what()).into())
        }
    }
}

type CliResult<T> = Result<T, anyhow_lite::Error>;

#[derive(Parser)]
#[command(
    name = "equnova",
    version,
    about = "Novelty-aware answer re-ranking and NDNS evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Relaxed,
    Partial,
    Exact,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 index over the contexts of a corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        /// Keep token case.
        #[arg(long)]
        no_lowercase: bool,
    },
    /// Retrieve and re-rank answers for a question set, writing a run file.
    Run {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        questions: PathBuf,
        /// Pipeline configuration (JSON); missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Corpus to use instead of the one recorded in the index.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Emit the relevance-ranked sentences without novelty re-ranking.
        #[arg(long)]
        no_rerank: bool,
        /// Write one EQG dump per question into this directory.
        #[arg(long)]
        dump_eqg: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum)]
        relevance: Option<RelevanceBackend>,
        #[arg(long, value_enum)]
        qgen: Option<GeneratorBackend>,
        #[arg(long, value_enum)]
        entail: Option<EntailmentBackend>,
        #[arg(long)]
        bridge_url: Option<String>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long)]
        run_tag: Option<String>,
        #[arg(long, value_enum)]
        task: Option<Task>,
        /// Abort on the first failing question.
        #[arg(long)]
        strict: bool,
    },
    /// Score a run file against nugget judgments.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        variant: VariantArg,
        /// Print the JSON report.
        #[arg(long)]
        json: bool,
        /// Print the text table (default when --json is not given).
        #[arg(long)]
        table: bool,
        /// Exit non-zero when any run answer cannot be resolved in the corpus.
        #[arg(long)]
        strict: bool,
    },
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).context(|| path.display().to_string())?,
    ))
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    Corpus::parse(open(path)?).context(|| path.display().to_string())
}

fn single_variant(v: VariantArg) -> Option<Variant> {
    match v {
        VariantArg::Relaxed => Some(Variant::Relaxed),
        VariantArg::Partial => Some(Variant::Partial),
        VariantArg::Exact => Some(Variant::Exact),
        VariantArg::All => None,
    }
}

fn cmd_index(corpus_path: &Path, out: &Path, k1: f64, b: f64, no_lowercase: bool) -> CliResult<()> {
    let corpus = load_corpus(corpus_path)?;
    let config = IndexConfig {
        k1,
        b,
        lowercase: !no_lowercase,
        ..IndexConfig::default()
    };
    let index = Index::build(&corpus, config)?;
    let recorded = fs::canonicalize(corpus_path).unwrap_or_else(|_| corpus_path.to_path_buf());
    let mut w = BufWriter::new(File::create(out).context(|| out.display().to_string())?);
    index.write_to(
        &mut w,
        &corpus.fingerprint(),
        Some(&recorded.to_string_lossy()),
    )?;
    w.flush()?;
    info!(
        "indexed {} contexts ({} sentences, {} terms)",
        index.n_contexts,
        corpus.n_sentences(),
        index.postings.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    index_path: &Path,
    questions_path: &Path,
    config_path: Option<&Path>,
    out: &Path,
    corpus_path: Option<&Path>,
    dump_eqg: Option<&Path>,
    workers: Option<usize>,
    strict: bool,
    task: Option<Task>,
    overrides: impl FnOnce(&mut PipelineConfig),
) -> CliResult<bool> {
    let mut config = match config_path {
        Some(p) => serde_json::from_reader(open(p)?).context(|| p.display().to_string())?,
        None => PipelineConfig::default(),
    };
    overrides(&mut config);
    config.validate()?;

    let stored =
        Index::read_from(open(index_path)?).context(|| index_path.display().to_string())?;
    let corpus_path = match (corpus_path, &stored.corpus_path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err("index records no corpus path; pass --corpus".into()),
    };
    let corpus = load_corpus(&corpus_path)?;
    if corpus.fingerprint() != stored.corpus_fingerprint {
        return Err(format!(
            "{} does not match the corpus the index was built from",
            corpus_path.display()
        )
        .into());
    }
    let questions = QuestionSet::load(open(questions_path)?, task)
        .context(|| questions_path.display().to_string())?;
    let index = Arc::new(stored.index);
    let scorers = Scorers::from_config(&config, index.clone())?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build()?;
    let output = pool.install(|| {
        run_batch(
            &questions,
            &corpus,
            &index,
            &scorers,
            &config,
            dump_eqg.is_some(),
            strict,
        )
    })?;

    let mut w = BufWriter::new(File::create(out).context(|| out.display().to_string())?);
    w.write_all(output.run_file().as_bytes())?;
    w.flush()?;

    if let Some(dir) = dump_eqg {
        fs::create_dir_all(dir)?;
        for run in &output.runs {
            if let Some(dump) = &run.eqg {
                let name: String = run
                    .question_id
                    .chars()
                    .map(|c| {
                        if c.is_alphanumeric() || c == '-' || c == '_' {
                            c
                        } else {
                            '_'
                        }
                    })
                    .collect();
                let path = dir.join(format!("{name}.json"));
                let mut f = BufWriter::new(File::create(&path)?);
                serde_json::to_writer_pretty(&mut f, dump)?;
                f.write_all(b"\n")?;
            }
        }
    }
    for (qid, e) in &output.failures {
        eprintln!("question {qid} failed: {e}");
    }
    Ok(output.failures.is_empty())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    run_path: &Path,
    judgments_path: &Path,
    corpus_path: &Path,
    variant: VariantArg,
    json: bool,
    table: bool,
    strict: bool,
) -> CliResult<bool> {
    let run = Run::load(open(run_path)?).context(|| run_path.display().to_string())?;
    let judgments =
        Judgments::load(open(judgments_path)?).context(|| judgments_path.display().to_string())?;
    let corpus = load_corpus(corpus_path)?;
    let variants: Vec<Variant> = match single_variant(variant) {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    let per_variant: Vec<_> = variants
        .iter()
        .map(|&v| evaluate_run::<f64>(&run, &judgments, &corpus, v))
        .collect();
    let unjudged: Vec<String> = run
        .questions
        .keys()
        .filter(|q| !judgments.questions.contains_key(*q))
        .cloned()
        .collect();
    let rep = report(&per_variant, unjudged);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &rep)?;
        writeln!(out)?;
    }
    if table || !json {
        write!(out, "{}", rep.to_table())?;
    }
    if !rep.unjudged_questions.is_empty() {
        warn!(
            "{} run questions have no judgments",
            rep.unjudged_questions.len()
        );
    }
    if rep.greedy_gaps > 0 {
        warn!(
            "{} questions scored above the greedy ideal",
            rep.greedy_gaps
        );
    }
    if rep.unresolved > 0 {
        eprintln!(
            "{} run answers could not be resolved in the corpus",
            rep.unresolved
        );
        return Ok(!strict);
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index {
            corpus,
            out,
            k1,
            b,
            no_lowercase,
        } => cmd_index(&corpus, &out, k1, b, no_lowercase).map(|()| true),
        Command::Run {
            index,
            questions,
            config,
            out,
            corpus,
            no_rerank,
            dump_eqg,
            workers,
            relevance,
            qgen,
            entail,
            bridge_url,
            variant,
            run_tag,
            task,
            strict,
        } => cmd_run(
            &index,
            &questions,
            config.as_deref(),
            &out,
            corpus.as_deref(),
            dump_eqg.as_deref(),
            workers,
            strict,
            task,
            |c| {
                if no_rerank {
                    c.rerank = false;
                }
                if let Some(r) = relevance {
                    c.relevance = r;
                }
                if let Some(q) = qgen {
                    c.qgen = q;
                }
                if let Some(e) = entail {
                    c.entail = e;
                }
                if let Some(url) = bridge_url {
                    c.bridge.url = url;
                }
                if let Some(v) = variant.and_then(single_variant) {
                    c.variant = v;
                }
                if let Some(tag) = run_tag {
                    c.run_tag = tag;
                }
            },
        ),
        Command::Eval {
            run,
            judgments,
            corpus,
            variant,
            json,
            table,
            strict,
        } => cmd_eval(&run, &judgments, &corpus, variant, json, table, strict),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
