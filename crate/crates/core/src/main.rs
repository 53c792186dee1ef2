use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use tcbr::affordance::compute_query_affordance;
use tcbr::casebase::{load_case_base, populate_case_base, save_case_base, DEFAULT_K_RETRIEVE, DEFAULT_K_TERMS};
use tcbr::harness::{emit_report, load_queries, run_experiment, Qrels, RunOptions};
use tcbr::retrieval::{rerank, retrieve_top_k};
use tcbr::segmenter::DEFAULT_LINK_THRESHOLD;
use tcbr::{BuildConfig, CaseBase, Error, InvertedIndex, Lexicon, Query, Tokenizer};

/// Affordance-aware case retrieval over HTML corpora.
#[derive(Debug, Parser)]
#[command(name = "tcbr", version)]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Log progress and skipped documents to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a case base from a directory of HTML files.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_TERMS)]
        k_terms: usize,
        #[arg(long, default_value_t = DEFAULT_LINK_THRESHOLD)]
        tau: f64,
        /// Replace the built-in English stop words (one per line).
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Run one free-text query and print the re-ranked pool.
    Query {
        #[arg(long)]
        cb: PathBuf,
        #[arg(long)]
        text: String,
        #[command(flatten)]
        ranking: Ranking,
        #[arg(long)]
        use_revised: bool,
    },
    /// Run a query file and write CSV reports.
    Eval {
        #[arg(long)]
        cb: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ranking: Ranking,
        /// Append <desc> tokens to the title.
        #[arg(long)]
        use_desc: bool,
        #[arg(long)]
        use_revised: bool,
        /// Relevance judgments: query_id<TAB>doc_id<TAB>0|1.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Revise the retrieved cases after each query at this rate.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
    },
}

#[derive(Debug, Args)]
struct Ranking {
    /// Candidate pool size.
    #[arg(long, default_value_t = DEFAULT_K_RETRIEVE)]
    k: usize,
    /// Weight of the baseline score in the final blend.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Refuse to run unless the case base was built with this lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

impl Ranking {
    fn open(&self, path: &Path) -> tcbr::Result<CaseBase> {
        let cb = load_case_base(path)?;
        if let Some(lexicon) = &self.lexicon {
            cb.ensure_compatible(&Lexicon::load(lexicon)?)?;
        }
        Ok(cb)
    }

    fn config(&self, cb: &CaseBase, eta: f64) -> tcbr::Result<BuildConfig> {
        let config = BuildConfig {
            k_retrieve: self.k,
            alpha: self.alpha,
            eta,
            ..cb.config
        };
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> tcbr::Result<()> {
    match cli.command {
        Command::Build {
            corpus,
            lexicon,
            out,
            k_terms,
            tau,
            stopwords,
        } => {
            let lexicon = Lexicon::load(&lexicon)?;
            let tokenizer = match stopwords {
                Some(path) => Tokenizer::from_stop_word_file(&path)?,
                None => Tokenizer::english(),
            };
            for (topic, term) in lexicon.unmatchable_terms(&tokenizer) {
                warn!("term {term:?} of topic {topic} contains a stop word and will never match");
            }
            let config = BuildConfig {
                k_terms,
                tau,
                ..BuildConfig::default()
            };
            let cb = populate_case_base(&corpus, lexicon, tokenizer, config)?;
            save_case_base(&cb, &out)?;
            info!("wrote {} cases to {}", cb.len(), out.display());
        }
        Command::Query {
            cb,
            text,
            ranking,
            use_revised,
        } => {
            let cb = ranking.open(&cb)?;
            let config = ranking.config(&cb, 0.0)?;
            let index = InvertedIndex::build(&cb)?;
            let query = Query::from_text("query", &text, cb.tokenizer())?;
            let pool = retrieve_top_k(&query.title, &index, &cb, config.k_retrieve);
            let query_av = compute_query_affordance(&query.title, cb.lexicon());
            let ranked = rerank(&pool, &query_av, &cb, config.alpha, use_revised)?;

            let mut out = std::io::stdout().lock();
            let write = |out: &mut std::io::StdoutLock, line: String| {
                writeln!(out, "{line}").map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
            };
            write(&mut out, "rank\tdoc_id\tbaseline_rank\tbaseline_score\taffordance_cosine\tfinal_score".into())?;
            for e in &ranked.entries {
                write(
                    &mut out,
                    format!(
                        "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                        e.final_rank, e.doc_id, e.baseline_rank, e.baseline_score, e.affordance_cosine, e.final_score
                    ),
                )?;
            }
        }
        Command::Eval {
            cb,
            queries,
            out,
            ranking,
            use_desc,
            use_revised,
            qrels,
            eta,
        } => {
            let mut cb = ranking.open(&cb)?;
            let config = ranking.config(&cb, eta)?;
            let index = InvertedIndex::build(&cb)?;
            let queries = load_queries(&queries, cb.tokenizer())?;
            let qrels = qrels.map(|p| Qrels::load(&p)).transpose()?;
            let mut report = run_experiment(&mut cb, &index, &queries, &config, RunOptions { use_desc, use_revised })?;
            if let Some(qrels) = &qrels {
                report.apply_qrels(qrels);
            }
            emit_report(&report, &out)?;
            info!("{} queries, {} rows written to {}", report.summary.len(), report.rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: cannot start {workers} workers: {e}");
            return ExitCode::from(2);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
