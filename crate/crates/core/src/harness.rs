//! Query files, experiment runs and CSV reports.
//!
//! Query files use the classic topic layout:
//!
//! ```text
//! <top>
//! <num>Q1</num>
//! <title>sunderbans national park</title>
//! <desc>...</desc>
//! <narr>...</narr>
//! </top>
//! ```
//!
//! `desc` and `narr` may be omitted.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use crate::affordance::compute_query_affordance;
use crate::casebase::{BuildConfig, CaseBase};
use crate::error::{Error, Result};
use crate::retrieval::{rerank, retrieve_top_k, InvertedIndex, Query, RankedResult};
use crate::segmenter::Tokenizer;

static TOPIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<top>(.*?)</top>").unwrap());

fn field(body: &str, tag: &str) -> Option<String> {
    let re = Regex::new(&format!(r"(?is)<{tag}>(.*?)</{tag}>")).unwrap();
    re.captures(body).map(|c| c[1].trim().to_string())
}

/// Parses a topic file. Titles and descriptions go through `tokenizer`.
pub fn parse_queries(text: &str, tokenizer: &Tokenizer) -> Result<Vec<Query>> {
    parse_queries_named(text, tokenizer, "queries")
}

pub fn load_queries(path: &Path, tokenizer: &Tokenizer) -> Result<Vec<Query>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_queries_named(&text, tokenizer, &path.display().to_string())
}

fn parse_queries_named(text: &str, tokenizer: &Tokenizer, source: &str) -> Result<Vec<Query>> {
    let mut seen = HashSet::new();
    let mut queries = Vec::new();
    for (i, topic) in TOPIC.captures_iter(text).enumerate() {
        let body = &topic[1];
        let query_id = field(body, "num")
            .map(|n| n.trim_start_matches("Number:").trim().to_string())
            .filter(|n| !n.is_empty())
            .ok_or_else(|| Error::format(source, format!("topic {} has no <num>", i + 1)))?;
        if !seen.insert(query_id.clone()) {
            return Err(Error::format(source, format!("duplicate query {query_id}")));
        }
        let title = tokenizer.tokenize(&field(body, "title").unwrap_or_default());
        if title.is_empty() {
            return Err(Error::format(
                source,
                format!("query {query_id} has an empty title after stop-word removal"),
            ));
        }
        queries.push(Query {
            query_id,
            title,
            desc: tokenizer.tokenize(&field(body, "desc").unwrap_or_default()),
            narr: field(body, "narr").unwrap_or_default(),
        });
    }
    if queries.is_empty() {
        return Err(Error::format(source, "no <top> topics found"));
    }
    Ok(queries)
}

/// Relevance judgments: `query_id<TAB>doc_id<TAB>0|1` per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    relevant: HashMap<String, HashSet<String>>,
}

impl Qrels {
    pub fn parse(text: &str) -> Result<Self> {
        let mut qrels = Qrels::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [query_id, doc_id, label] = cols[..] else {
                return Err(Error::format("qrels", format!("line {}: expected 3 tab-separated columns", i + 1)));
            };
            match label {
                "1" => {
                    qrels.relevant.entry(query_id.to_string()).or_default().insert(doc_id.to_string());
                }
                "0" => {}
                other => {
                    return Err(Error::format("qrels", format!("line {}: label must be 0 or 1, got {other}", i + 1)));
                }
            }
        }
        Ok(qrels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.relevant.get(query_id).is_some_and(|d| d.contains(doc_id))
    }

    /// Fraction of the first `cutoff` entries of `order` that are relevant.
    pub fn precision_at(&self, query_id: &str, order: &[&str], cutoff: usize) -> f64 {
        let hits = order.iter().take(cutoff).filter(|d| self.is_relevant(query_id, d)).count();
        hits as f64 / cutoff as f64
    }
}

/// Kendall's tau-a between two orderings of the same items. A single item
/// (or none) counts as perfect agreement.
pub fn compare_rankings<S: AsRef<str>>(baseline: &[S], other: &[S]) -> Result<f64> {
    let position: HashMap<&str, usize> = other.iter().enumerate().map(|(i, d)| (d.as_ref(), i)).collect();
    let same_set = baseline.len() == other.len()
        && position.len() == other.len()
        && baseline.iter().map(AsRef::as_ref).collect::<HashSet<_>>().len() == baseline.len()
        && baseline.iter().all(|d| position.contains_key(d.as_ref()));
    if !same_set {
        return Err(Error::Input("rankings must be permutations of the same items".into()));
    }
    let n = baseline.len();
    if n < 2 {
        return Ok(1.0);
    }
    let ranks: Vec<usize> = baseline.iter().map(|d| position[d.as_ref()]).collect();
    let mut balance = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            balance += if ranks[i] < ranks[j] { 1 } else { -1 };
        }
    }
    Ok(balance as f64 / (n * (n - 1) / 2) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Append description tokens to the title.
    pub use_desc: bool,
    /// Compare against revised case vectors.
    pub use_revised: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub query_id: String,
    pub doc_id: String,
    pub baseline_rank: usize,
    pub final_rank: usize,
    pub baseline_score: f64,
    pub affordance_cosine: f64,
    pub final_score: f64,
    pub relevant: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    pub baseline_p5: f64,
    pub final_p5: f64,
    pub baseline_p10: f64,
    pub final_p10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub query_id: String,
    pub kendall_tau: f64,
    pub pool_size: usize,
    pub precision: Option<Precision>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
    pub config: BuildConfig,
    pub options: RunOptions,
    pub lexicon_fingerprint: String,
}

fn run_query(query: &Query, cb: &CaseBase, index: &InvertedIndex, config: &BuildConfig, use_desc: bool, use_revised: bool) -> Result<RankedResult> {
    let terms = query.terms(use_desc);
    let pool = retrieve_top_k(&terms, index, cb, config.k_retrieve);
    let query_av = compute_query_affordance(&terms, cb.lexicon());
    rerank(&pool, &query_av, cb, config.alpha, use_revised)
}

/// Retrieves, re-ranks and tabulates every query.
///
/// With `config.eta > 0` queries run sequentially in file order, each one
/// revising the affordance vectors of its candidate pool before the next
/// query, and later queries compare against the revised vectors. Otherwise
/// queries run in parallel; output order does not depend on scheduling.
pub fn run_experiment(
    cb: &mut CaseBase,
    index: &InvertedIndex,
    queries: &[Query],
    config: &BuildConfig,
    options: RunOptions,
) -> Result<RunReport> {
    config.validate()?;
    let results: Vec<(String, RankedResult)> = if config.eta > 0.0 {
        let mut out = Vec::with_capacity(queries.len());
        for query in queries {
            let ranked = run_query(query, cb, index, config, options.use_desc, true)?;
            let query_av = compute_query_affordance(&query.terms(options.use_desc), cb.lexicon());
            let ordinals: Vec<usize> = ranked.entries.iter().map(|e| e.case).collect();
            cb.revise_cases(&ordinals, &query_av, config.eta)?;
            out.push((query.query_id.clone(), ranked));
        }
        out
    } else {
        let cb = &*cb;
        queries
            .par_iter()
            .map(|q| Ok((q.query_id.clone(), run_query(q, cb, index, config, options.use_desc, options.use_revised)?)))
            .collect::<Result<_>>()?
    };

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (query_id, ranked) in &results {
        let tau = compare_rankings(&ranked.baseline_order(), &ranked.final_order())?;
        summary.push(SummaryRow {
            query_id: query_id.clone(),
            kendall_tau: tau,
            pool_size: ranked.len(),
            precision: None,
        });
        rows.extend(ranked.entries.iter().map(|e| ReportRow {
            query_id: query_id.clone(),
            doc_id: e.doc_id.clone(),
            baseline_rank: e.baseline_rank,
            final_rank: e.final_rank,
            baseline_score: e.baseline_score,
            affordance_cosine: e.affordance_cosine,
            final_score: e.final_score,
            relevant: None,
        }));
    }
    rows.sort_by(|a, b| a.query_id.cmp(&b.query_id).then(a.final_rank.cmp(&b.final_rank)));
    summary.sort_by(|a, b| a.query_id.cmp(&b.query_id));

    Ok(RunReport {
        rows,
        summary,
        config: *config,
        options,
        lexicon_fingerprint: cb.lexicon_fingerprint(),
    })
}

type RankedIds<'a> = Vec<(usize, &'a str)>;

impl RunReport {
    /// Adds relevance flags to rows and precision at 5 and 10 to the
    /// summary.
    pub fn apply_qrels(&mut self, qrels: &Qrels) {
        let mut orders: BTreeMap<&str, (RankedIds, RankedIds)> = BTreeMap::new();
        for row in &mut self.rows {
            row.relevant = Some(qrels.is_relevant(&row.query_id, &row.doc_id));
        }
        for row in &self.rows {
            let entry = orders.entry(&row.query_id).or_default();
            entry.0.push((row.baseline_rank, &row.doc_id));
            entry.1.push((row.final_rank, &row.doc_id));
        }
        for s in &mut self.summary {
            let (mut base, mut fin) = orders.remove(s.query_id.as_str()).unwrap_or_default();
            base.sort();
            fin.sort();
            let base: Vec<&str> = base.into_iter().map(|(_, d)| d).collect();
            let fin: Vec<&str> = fin.into_iter().map(|(_, d)| d).collect();
            s.precision = Some(Precision {
                baseline_p5: qrels.precision_at(&s.query_id, &base, 5),
                final_p5: qrels.precision_at(&s.query_id, &fin, 5),
                baseline_p10: qrels.precision_at(&s.query_id, &base, 10),
                final_p10: qrels.precision_at(&s.query_id, &fin, 10),
            });
        }
    }
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config: &'a BuildConfig,
    lexicon_fingerprint: &'a str,
    use_desc: bool,
    use_revised: bool,
}

/// Writes `rows.csv`, `summary.csv` and `config.json` into `dir`.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let with_qrels = report.summary.iter().any(|s| s.precision.is_some());

    let rows_path = dir.join("rows.csv");
    let mut rows = csv::Writer::from_path(&rows_path).map_err(|e| csv_error(&rows_path, e))?;
    let mut header = vec![
        "query_id",
        "doc_id",
        "baseline_rank",
        "final_rank",
        "baseline_score",
        "affordance_cosine",
        "final_score",
    ];
    if with_qrels {
        header.push("relevant");
    }
    rows.write_record(&header).map_err(|e| csv_error(&rows_path, e))?;
    for r in &report.rows {
        let mut record = vec![
            r.query_id.clone(),
            r.doc_id.clone(),
            r.baseline_rank.to_string(),
            r.final_rank.to_string(),
            fixed(r.baseline_score),
            fixed(r.affordance_cosine),
            fixed(r.final_score),
        ];
        if with_qrels {
            record.push(u8::from(r.relevant.unwrap_or(false)).to_string());
        }
        rows.write_record(&record).map_err(|e| csv_error(&rows_path, e))?;
    }
    rows.flush().map_err(|e| Error::io(&rows_path, e))?;

    let summary_path = dir.join("summary.csv");
    let mut summary = csv::Writer::from_path(&summary_path).map_err(|e| csv_error(&summary_path, e))?;
    let mut header = vec!["query_id", "kendall_tau", "pool_size"];
    if with_qrels {
        header.extend(["baseline_p5", "final_p5", "baseline_p10", "final_p10"]);
    }
    summary.write_record(&header).map_err(|e| csv_error(&summary_path, e))?;
    for s in &report.summary {
        let mut record = vec![s.query_id.clone(), fixed(s.kendall_tau), s.pool_size.to_string()];
        if let Some(p) = s.precision {
            record.extend([p.baseline_p5, p.final_p5, p.baseline_p10, p.final_p10].map(fixed));
        }
        summary.write_record(&record).map_err(|e| csv_error(&summary_path, e))?;
    }
    summary.flush().map_err(|e| Error::io(&summary_path, e))?;

    let echo = ConfigEcho {
        config: &report.config,
        lexicon_fingerprint: &report.lexicon_fingerprint,
        use_desc: report.options.use_desc,
        use_revised: report.options.use_revised,
    };
    let config_path = dir.join("config.json");
    let mut json = serde_json::to_string_pretty(&echo).expect("config serializes");
    json.push('\n');
    std::fs::write(&config_path, json).map_err(|e| Error::io(&config_path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
