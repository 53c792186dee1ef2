//! Case construction, persistence and affordance revision.
//!
//! Each admitted document becomes a [`Case`]: a weighted set of the most
//! discriminative terms of each block (the problem description) and the
//! summed block affordance vector (the solution). Building runs in two
//! passes so document frequencies exist before any term is selected.
//!
//! On disk a case base is line-delimited JSON with sorted keys: a header
//! record, one record per case, then the corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use walkdir::WalkDir;

use crate::affordance::{compute_block_affordance, compute_doc_affordance, AffordanceVector};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::segmenter::{
    dedupe_sentences, parse_document, segment_blocks, RawDocument, Tokenizer,
    DEFAULT_LINK_THRESHOLD,
};

pub const DEFAULT_K_TERMS: usize = 20;
pub const DEFAULT_K_RETRIEVE: usize = 10;

/// Rounds to 12 significant digits, the precision of the file format.
pub(crate) fn canonical(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    /// Terms kept per block for the problem description.
    pub k_terms: usize,
    /// Link-to-text ratio above which anchor text is dropped.
    pub tau: f64,
    /// Candidate pool size at query time.
    pub k_retrieve: usize,
    /// Weight of the min-max scaled baseline score in the final blend.
    pub alpha: f64,
    /// Revision rate applied to retrieved cases after each query.
    pub eta: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            k_terms: DEFAULT_K_TERMS,
            tau: DEFAULT_LINK_THRESHOLD,
            k_retrieve: DEFAULT_K_RETRIEVE,
            alpha: 0.0,
            eta: 0.0,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        if self.k_terms == 0 {
            return Err(Error::Input("k_terms must be at least 1".into()));
        }
        if self.k_retrieve == 0 {
            return Err(Error::Input("k_retrieve must be at least 1".into()));
        }
        unit("tau", self.tau)?;
        unit("alpha", self.alpha)?;
        unit("eta", self.eta)
    }
}

/// Document frequencies over the extracted block text of the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub df: BTreeMap<String, usize>,
    /// Number of documents that contributed text.
    pub n: usize,
}

impl CorpusStats {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a PreparedDocument>) -> Self {
        let mut stats = CorpusStats::default();
        for doc in docs {
            let distinct: BTreeSet<&str> = doc.blocks.iter().flatten().map(String::as_str).collect();
            if distinct.is_empty() {
                continue;
            }
            stats.n += 1;
            for term in distinct {
                *stats.df.entry(term.to_string()).or_default() += 1;
            }
        }
        stats
    }

    /// Selection weight of a term: `ln(1 + N / (1 + df))`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        (1.0 + self.n as f64 / (1.0 + df as f64)).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermWeight {
    pub term: String,
    /// Block-local tf·idf.
    pub weight: f64,
    /// In-block count behind `weight`.
    pub tf: u32,
}

/// Picks the `k` terms with the highest tf·idf among `tokens`, ties broken
/// by term order.
pub fn select_top_k_terms(tokens: &[String], stats: &CorpusStats, k: usize) -> Vec<TermWeight> {
    let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
    for t in tokens {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let mut weighted: Vec<TermWeight> = tf
        .into_iter()
        .map(|(term, count)| TermWeight {
            term: term.to_string(),
            weight: count as f64 * stats.idf(term),
            tf: count,
        })
        .collect();
    weighted.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
    weighted.truncate(k);
    weighted
}

/// A document reduced to the token lists of its non-noise blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedDocument {
    pub doc_id: String,
    pub blocks: Vec<Vec<String>>,
}

impl PreparedDocument {
    pub fn new(doc: &RawDocument, tau: f64, tokenizer: &Tokenizer) -> Self {
        let blocks = segment_blocks(doc)
            .iter()
            .filter_map(|block| {
                let text = block.extract_text(tau);
                if text.is_empty() {
                    return None;
                }
                let tokens = tokenizer.tokenize(&dedupe_sentences(text));
                (!tokens.is_empty()).then_some(tokens)
            })
            .collect();
        PreparedDocument {
            doc_id: doc.doc_id.clone(),
            blocks,
        }
    }

    pub fn is_noise(&self) -> bool {
        self.blocks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub doc_id: String,
    /// Union of per-block top terms, sorted by term; weights and counts are
    /// the maxima over blocks.
    pub prob_desc: Vec<TermWeight>,
    /// Raw match counts.
    pub av: AffordanceVector,
    /// Copy of `av` adjusted by query feedback.
    pub av_revised: AffordanceVector,
}

impl Case {
    /// Nudges `av_revised` toward the query's affordance profile:
    /// `av_revised += eta * unit(query_av) * |av_revised|`.
    pub fn revise(&mut self, query_av: &AffordanceVector, eta: f64) -> Result<()> {
        query_av.check_dim(self.av_revised.len())?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Input(format!("eta must lie in [0, 1], got {eta}")));
        }
        let length = self.av_revised.norm();
        if eta == 0.0 || length == 0.0 || query_av.is_zero() {
            return Ok(());
        }
        self.av_revised.add_scaled(&query_av.normalized(), eta * length)?;
        self.av_revised.map_values(canonical);
        Ok(())
    }
}

/// Returns a revised copy of `case`; see [`Case::revise`].
pub fn revise_case_affordance(case: &Case, query_av: &AffordanceVector, eta: f64) -> Result<Case> {
    let mut revised = case.clone();
    revised.revise(query_av, eta)?;
    Ok(revised)
}

/// Builds the case for one prepared document, or `None` when every block
/// was filtered out as noise.
pub fn case_from_prepared(
    doc: &PreparedDocument,
    lexicon: &Lexicon,
    config: &BuildConfig,
    stats: &CorpusStats,
) -> Option<Case> {
    if doc.is_noise() {
        return None;
    }
    let mut prob_desc: BTreeMap<String, (f64, u32)> = BTreeMap::new();
    let mut block_avs = Vec::with_capacity(doc.blocks.len());
    for tokens in &doc.blocks {
        for tw in select_top_k_terms(tokens, stats, config.k_terms) {
            let entry = prob_desc.entry(tw.term).or_insert((0.0, 0));
            entry.0 = entry.0.max(tw.weight);
            entry.1 = entry.1.max(tw.tf);
        }
        block_avs.push(compute_block_affordance(tokens, lexicon));
    }
    let av = compute_doc_affordance(&block_avs, lexicon.m()).expect("block vectors share the lexicon dimension");
    Some(Case {
        doc_id: doc.doc_id.clone(),
        prob_desc: prob_desc
            .into_iter()
            .map(|(term, (weight, tf))| TermWeight {
                term,
                weight: canonical(weight),
                tf,
            })
            .collect(),
        av_revised: av.clone(),
        av,
    })
}

/// Segments, filters and scores one document against existing corpus
/// statistics.
pub fn build_case(
    doc: &RawDocument,
    lexicon: &Lexicon,
    config: &BuildConfig,
    stats: &CorpusStats,
    tokenizer: &Tokenizer,
) -> Option<Case> {
    case_from_prepared(&PreparedDocument::new(doc, config.tau, tokenizer), lexicon, config, stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseBase {
    lexicon: Lexicon,
    tokenizer: Tokenizer,
    pub config: BuildConfig,
    pub cases: Vec<Case>,
    pub corpus_stats: CorpusStats,
}

impl CaseBase {
    /// Two-pass build over in-memory documents. Output order follows sorted
    /// doc ids regardless of input order.
    pub fn build(
        mut docs: Vec<RawDocument>,
        lexicon: Lexicon,
        tokenizer: Tokenizer,
        config: BuildConfig,
    ) -> Result<Self> {
        config.validate()?;
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = docs.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(Error::Input(format!("duplicate doc_id {}", w[0].doc_id)));
        }

        let prepared: Vec<PreparedDocument> = docs
            .par_iter()
            .map(|d| PreparedDocument::new(d, config.tau, &tokenizer))
            .collect();
        let stats = CorpusStats::from_documents(&prepared);

        let cases: Vec<Case> = prepared
            .par_iter()
            .filter_map(|doc| {
                let case = case_from_prepared(doc, &lexicon, &config, &stats);
                if case.is_none() {
                    info!("skipping {}: no content blocks", doc.doc_id);
                }
                case
            })
            .collect();
        if cases.is_empty() {
            return Err(Error::Build("no document produced a case".into()));
        }
        Ok(CaseBase {
            lexicon,
            tokenizer,
            config,
            cases,
            corpus_stats: stats,
        })
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn lexicon_fingerprint(&self) -> String {
        self.lexicon.fingerprint()
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Fails unless `lexicon` is the one this case base was built with.
    pub fn ensure_compatible(&self, lexicon: &Lexicon) -> Result<()> {
        if lexicon.fingerprint() == self.lexicon_fingerprint() {
            return Ok(());
        }
        Err(Error::Compatibility(format!(
            "built with {} topics (fingerprint {}), active lexicon has {} topics (fingerprint {})",
            self.lexicon.m(),
            &self.lexicon_fingerprint()[..12],
            lexicon.m(),
            &lexicon.fingerprint()[..12],
        )))
    }

    /// Canonical serialized form.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = json!({
            "config": self.config,
            "lexicon": self.lexicon,
            "lexicon_fingerprint": self.lexicon_fingerprint(),
            "m": self.lexicon.m(),
            "N": self.cases.len(),
            "stop_words": self.tokenizer.stop_words().collect::<Vec<_>>(),
        });
        push_line(&mut out, &header);
        for case in &self.cases {
            let prob_desc: Vec<_> = case
                .prob_desc
                .iter()
                .map(|tw| json!([tw.term, tw.weight]))
                .collect();
            push_line(
                &mut out,
                &json!({
                    "av": case.av,
                    "av_revised": case.av_revised,
                    "doc_id": case.doc_id,
                    "prob_desc": prob_desc,
                }),
            );
        }
        push_line(
            &mut out,
            &json!({
                "corpus_stats": {
                    "N": self.corpus_stats.n,
                    "df": self.corpus_stats.df,
                }
            }),
        );
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::from_jsonl_named(text, "case base")
    }

    fn from_jsonl_named(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::format(source, format!("line {line}: {msg}"));
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 {
            return Err(Error::format(source, "truncated: missing header or statistics record"));
        }

        let header: HeaderRecord =
            serde_json::from_str(lines[0]).map_err(|e| err(1, e.to_string()))?;
        header.config.validate().map_err(|e| err(1, e.to_string()))?;
        if header.m != header.lexicon.m() {
            return Err(err(1, format!("m = {} but lexicon has {} topics", header.m, header.lexicon.m())));
        }
        if header.lexicon_fingerprint != header.lexicon.fingerprint() {
            return Err(err(1, "lexicon fingerprint does not match embedded lexicon".into()));
        }

        let last = lines.len();
        let stats: StatsRecord = serde_json::from_str(lines[last - 1])
            .map_err(|e| err(last, format!("expected corpus statistics ({e}); file truncated?")))?;
        let corpus_stats = CorpusStats {
            df: stats.corpus_stats.df,
            n: stats.corpus_stats.n,
        };

        let mut seen = HashSet::new();
        let mut cases = Vec::with_capacity(last - 2);
        for (i, line) in lines[1..last - 1].iter().enumerate() {
            let lineno = i + 2;
            let rec: CaseRecord = serde_json::from_str(line).map_err(|e| err(lineno, e.to_string()))?;
            for v in [&rec.av, &rec.av_revised] {
                v.check_dim(header.m).map_err(|e| err(lineno, e.to_string()))?;
            }
            if rec.prob_desc.is_empty() {
                return Err(err(lineno, format!("case {} has an empty problem description", rec.doc_id)));
            }
            if !seen.insert(rec.doc_id.clone()) {
                return Err(err(lineno, format!("duplicate doc_id {}", rec.doc_id)));
            }
            let prob_desc = rec
                .prob_desc
                .into_iter()
                .map(|(term, weight)| {
                    // weight = tf * idf with an integral tf
                    let tf = (weight / corpus_stats.idf(&term)).round().max(1.0) as u32;
                    TermWeight { term, weight, tf }
                })
                .collect();
            cases.push(Case {
                doc_id: rec.doc_id,
                prob_desc,
                av: rec.av,
                av_revised: rec.av_revised,
            });
        }
        if cases.len() != header.n {
            return Err(Error::format(
                source,
                format!("header announces {} cases, found {}", header.n, cases.len()),
            ));
        }
        Ok(CaseBase {
            lexicon: header.lexicon,
            tokenizer: Tokenizer::from_stop_words(header.stop_words),
            config: header.config,
            cases,
            corpus_stats,
        })
    }

    /// Index of a case by document id.
    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.cases.iter().position(|c| c.doc_id == doc_id)
    }

    /// Applies [`Case::revise`] to the cases at `ordinals`.
    pub fn revise_cases(&mut self, ordinals: &[usize], query_av: &AffordanceVector, eta: f64) -> Result<()> {
        for &i in ordinals {
            self.cases[i].revise(query_av, eta)?;
        }
        Ok(())
    }
}

fn push_line(out: &mut String, value: &serde_json::Value) {
    out.push_str(&value.to_string());
    out.push('\n');
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    config: BuildConfig,
    lexicon: Lexicon,
    lexicon_fingerprint: String,
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    stop_words: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseRecord {
    av: AffordanceVector,
    av_revised: AffordanceVector,
    doc_id: String,
    prob_desc: Vec<(String, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsRecord {
    corpus_stats: StatsBody,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsBody {
    #[serde(rename = "N")]
    n: usize,
    df: BTreeMap<String, usize>,
}

pub fn save_case_base(cb: &CaseBase, path: &Path) -> Result<()> {
    std::fs::write(path, cb.to_jsonl()).map_err(|e| Error::io(path, e))
}

pub fn load_case_base(path: &Path) -> Result<CaseBase> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CaseBase::from_jsonl_named(&text, &path.display().to_string())
}

/// Loads a case base and checks it against the lexicon in use.
pub fn load_case_base_for(path: &Path, lexicon: &Lexicon) -> Result<CaseBase> {
    let cb = load_case_base(path)?;
    cb.ensure_compatible(lexicon)?;
    Ok(cb)
}

/// `.html` / `.htm` files under `dir`, sorted by their relative path.
pub fn corpus_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let is_html = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"));
        if !is_html {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        let doc_id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        files.push((doc_id, entry.path().to_path_buf()));
    }
    files.sort();
    Ok(files)
}

/// Builds a case base from every HTML file under `corpus_dir`. Files that
/// cannot be read or decoded are logged and skipped.
pub fn populate_case_base(
    corpus_dir: &Path,
    lexicon: Lexicon,
    tokenizer: Tokenizer,
    config: BuildConfig,
) -> Result<CaseBase> {
    if !corpus_dir.is_dir() {
        return Err(Error::Input(format!("{} is not a directory", corpus_dir.display())));
    }
    let docs: Vec<RawDocument> = corpus_files(corpus_dir)?
        .into_par_iter()
        .filter_map(|(doc_id, path)| {
            let parsed = std::fs::read(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|bytes| parse_document(&bytes, &doc_id));
            match parsed {
                Ok(doc) => Some(doc.with_source_path(path)),
                Err(e) => {
                    warn!("skipping {doc_id}: {e}");
                    None
                }
            }
        })
        .collect();
    CaseBase::build(docs, lexicon, tokenizer, config)
}
