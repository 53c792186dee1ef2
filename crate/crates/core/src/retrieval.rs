//! Candidate retrieval over problem descriptions and affordance re-ranking.
//!
//! Baseline scoring follows the classic coordination-weighted tf-idf form
//!
//! ```text
//! score(q, c) = coord(q, c) * Σ_{t ∈ q ∩ c} tf(t, c) * idf(t)² * norm(c)
//! coord(q, c) = |q ∩ c| / |q|
//! idf(t)      = 1 + ln(N / (df(t) + 1))
//! norm(c)     = 1 / sqrt(|prob_desc(c)|)
//! ```
//!
//! over distinct query terms, with query normalization and boosts fixed
//! at one. The retrieved pool is then re-ordered by a blend of the min-max
//! scaled baseline score and the cosine between query and case affordance
//! vectors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::affordance::{cosine_sim, AffordanceVector};
use crate::casebase::CaseBase;
use crate::error::{Error, Result};
use crate::segmenter::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub title: Vec<String>,
    pub desc: Vec<String>,
    /// Kept for reference; never used for scoring.
    pub narr: String,
}

impl Query {
    /// A title-only query from free text.
    pub fn from_text(query_id: impl Into<String>, text: &str, tokenizer: &Tokenizer) -> Result<Self> {
        let query_id = query_id.into();
        let title = tokenizer.tokenize(text);
        if title.is_empty() {
            return Err(Error::Input(format!("query {query_id} has no terms after stop-word removal")));
        }
        Ok(Query {
            query_id,
            title,
            desc: Vec::new(),
            narr: String::new(),
        })
    }

    /// Tokens used for retrieval: the title, followed by the description
    /// when `use_desc` is set.
    pub fn terms(&self, use_desc: bool) -> Vec<String> {
        let mut terms = self.title.clone();
        if use_desc {
            terms.extend(self.desc.iter().cloned());
        }
        terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posting {
    pub case: usize,
    pub tf: f64,
}

/// Term → postings over case problem descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_norms: Vec<f64>,
    pub n: usize,
}

impl InvertedIndex {
    pub fn build(cb: &CaseBase) -> Result<Self> {
        if cb.is_empty() {
            return Err(Error::Build("cannot index an empty case base".into()));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_norms = Vec::with_capacity(cb.len());
        for (ordinal, case) in cb.cases.iter().enumerate() {
            for tw in &case.prob_desc {
                postings.entry(tw.term.clone()).or_default().push(Posting {
                    case: ordinal,
                    tf: tw.tf as f64,
                });
            }
            let len = case.prob_desc.len().max(1) as f64;
            doc_norms.push(1.0 / len.sqrt());
        }
        Ok(InvertedIndex {
            postings,
            doc_norms,
            n: cb.len(),
        })
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.n, self.df(term))
    }

    fn tf(&self, term: &str, case: usize) -> Option<f64> {
        let list = self.postings.get(term)?;
        list.binary_search_by(|p| p.case.cmp(&case)).ok().map(|i| list[i].tf)
    }
}

/// `1 + ln(N / (df + 1))`.
pub fn idf(n: usize, df: usize) -> f64 {
    1.0 + (n as f64 / (df as f64 + 1.0)).ln()
}

/// Contribution of one matching term.
#[inline]
pub fn term_score(tf: f64, idf: f64, norm: f64) -> f64 {
    tf * idf * idf * norm
}

fn distinct(terms: &[String]) -> BTreeSet<&str> {
    terms.iter().map(String::as_str).collect()
}

/// Baseline score of case `case` (an ordinal into the case base).
pub fn baseline_score(query_terms: &[String], case: usize, index: &InvertedIndex) -> f64 {
    let terms = distinct(query_terms);
    if terms.is_empty() {
        return 0.0;
    }
    let mut matched = 0usize;
    let mut sum = 0.0;
    for term in &terms {
        if let Some(tf) = index.tf(term, case) {
            matched += 1;
            sum += term_score(tf, index.idf(term), index.doc_norms[case]);
        }
    }
    matched as f64 / terms.len() as f64 * sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub case: usize,
    pub doc_id: String,
    pub baseline_score: f64,
    /// 1-based position in the baseline ordering.
    pub baseline_rank: usize,
}

fn by_score_then_id(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// The `k` best cases by baseline score, ties broken by doc id. Cases that
/// share no term with the query are never returned.
pub fn retrieve_top_k(query_terms: &[String], index: &InvertedIndex, cb: &CaseBase, k: usize) -> Vec<Candidate> {
    let terms = distinct(query_terms);
    let mut sums = vec![0.0f64; index.n];
    let mut matched = vec![0usize; index.n];
    for term in &terms {
        let Some(list) = index.postings.get(*term) else {
            continue;
        };
        let term_idf = index.idf(term);
        for p in list {
            sums[p.case] += term_score(p.tf, term_idf, index.doc_norms[p.case]);
            matched[p.case] += 1;
        }
    }
    let mut hits: Vec<(usize, f64)> = (0..index.n)
        .filter(|&c| matched[c] > 0)
        .map(|c| (c, matched[c] as f64 / terms.len() as f64 * sums[c]))
        .collect();
    hits.sort_by(|a, b| by_score_then_id(a.1, &cb.cases[a.0].doc_id, b.1, &cb.cases[b.0].doc_id));
    hits.truncate(k);
    hits.into_iter()
        .enumerate()
        .map(|(i, (case, score))| Candidate {
            case,
            doc_id: cb.cases[case].doc_id.clone(),
            baseline_score: score,
            baseline_rank: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub case: usize,
    pub doc_id: String,
    pub baseline_score: f64,
    pub affordance_cosine: f64,
    pub final_score: f64,
    pub baseline_rank: usize,
    pub final_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedResult {
    pub entries: Vec<RankedEntry>,
}

impl RankedResult {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn baseline_order(&self) -> Vec<&str> {
        let mut entries: Vec<&RankedEntry> = self.entries.iter().collect();
        entries.sort_by_key(|e| e.baseline_rank);
        entries.into_iter().map(|e| e.doc_id.as_str()).collect()
    }

    pub fn final_order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.doc_id.as_str()).collect()
    }
}

/// Re-orders a candidate pool by
/// `alpha * minmax(baseline) + (1 - alpha) * cosine(query_av, case_av)`.
///
/// When every candidate has the same baseline score the scaled baseline is
/// 1 for all of them.
pub fn rerank(
    candidates: &[Candidate],
    query_av: &AffordanceVector,
    cb: &CaseBase,
    alpha: f64,
    use_revised: bool,
) -> Result<RankedResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Input(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let (lo, hi) = candidates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
        (lo.min(c.baseline_score), hi.max(c.baseline_score))
    });
    let mut entries = Vec::with_capacity(candidates.len());
    for c in candidates {
        let case = &cb.cases[c.case];
        let case_av = if use_revised { &case.av_revised } else { &case.av };
        let cosine = cosine_sim(query_av, case_av)?;
        let scaled = if hi > lo {
            (c.baseline_score - lo) / (hi - lo)
        } else {
            1.0
        };
        entries.push(RankedEntry {
            case: c.case,
            doc_id: c.doc_id.clone(),
            baseline_score: c.baseline_score,
            affordance_cosine: cosine,
            final_score: alpha * scaled + (1.0 - alpha) * cosine,
            baseline_rank: c.baseline_rank,
            final_rank: 0,
        });
    }
    entries.sort_by(|a, b| by_score_then_id(a.final_score, &a.doc_id, b.final_score, &b.doc_id));
    for (i, e) in entries.iter_mut().enumerate() {
        e.final_rank = i + 1;
    }
    Ok(RankedResult { entries })
}
