//! Affordance vectors: per-topic match scores for blocks, documents and
//! queries, compared by cosine after L2 normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

/// Non-negative score per lexicon topic; element `i` belongs to topic `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AffordanceVector(Vec<f64>);

impl TryFrom<Vec<f64>> for AffordanceVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        AffordanceVector::new(values)
    }
}

impl From<AffordanceVector> for Vec<f64> {
    fn from(av: AffordanceVector) -> Self {
        av.0
    }
}

impl AffordanceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Input(format!(
                "affordance values must be finite and non-negative, got {bad}"
            )));
        }
        Ok(AffordanceVector(values))
    }

    pub fn zeros(m: usize) -> Self {
        AffordanceVector(vec![0.0; m])
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        AffordanceVector(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Euclidean length.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm == 0.0 {
            return AffordanceVector::zeros(self.len());
        }
        AffordanceVector(self.0.iter().map(|v| v / norm).collect())
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: self.len(),
            });
        }
        Ok(())
    }

    /// Element-wise `self += scale * other`.
    pub(crate) fn add_scaled(&mut self, other: &AffordanceVector, scale: f64) -> Result<()> {
        other.check_dim(self.len())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
        Ok(())
    }

    pub(crate) fn map_values(&mut self, f: impl Fn(f64) -> f64) {
        self.0.iter_mut().for_each(|v| *v = f(*v));
    }
}

/// Counts topic matches in one block's tokens.
pub fn compute_block_affordance(tokens: &[String], lexicon: &Lexicon) -> AffordanceVector {
    AffordanceVector::from_counts(&lexicon.match_counts(tokens))
}

/// Sums block vectors into the document vector. An empty list gives the
/// zero vector of dimension `m`.
pub fn compute_doc_affordance(blocks: &[AffordanceVector], m: usize) -> Result<AffordanceVector> {
    let mut doc = AffordanceVector::zeros(m);
    for block in blocks {
        doc.add_scaled(block, 1.0)?;
    }
    Ok(doc)
}

/// Query vectors follow the block rule over the query tokens.
pub fn compute_query_affordance(tokens: &[String], lexicon: &Lexicon) -> AffordanceVector {
    compute_block_affordance(tokens, lexicon)
}

/// Scales to unit Euclidean length; the zero vector stays zero.
pub fn normalize_av(av: &AffordanceVector) -> AffordanceVector {
    av.normalized()
}

/// Cosine of the angle between two vectors, in `[0, 1]`. Zero whenever
/// either side is the zero vector.
pub fn cosine_sim(a: &AffordanceVector, b: &AffordanceVector) -> Result<f64> {
    b.check_dim(a.len())?;
    let (na, nb) = (a.normalized(), b.normalized());
    let dot: f64 = na.0.iter().zip(&nb.0).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn av(v: &[f64]) -> AffordanceVector {
        AffordanceVector::new(v.to_vec()).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn lexicon() -> Lexicon {
        Lexicon::parse("Beaches\tbeach,sand\nSpirituality\ttemple\nMiscellaneous\t*\n").unwrap()
    }

    #[test]
    fn block_counts() {
        let lex = lexicon();
        assert_eq!(
            compute_block_affordance(&toks("beach sand temple"), &lex).values(),
            &[2.0, 1.0, 0.0]
        );
        assert!(compute_block_affordance(&[], &lex).is_zero());
    }

    #[test]
    fn unmatched_tokens_go_to_miscellaneous() {
        let lex = Lexicon::parse("Beaches\tbeach\nMisc\t*\n").unwrap();
        let v = compute_block_affordance(&toks("foo bar baz"), &lex);
        assert_eq!(v.values(), &[0.0, 3.0]);
    }

    #[test]
    fn document_is_sum_of_blocks() {
        let doc = compute_doc_affordance(&[av(&[1.0, 0.0]), av(&[2.0, 3.0])], 2).unwrap();
        assert_eq!(doc.values(), &[3.0, 3.0]);
        assert_eq!(compute_doc_affordance(&[av(&[0.0, 0.0])], 2).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(compute_doc_affordance(&[], 3).unwrap().values(), &[0.0; 3]);
        let err = compute_doc_affordance(&[av(&[1.0]), av(&[1.0, 2.0])], 1).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 1, found: 2 }));
    }

    #[test]
    fn query_vectors() {
        let lex = Lexicon::parse("Beaches\tbeach\nAccommodation\tresorts\nNature\tforest\n").unwrap();
        let q = compute_query_affordance(&toks("beach resorts goa"), &lex);
        assert_eq!(q.values(), &[1.0, 1.0, 0.0]);
        assert!(compute_query_affordance(&toks("nothing here"), &lex).is_zero());
        assert!(compute_query_affordance(&[], &lex).is_zero());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_av(&av(&[3.0, 4.0])).values(), &[0.6, 0.8]);
        assert_eq!(normalize_av(&av(&[0.0, 0.0])).values(), &[0.0, 0.0]);
        assert_eq!(normalize_av(&av(&[5.0])).values(), &[1.0]);
    }

    #[test]
    fn cosine_examples() {
        let a = av(&[1.0, 2.0, 3.0]);
        assert!((cosine_sim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_sim(&av(&[1.0, 0.0]), &av(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine_sim(&av(&[1.0, 1.0, 0.0]), &av(&[1.0, 0.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine_sim(&av(&[0.0, 0.0]), &av(&[1.0, 1.0])).unwrap(), 0.0);
        assert!(cosine_sim(&av(&[1.0]), &av(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn rejects_negative_or_nan() {
        assert!(AffordanceVector::new(vec![-1.0]).is_err());
        assert!(AffordanceVector::new(vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<AffordanceVector>("[1.0, -2.0]").is_err());
    }

    proptest! {
        #[test]
        fn appending_a_topic_token_increments(words in prop::collection::vec(
            prop::sample::select(vec!["beach", "sand", "temple", "x", "y"]), 0..30,
        ), extra in prop::sample::select(vec!["beach", "sand", "temple"])) {
            let lex = lexicon();
            let mut tokens: Vec<String> = words.iter().map(|w| w.to_string()).collect();
            let before = compute_block_affordance(&tokens, &lex);
            tokens.push(extra.to_string());
            let after = compute_block_affordance(&tokens, &lex);
            let topic = if extra == "temple" { 1 } else { 0 };
            prop_assert!(after.values()[topic] >= before.values()[topic] + 1.0);
            for (a, b) in after.values().iter().zip(before.values()) {
                prop_assert!(a >= b);
            }
        }

        #[test]
        fn doc_vector_is_additive_over_blocks(blocks in prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["beach", "sand", "temple", "x"]), 0..10),
            0..6,
        )) {
            let lex = lexicon();
            let block_tokens: Vec<Vec<String>> = blocks
                .iter()
                .map(|b| b.iter().map(|w| w.to_string()).collect())
                .collect();
            let avs: Vec<_> = block_tokens.iter().map(|t| compute_block_affordance(t, &lex)).collect();
            let doc = compute_doc_affordance(&avs, lex.m()).unwrap();
            let all: Vec<String> = block_tokens.concat();
            prop_assert_eq!(doc, compute_block_affordance(&all, &lex));
        }

        #[test]
        fn cosine_is_scale_invariant(
            a in prop::collection::vec(0.0f64..100.0, 4),
            b in prop::collection::vec(0.0f64..100.0, 4),
            scale in 0.001f64..1000.0,
        ) {
            let (a, b) = (av(&a), av(&b));
            let scaled = av(&a.values().iter().map(|v| v * scale).collect::<Vec<_>>());
            let base = cosine_sim(&a, &b).unwrap();
            prop_assert!((cosine_sim(&scaled, &b).unwrap() - base).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
