//! The ordered affordance topic list and term matching.
//!
//! File format, UTF-8, one topic per line:
//!
//! ```text
//! # comment
//! Beaches<TAB>beach,sand,sea shore
//! Miscellaneous<TAB>*
//! ```
//!
//! Topic order is significant: element `i` of every affordance vector
//! refers to topic `i`. At most one topic may use `*` in place of a term
//! list; it is the miscellaneous topic and counts the tokens that no other
//! topic matches.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::segmenter::Tokenizer;

const MISC_MARKER: &str = "*";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TopicRecord", into = "TopicRecord")]
pub struct Topic {
    name: String,
    terms: BTreeSet<String>,
    miscellaneous: bool,
    /// Term phrases keyed by first word, longest first.
    phrases: HashMap<String, Vec<Vec<String>>>,
}

impl PartialEq for Topic {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.terms == other.terms
            && self.miscellaneous == other.miscellaneous
    }
}

impl Eq for Topic {}

#[derive(Serialize, Deserialize)]
struct TopicRecord {
    name: String,
    terms: Vec<String>,
    miscellaneous: bool,
}

impl TryFrom<TopicRecord> for Topic {
    type Error = Error;

    fn try_from(r: TopicRecord) -> Result<Self> {
        if r.miscellaneous {
            if !r.terms.is_empty() {
                return Err(Error::format(
                    "lexicon",
                    format!("miscellaneous topic {} must not list terms", r.name),
                ));
            }
            Topic::miscellaneous(r.name)
        } else {
            Topic::new(r.name, r.terms)
        }
    }
}

impl From<Topic> for TopicRecord {
    fn from(t: Topic) -> Self {
        TopicRecord {
            name: t.name,
            terms: t.terms.into_iter().collect(),
            miscellaneous: t.miscellaneous,
        }
    }
}

/// Case-folds a term and splits it into words.
fn term_words(term: &str) -> Vec<String> {
    crate::segmenter::words_of(term)
}

impl Topic {
    /// A named topic. Terms are case-folded and de-duplicated; multi-word
    /// terms match as contiguous token sequences.
    pub fn new<I, S>(name: impl Into<String>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        check_name(&name)?;
        let mut normalized = BTreeSet::new();
        let mut phrases: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for term in terms {
            let words = term_words(term.as_ref());
            if words.is_empty() {
                continue;
            }
            if normalized.insert(words.join(" ")) {
                phrases.entry(words[0].clone()).or_default().push(words);
            }
        }
        if normalized.is_empty() {
            return Err(Error::format(
                "lexicon",
                format!("topic {name} has no terms"),
            ));
        }
        for list in phrases.values_mut() {
            list.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        Ok(Topic {
            name,
            terms: normalized,
            miscellaneous: false,
            phrases,
        })
    }

    /// The catch-all topic that scores tokens matched by no other topic.
    pub fn miscellaneous(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        check_name(&name)?;
        Ok(Topic {
            name,
            terms: BTreeSet::new(),
            miscellaneous: true,
            phrases: HashMap::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &BTreeSet<String> {
        &self.terms
    }

    pub fn is_miscellaneous(&self) -> bool {
        self.miscellaneous
    }

    /// Scans `tokens` left to right taking the longest term that starts at
    /// each position; matched tokens are consumed. Calls `on_match` with the
    /// start and length of every match.
    fn scan(&self, tokens: &[String], mut on_match: impl FnMut(usize, usize)) {
        let mut i = 0;
        while i < tokens.len() {
            let matched = self.phrases.get(&tokens[i]).and_then(|candidates| {
                candidates
                    .iter()
                    .find(|p| tokens[i..].starts_with(p))
                    .map(Vec::len)
            });
            match matched {
                Some(len) => {
                    on_match(i, len);
                    i += len;
                }
                None => i += 1,
            }
        }
    }

    /// Number of term occurrences in `tokens`. Always zero for the
    /// miscellaneous topic, which needs the whole lexicon; see
    /// [`Lexicon::match_count`].
    pub fn count_matches(&self, tokens: &[String]) -> usize {
        let mut count = 0;
        self.scan(tokens, |_, _| count += 1);
        count
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.trim().is_empty() || name.contains('\t') || name.contains('\n') {
        return Err(Error::format("lexicon", format!("invalid topic name {name:?}")));
    }
    Ok(())
}

/// Ordered list of affordance topics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Topic>", into = "Vec<Topic>")]
pub struct Lexicon {
    topics: Vec<Topic>,
}

impl TryFrom<Vec<Topic>> for Lexicon {
    type Error = Error;

    fn try_from(topics: Vec<Topic>) -> Result<Self> {
        Lexicon::new(topics)
    }
}

impl From<Lexicon> for Vec<Topic> {
    fn from(l: Lexicon) -> Self {
        l.topics
    }
}

impl Lexicon {
    pub fn new(topics: Vec<Topic>) -> Result<Self> {
        if topics.is_empty() {
            return Err(Error::format("lexicon", "no topics defined"));
        }
        let mut names = BTreeSet::new();
        for t in &topics {
            if !names.insert(t.name.as_str()) {
                return Err(Error::format(
                    "lexicon",
                    format!("duplicate topic {}", t.name),
                ));
            }
        }
        if topics.iter().filter(|t| t.miscellaneous).count() > 1 {
            return Err(Error::format(
                "lexicon",
                "more than one miscellaneous topic",
            ));
        }
        Ok(Lexicon { topics })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, "lexicon")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_named(&text, &path.display().to_string())
    }

    fn parse_named(text: &str, source: &str) -> Result<Self> {
        let mut topics = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::format(source, format!("line {}: {msg}", lineno + 1));
            let (name, terms) = line
                .split_once('\t')
                .ok_or_else(|| at("expected TopicName<TAB>terms".to_string()))?;
            let name = name.trim();
            let topic = if terms.trim() == MISC_MARKER {
                Topic::miscellaneous(name)
            } else {
                Topic::new(name, terms.split(','))
            };
            topics.push(topic.map_err(|e| at(e.to_string()))?);
        }
        if topics.is_empty() {
            return Err(Error::format(source, "lexicon file defines no topics"));
        }
        Lexicon::new(topics).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(source, message),
            other => other,
        })
    }

    /// Canonical file form; terms are written in sorted order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.topics {
            out.push_str(&t.name);
            out.push('\t');
            if t.miscellaneous {
                out.push_str(MISC_MARKER);
            } else {
                let terms: Vec<&str> = t.terms.iter().map(String::as_str).collect();
                out.push_str(&terms.join(","));
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical file form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        format!("{digest:x}")
    }

    /// Vector dimension: the number of topics.
    pub fn m(&self) -> usize {
        self.topics.len()
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn topic(&self, name: &str) -> Option<(usize, &Topic)> {
        self.topics.iter().enumerate().find(|(_, t)| t.name == name)
    }

    /// Occurrence count of topic `index` in `tokens`. For the miscellaneous
    /// topic this is the number of tokens not covered by any other topic.
    ///
    /// Panics if `index` is out of range.
    pub fn match_count(&self, tokens: &[String], index: usize) -> usize {
        self.match_counts(tokens)[index]
    }

    /// Occurrence counts for every topic, in lexicon order.
    pub fn match_counts(&self, tokens: &[String]) -> Vec<usize> {
        let mut covered = vec![false; tokens.len()];
        let mut counts = vec![0; self.topics.len()];
        for (count, topic) in counts.iter_mut().zip(&self.topics) {
            if topic.miscellaneous {
                continue;
            }
            topic.scan(tokens, |start, len| {
                *count += 1;
                covered[start..start + len].iter_mut().for_each(|c| *c = true);
            });
        }
        if let Some(misc) = self.topics.iter().position(|t| t.miscellaneous) {
            counts[misc] = covered.iter().filter(|c| !**c).count();
        }
        counts
    }

    /// Terms that contain a stop word of `tokenizer` can never match
    /// tokenized text.
    pub fn unmatchable_terms<'a>(&'a self, tokenizer: &'a Tokenizer) -> Vec<(&'a str, &'a str)> {
        self.topics
            .iter()
            .flat_map(|t| t.terms.iter().map(move |term| (t.name.as_str(), term.as_str())))
            .filter(|(_, term)| term.split(' ').any(|w| tokenizer.is_stop_word(w)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    const TABLE_SHAPE: [(&str, usize); 17] = [
        ("Accommodation", 59),
        ("Attractions", 59),
        ("Beaches", 59),
        ("Deserts", 59),
        ("HealthCare", 60),
        ("Heritage", 59),
        ("HillStations", 59),
        ("Landscapes", 59),
        ("Nature", 59),
        ("Retreats", 59),
        ("Shopping", 59),
        ("Spirituality", 59),
        ("Sports", 66),
        ("ThemeParks", 59),
        ("TourPackages", 59),
        ("Transport", 61),
        ("Wildlife", 59),
    ];

    fn table_shaped_file() -> String {
        let mut s = String::from("# synthetic lexicon with the reference topic sizes\n");
        for (name, n) in TABLE_SHAPE {
            let terms: Vec<String> = (0..n).map(|i| format!("{}{i}", name.to_lowercase())).collect();
            s.push_str(&format!("{name}\t{}\n", terms.join(",")));
        }
        s.push_str("Miscellaneous\t*\n");
        s
    }

    #[test]
    fn eighteen_topics_with_sizes() {
        let lex = Lexicon::parse(&table_shaped_file()).unwrap();
        assert_eq!(lex.m(), 18);
        assert_eq!(lex.topic("Sports").unwrap().1.terms().len(), 66);
        assert_eq!(lex.topic("Transport").unwrap().1.terms().len(), 61);
        assert!(lex.topic("Miscellaneous").unwrap().1.is_miscellaneous());
        assert_eq!(lex.topics()[2].name(), "Beaches");
    }

    #[test]
    fn duplicate_topic_is_rejected() {
        let err = Lexicon::parse("Beaches\tbeach\nBeaches\tsand\n").unwrap_err();
        assert!(err.to_string().contains("duplicate topic Beaches"));
    }

    #[test]
    fn two_miscellaneous_topics_are_rejected() {
        assert!(Lexicon::parse("Misc\t*\nRest\t*\n").is_err());
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(Lexicon::parse("").is_err());
        assert!(Lexicon::parse("# only a comment\n\n").is_err());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let err = Lexicon::parse("Beaches beach\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert!(Lexicon::parse("Beaches\t , ,\n").is_err());
    }

    #[test]
    fn terms_are_folded_and_deduplicated() {
        let lex = Lexicon::parse("Beaches\tBeach, beach ,SAND,Sea  Shore\r\n").unwrap();
        let terms: Vec<_> = lex.topics()[0].terms().iter().cloned().collect();
        assert_eq!(terms, vec!["beach", "sand", "sea shore"]);
    }

    #[test]
    fn counts_with_multiplicity() {
        let lex = Lexicon::parse("Beaches\tbeach,sand\n").unwrap();
        assert_eq!(lex.match_count(&toks("beach sand beach"), 0), 3);
        assert_eq!(lex.match_count(&[], 0), 0);
    }

    #[test]
    fn miscellaneous_counts_the_complement() {
        let lex = Lexicon::parse("Beaches\tbeach\nMiscellaneous\t*\n").unwrap();
        assert_eq!(lex.match_count(&toks("qwerty"), 1), 1);
        assert_eq!(lex.match_counts(&toks("beach qwerty beach x")), vec![2, 2]);
        assert_eq!(lex.topics()[1].count_matches(&toks("qwerty")), 0);
    }

    #[test]
    fn phrases_match_longest_first_and_consume() {
        let lex = Lexicon::parse(
            "HillStations\thill station,hill\nNature\thill,station\nMisc\t*\n",
        )
        .unwrap();
        let tokens = toks("hill station hill station station");
        // HillStations: [hill station] [hill station] -> 2
        // Nature sees every token independently -> 5
        assert_eq!(lex.match_counts(&tokens), vec![2, 5, 0]);
        assert_eq!(lex.match_counts(&toks("hill top")), vec![1, 1, 1]);
    }

    #[test]
    fn overlapping_topics_each_count() {
        let lex = Lexicon::parse("A\ttemple\nB\ttemple,fort\nM\t*\n").unwrap();
        assert_eq!(lex.match_counts(&toks("temple fort gate")), vec![1, 2, 1]);
    }

    #[test]
    fn file_round_trip() {
        let lex = Lexicon::parse(&table_shaped_file()).unwrap();
        let again = Lexicon::parse(&lex.to_file_string()).unwrap();
        assert_eq!(lex, again);
        assert_eq!(lex.fingerprint(), again.fingerprint());
    }

    #[test]
    fn json_round_trip() {
        let lex = Lexicon::parse("Beaches\tbeach,sea shore\nMisc\t*\n").unwrap();
        let json = serde_json::to_string(&lex).unwrap();
        let back: Lexicon = serde_json::from_str(&json).unwrap();
        assert_eq!(back, lex);
        assert_eq!(back.match_counts(&toks("sea shore x")), vec![1, 1]);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Lexicon::parse("A\tx\n").unwrap();
        let b = Lexicon::parse("A\tx,y\n").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn reports_terms_blocked_by_stop_words() {
        let lex = Lexicon::parse("Stay\tbed and breakfast,hotel\n").unwrap();
        let tk = Tokenizer::english();
        assert_eq!(lex.unmatchable_terms(&tk), vec![("Stay", "bed and breakfast")]);
    }
}
