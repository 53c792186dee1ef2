use std::collections::BTreeSet;
use std::path::Path;

use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

/// Built-in English stop-word list, one word per line.
pub const ENGLISH_STOP_WORDS: &str = include_str!("stopwords_en.txt");

/// Splits clean text into case-folded word tokens and drops stop words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    stop_words: BTreeSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::english()
    }
}

impl Tokenizer {
    pub fn english() -> Self {
        Self::from_stop_words(ENGLISH_STOP_WORDS.lines())
    }

    pub fn from_stop_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stop_words = words
            .into_iter()
            .map(|w| normalize(w.as_ref().trim()))
            .filter(|w| !w.is_empty())
            .collect();
        Tokenizer { stop_words }
    }

    /// Reads a stop-word file: UTF-8, one token per line.
    pub fn from_stop_word_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_stop_words(text.lines()))
    }

    pub fn stop_words(&self) -> impl Iterator<Item = &str> {
        self.stop_words.iter().map(String::as_str)
    }

    pub fn is_stop_word(&self, token: &str) -> bool {
        self.stop_words.contains(token)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        words(text)
            .filter(|w| !self.stop_words.contains(w))
            .collect()
    }
}

/// Case-folded word tokens without stop-word removal.
pub(crate) fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.unicode_words().map(normalize)
}

fn normalize(word: &str) -> String {
    word.replace('\u{2019}', "'").to_lowercase()
}
