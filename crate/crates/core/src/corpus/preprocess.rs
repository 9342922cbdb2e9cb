use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::porter::porter_stem;
use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const DEFAULT_KEYWORDS: &str = include_str!("../../data/java_keywords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    #[default]
    Porter,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub keywords: BTreeSet<String>,
    /// Emit the whole (lowercased) identifier next to its camel-case parts.
    pub keep_original_identifiers: bool,
    pub stemmer: Stemmer,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: parse_word_list(DEFAULT_STOPWORDS),
            keywords: parse_word_list(DEFAULT_KEYWORDS),
            keep_original_identifiers: true,
            stemmer: Stemmer::Porter,
        }
    }
}

impl PreprocessConfig {
    /// Replaces the bundled lists with the given files, when present.
    pub fn with_lists(
        mut self,
        stopwords: Option<&Path>,
        keywords: Option<&Path>,
    ) -> Result<Self> {
        if let Some(path) = stopwords {
            self.stopwords = read_word_list(path)?;
        }
        if let Some(path) = keywords {
            self.keywords = read_word_list(path)?;
        }
        Ok(self)
    }

    fn is_filtered(&self, token: &str) -> bool {
        self.stopwords.contains(token) || self.keywords.contains(token)
    }

    fn stem(&self, token: &str) -> String {
        match self.stemmer {
            Stemmer::Porter => porter_stem(token),
            Stemmer::None => token.to_string(),
        }
    }
}

/// One token per line; blank lines and surrounding whitespace ignored.
pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn read_word_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

/// Turns raw text into a token multiset (in emission order).
///
/// Identifiers are maximal runs of ASCII alphanumerics and underscores. Each
/// one is split on underscores, lower-to-upper case changes, letter/digit
/// boundaries, and before the last capital of an acronym run of three or more
/// (`IOException` -> `IO`, `Exception`). Number literals are dropped. When an
/// identifier splits into several words, the lowercased original (underscores
/// removed) is emitted first and is exempt from stemming.
pub fn preprocess_text(raw: &str, cfg: &PreprocessConfig) -> Vec<String> {
    let mut out = Vec::new();
    for ident in raw
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|s| !s.is_empty())
    {
        let parts: Vec<String> = split_identifier(ident)
            .into_iter()
            .filter(|p| !p.bytes().all(|b| b.is_ascii_digit()))
            .map(|p| p.to_ascii_lowercase())
            .collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() > 1 && cfg.keep_original_identifiers {
            let original: String = ident
                .chars()
                .filter(|c| *c != '_')
                .collect::<String>()
                .to_ascii_lowercase();
            if !cfg.is_filtered(&original) {
                out.push(original);
            }
        }
        for part in parts {
            if !cfg.is_filtered(&part) {
                out.push(cfg.stem(&part));
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Lower,
    Upper,
    Digit,
}

fn class_of(c: u8) -> Class {
    if c.is_ascii_digit() {
        Class::Digit
    } else if c.is_ascii_uppercase() {
        Class::Upper
    } else {
        Class::Lower
    }
}

fn split_identifier(ident: &str) -> Vec<&str> {
    let mut words = Vec::new();
    for chunk in ident.split('_').filter(|s| !s.is_empty()) {
        let bytes = chunk.as_bytes();
        let mut start = 0;
        let mut i = 1;
        while i < bytes.len() {
            let prev = class_of(bytes[i - 1]);
            let cur = class_of(bytes[i]);
            let boundary = match (prev, cur) {
                (Class::Lower, Class::Upper) => true,
                (Class::Digit, Class::Lower | Class::Upper)
                | (Class::Lower | Class::Upper, Class::Digit) => true,
                (Class::Upper, Class::Lower) => {
                    // Acronym run of length >= 3 ending in a capitalized word.
                    let run_start = (start..i)
                        .rev()
                        .take_while(|&k| class_of(bytes[k]) == Class::Upper)
                        .last()
                        .unwrap_or(i - 1);
                    if i - run_start >= 3 {
                        words.push(&chunk[start..i - 1]);
                        start = i - 1;
                    }
                    false
                }
                _ => false,
            };
            if boundary {
                words.push(&chunk[start..i]);
                start = i;
            }
            i += 1;
        }
        words.push(&chunk[start..]);
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<String>) -> Vec<String> {
        v.sort();
        v
    }

    #[test]
    fn camel_case_keeps_original_identifier() {
        let cfg = PreprocessConfig::default();
        assert_eq!(
            preprocess_text("JUnitTestRunner", &cfg),
            vec!["junittestrunner", "junit", "test", "runner"]
        );
    }

    #[test]
    fn keywords_are_removed() {
        let cfg = PreprocessConfig::default();
        assert!(preprocess_text("if for while", &cfg).is_empty());
    }

    #[test]
    fn inflections_stem_to_one_root() {
        let cfg = PreprocessConfig::default();
        assert_eq!(
            preprocess_text("processed processing processes", &cfg),
            vec!["process", "process", "process"]
        );
    }

    #[test]
    fn splitting_rules() {
        assert_eq!(split_identifier("IOException"), vec!["IO", "Exception"]);
        assert_eq!(split_identifier("XMLParser"), vec!["XML", "Parser"]);
        assert_eq!(split_identifier("JUnit"), vec!["JUnit"]);
        assert_eq!(split_identifier("log4j"), vec!["log", "4", "j"]);
        assert_eq!(split_identifier("max_value"), vec!["max", "value"]);
        assert_eq!(split_identifier("getHTTPResponse"), vec!["get", "HTTP", "Response"]);
        assert_eq!(split_identifier("URL"), vec!["URL"]);
    }

    #[test]
    fn numbers_and_punctuation_vanish() {
        let cfg = PreprocessConfig::default();
        assert_eq!(
            sorted(preprocess_text("Error 404: (page) -- 3.14!", &cfg)),
            vec!["error", "page"]
        );
        assert!(preprocess_text("", &cfg).is_empty());
        assert!(preprocess_text("12 345 ... ;;", &cfg).is_empty());
    }

    #[test]
    fn stemmer_none_and_no_original() {
        let cfg = PreprocessConfig {
            keep_original_identifiers: false,
            stemmer: Stemmer::None,
            ..PreprocessConfig::default()
        };
        assert_eq!(
            preprocess_text("parseDates", &cfg),
            vec!["parse", "dates"]
        );
    }

    #[test]
    fn output_is_stable_under_reprocessing_without_compounds() {
        let cfg = PreprocessConfig::default();
        let first = preprocess_text("The runner processed several failing outputs quickly", &cfg);
        let again = preprocess_text(&first.join(" "), &cfg);
        assert_eq!(first, again);
    }
}
