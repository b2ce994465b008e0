//! Surface-string normalization, tokenization and the function-word list.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{DartError, Result};

const SHIPPED_FUNCTION_WORDS: &str = include_str!("../data/function_words.txt");

/// Lowercase, strip surrounding punctuation, trim and collapse internal whitespace.
///
/// Applied identically to entity names and predicate text so that matching is
/// an exact comparison of normalized strings.
pub fn normalize(s: &str) -> String {
    let lower = s.to_lowercase();
    let stripped = lower.trim_matches(|c: char| !c.is_alphanumeric());
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace tokens of `text` with punctuation trimmed from each token's ends.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Split an identifier such as `isLeaderOf` or `music_subGenre` into words.
pub fn split_identifier(ident: &str) -> Vec<String> {
    let chars: Vec<char> = ident.chars().collect();
    let mut words = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            continue;
        }
        if !current.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = (c.is_uppercase() && (prev.is_lowercase() || prev.is_numeric()))
                // "HTMLParser": break before the last capital of a run
                || (c.is_uppercase() && prev.is_uppercase() && next_lower)
                || (c.is_numeric() != prev.is_numeric());
            if boundary {
                words.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Set of lowercase tokens removed from patterns before any similarity test.
#[derive(Debug, Clone)]
pub struct FunctionWords {
    words: HashSet<String>,
}

impl FunctionWords {
    /// The list shipped with the crate.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_FUNCTION_WORDS).expect("shipped function-word list is non-empty")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DartError::io(path, e))?;
        Self::parse(&text).ok_or_else(|| {
            DartError::Data(format!("function-word list {} is empty", path.display()))
        })
    }

    fn parse(text: &str) -> Option<Self> {
        let words: HashSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        (!words.is_empty()).then_some(Self { words })
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Tokens of `text` that are not function words, in their original order.
    pub fn content_words(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.contains(t))
            .collect()
    }
}

impl Default for FunctionWords {
    fn default() -> Self {
        Self::shipped()
    }
}
