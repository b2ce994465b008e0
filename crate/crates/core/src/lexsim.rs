//! Gloss-overlap word similarity and the word-alignment text similarity
//! built on top of it.
//!
//! Word similarity is the best Dice-normalized unigram overlap between any
//! pair of glosses of the two words, regardless of part of speech. Text
//! similarity averages, in both directions, the best word match of every
//! word against the other text, without word-specificity weights.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DartError, Result};
use crate::text::{tokenize, FunctionWords};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sense {
    pub id: String,
    pub pos: String,
    /// Lowercased gloss tokens with function words removed.
    pub gloss: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LexicalDatabase {
    entries: BTreeMap<String, Vec<Sense>>,
    malformed: usize,
}

// Detachment rules for inflected forms, tried when a token is not a lemma.
const DETACHMENTS: &[(&str, &str)] = &[
    ("s", ""),
    ("ses", "s"),
    ("xes", "x"),
    ("zes", "z"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("men", "man"),
    ("ies", "y"),
    ("es", "e"),
    ("es", ""),
    ("ed", "e"),
    ("ed", ""),
    ("ing", "e"),
    ("ing", ""),
    ("er", ""),
    ("est", ""),
    ("er", "e"),
    ("est", "e"),
];

impl LexicalDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sense; the gloss text is tokenized and stripped of function words.
    pub fn add_sense(&mut self, lemma: &str, pos: &str, id: &str, gloss_text: &str, fw: &FunctionWords) {
        let gloss = fw.content_words(gloss_text);
        self.entries
            .entry(lemma.trim().to_lowercase())
            .or_default()
            .push(Sense {
                id: id.to_string(),
                pos: pos.to_string(),
                gloss,
            });
    }

    pub fn lemma_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn malformed(&self) -> usize {
        self.malformed
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Senses stored under exactly this lemma.
    pub fn lemma_senses(&self, lemma: &str) -> &[Sense] {
        self.entries.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Lemmas a surface token may stand for: the token itself when listed,
    /// plus every base form reachable by one detachment rule.
    pub fn base_forms(&self, token: &str) -> Vec<&str> {
        let mut found: Vec<&str> = Vec::new();
        if let Some((k, _)) = self.entries.get_key_value(token) {
            found.push(k);
        }
        for (suffix, ending) in DETACHMENTS {
            if let Some(stem) = token.strip_suffix(suffix) {
                if stem.is_empty() {
                    continue;
                }
                let candidate = format!("{stem}{ending}");
                if let Some((k, _)) = self.entries.get_key_value(candidate.as_str()) {
                    if !found.contains(&k.as_str()) {
                        found.push(k);
                    }
                }
            }
        }
        found
    }

    /// All senses of a surface token, through its base forms.
    pub fn senses(&self, token: &str) -> Vec<&Sense> {
        self.base_forms(token)
            .into_iter()
            .flat_map(|lemma| self.entries[lemma].iter())
            .collect()
    }
}

/// Reads `lemma<TAB>pos<TAB>sense_id<TAB>gloss` records.
pub fn load_lexical_db(path: impl AsRef<Path>, fw: &FunctionWords) -> Result<LexicalDatabase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DartError::io(path, e))?;
    let db = parse_lexical_db(&text, fw);
    if db.is_empty() {
        return Err(DartError::Data(format!("lexical database {} is empty", path.display())));
    }
    if db.malformed > 0 {
        log::warn!("{}: skipped {} malformed records", path.display(), db.malformed);
    }
    Ok(db)
}

pub fn parse_lexical_db(text: &str, fw: &FunctionWords) -> LexicalDatabase {
    let mut db = LexicalDatabase::new();
    for line in text.lines() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        match fields.as_slice() {
            [lemma, pos, id, gloss] if !lemma.trim().is_empty() => db.add_sense(lemma, pos, id, gloss, fw),
            _ => db.malformed += 1,
        }
    }
    db
}

/// Thresholds for clustering (`s_threshold`) and grounding (`g_threshold`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextSimilarityParams {
    pub s_threshold: f64,
    pub g_threshold: f64,
}

impl Default for TextSimilarityParams {
    fn default() -> Self {
        Self {
            s_threshold: 0.5,
            g_threshold: 0.75,
        }
    }
}

impl TextSimilarityParams {
    pub fn new(s_threshold: f64, g_threshold: f64) -> Result<Self> {
        let p = Self {
            s_threshold,
            g_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.s_threshold && self.s_threshold <= self.g_threshold && self.g_threshold <= 1.0) {
            return Err(DartError::Config(format!(
                "thresholds must satisfy 0 <= sthreshold ({}) <= gthreshold ({}) <= 1",
                self.s_threshold, self.g_threshold
            )));
        }
        Ok(())
    }
}

/// `2·|g1 ∩ g2| / (|g1| + |g2|)` over token multisets.
pub fn gloss_overlap(g1: &[String], g2: &[String]) -> f64 {
    let total = g1.len() + g2.len();
    if total == 0 {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in g1 {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut shared = 0usize;
    for t in g2 {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    (2 * shared) as f64 / total as f64
}

pub fn word_similarity(w1: &str, w2: &str, db: &LexicalDatabase) -> f64 {
    if w1 == w2 {
        return 1.0;
    }
    let (s1, s2) = (db.senses(w1), db.senses(w2));
    let mut best = 0.0f64;
    for a in &s1 {
        for b in &s2 {
            best = best.max(gloss_overlap(&a.gloss, &b.gloss));
        }
    }
    best
}

fn directed_score<S: AsRef<str>>(from: &[S], to: &[S], db: &LexicalDatabase) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|w| {
            to.iter()
                .map(|v| word_similarity(w.as_ref(), v.as_ref(), db))
                .fold(0.0, f64::max)
        })
        .sum();
    sum / from.len() as f64
}

/// Symmetric text similarity in [0, 1]; 0 when either side is empty.
pub fn text_similarity<S: AsRef<str>>(t1: &[S], t2: &[S], db: &LexicalDatabase) -> f64 {
    if t1.is_empty() || t2.is_empty() {
        return 0.0;
    }
    0.5 * (directed_score(t1, t2, db) + directed_score(t2, t1, db))
}

/// Convenience wrapper tokenizing raw text first.
pub fn text_similarity_str(a: &str, b: &str, db: &LexicalDatabase) -> f64 {
    text_similarity(&tokenize(a), &tokenize(b), db)
}
