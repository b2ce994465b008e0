//! Word-embedding store and the contextual (domain-name) pattern filter.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::PatternKey;
use crate::error::{DartError, Result};
use crate::text::FunctionWords;

/// Pretrained vectors in word2vec text format.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
    duplicates: usize,
}

impl EmbeddingStore {
    pub fn from_vectors<I>(dimension: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut store = Self {
            dimension,
            vectors: HashMap::new(),
            duplicates: 0,
        };
        for (token, v) in vectors {
            if v.len() != dimension {
                return Err(DartError::Data(format!(
                    "vector for `{token}` has dimension {}, expected {dimension}",
                    v.len()
                )));
            }
            if store.vectors.insert(token, v).is_some() {
                store.duplicates += 1;
            }
        }
        Ok(store)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of tokens that appeared more than once in the source (last one wins).
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Cosine between two in-vocabulary tokens.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.get(a)?, self.get(b)?))
    }
}

/// Loads `<vocab> <dim>` followed by `token v1 .. vdim` lines.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DartError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(line) => line.map_err(|e| DartError::io(path, e))?,
        None => return Err(DartError::parse(path, 1, "missing header line")),
    };
    let mut parts = header.split_whitespace();
    let (vocab, dim) = match (
        parts.next().and_then(|v| v.parse::<usize>().ok()),
        parts.next().and_then(|v| v.parse::<usize>().ok()),
    ) {
        (Some(v), Some(d)) if d > 0 => (v, d),
        _ => return Err(DartError::parse(path, 1, "header must be `<vocab> <dim>`")),
    };

    let mut store = EmbeddingStore {
        dimension: dim,
        vectors: HashMap::with_capacity(vocab),
        duplicates: 0,
    };
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| DartError::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values = fields
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| DartError::parse(path, line_no, format!("bad component: {e}")))?;
        if values.len() != dim {
            return Err(DartError::parse(
                path,
                line_no,
                format!("vector has {} components, header says {dim}", values.len()),
            ));
        }
        if store.vectors.insert(token.to_string(), values).is_some() {
            store.duplicates += 1;
        }
    }
    if store.duplicates > 0 {
        log::warn!("{}: {} duplicate tokens, last occurrence kept", path.display(), store.duplicates);
    }
    if store.vectors.len() + store.duplicates != vocab {
        log::warn!(
            "{}: header announces {vocab} vectors, file holds {}",
            path.display(),
            store.vectors.len() + store.duplicates
        );
    }
    Ok(store)
}

/// Cosine similarity; 0 when either vector is all zeros.
///
/// Panics if the vectors differ in length.
pub fn cosine(u: &[f32], v: &[f32]) -> f64 {
    assert_eq!(u.len(), v.len(), "cosine of vectors with different dimensions");
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// Pseudo-disambiguation against a user-supplied domain name.
pub struct ContextFilter<'a> {
    store: &'a EmbeddingStore,
    domain_words: Vec<String>,
}

impl<'a> ContextFilter<'a> {
    /// Fails when no content word of `dname` has a vector.
    pub fn new(store: &'a EmbeddingStore, dname: &str, fw: &FunctionWords) -> Result<Self> {
        let mut words = fw.content_words(dname);
        if words.is_empty() {
            // a domain name consisting only of function words is still a name
            words = crate::text::tokenize(dname);
        }
        let domain_words: Vec<String> = words.into_iter().filter(|w| store.get(w).is_some()).collect();
        if domain_words.is_empty() {
            return Err(DartError::Config(format!(
                "domain name `{dname}` has no in-vocabulary word"
            )));
        }
        Ok(Self { store, domain_words })
    }

    /// Max cosine between any content word of the pattern and any domain word;
    /// `None` when the pattern has no in-vocabulary content word.
    pub fn score(&self, pattern: &PatternKey) -> Option<f64> {
        let mut best: Option<f64> = None;
        for w in &pattern.content_words {
            let Some(wv) = self.store.get(w) else { continue };
            for d in &self.domain_words {
                let s = cosine(wv, self.store.get(d).expect("domain words are in vocabulary"));
                best = Some(best.map_or(s, |b: f64| b.max(s)));
            }
        }
        best
    }

    pub fn keep(&self, pattern: &PatternKey, threshold: f64) -> bool {
        self.score(pattern).is_some_and(|s| s >= threshold)
    }

    pub fn filter(&self, patterns: &[PatternKey], threshold: f64) -> Vec<PatternKey> {
        patterns
            .iter()
            .filter(|p| self.keep(p, threshold))
            .cloned()
            .collect()
    }
}

/// Keeps the patterns whose content words are close enough to `dname`.
pub fn contextual_filter(
    patterns: &[PatternKey],
    dname: &str,
    c_threshold: f64,
    store: &EmbeddingStore,
    fw: &FunctionWords,
) -> Result<Vec<PatternKey>> {
    if !(0.0..=1.0).contains(&c_threshold) {
        return Err(DartError::Config(format!(
            "contextual threshold {c_threshold} outside [0, 1]"
        )));
    }
    Ok(ContextFilter::new(store, dname, fw)?.filter(patterns, c_threshold))
}
