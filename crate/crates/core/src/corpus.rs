//! Extraction-corpus ingestion: raw open-IE triples are restricted to instance
//! pairs of the two input classes and tagged with a direction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DartError, Result};
use crate::text::{normalize, FunctionWords};

/// Orientation of a corpus triple relative to the (D1, D2) class pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// subject ∈ D1, object ∈ D2
    Forward,
    /// subject ∈ D2, object ∈ D1
    Reverse,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "forward" | "f" => Ok(Direction::Forward),
            "reverse" | "r" => Ok(Direction::Reverse),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// One of the two input classes together with its instance names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    /// Class IRI (or plain name) used when matching against the ontology schema.
    pub id: String,
    pub label: String,
    pub instances: BTreeSet<String>,
}

impl ClassSpec {
    /// Builds a class from raw names; names are normalized and deduplicated.
    pub fn new<I, S>(id: impl Into<String>, label: impl Into<String>, names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let label = label.into();
        let instances: BTreeSet<String> = names
            .into_iter()
            .map(|n| normalize(n.as_ref()))
            .filter(|n| !n.is_empty())
            .collect();
        if instances.is_empty() {
            return Err(DartError::Data(format!("class `{label}` has no instances")));
        }
        Ok(Self {
            id: id.into(),
            label,
            instances,
        })
    }

    pub fn contains(&self, normalized_name: &str) -> bool {
        self.instances.contains(normalized_name)
    }
}

/// Reads a newline-delimited instance list. The class id defaults to the label.
pub fn load_class_instances(path: impl AsRef<Path>, label: &str) -> Result<ClassSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DartError::io(path, e))?;
    ClassSpec::new(label, label, text.lines())
}

/// A triple as it appears in the extraction file, before class matching.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    /// Parsed when present; the pipeline does not use it.
    pub confidence: Option<f64>,
    /// Record multiplicity; 1 unless the format carries a count column.
    pub count: u64,
}

impl RawTriple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
            confidence: None,
            count: 1,
        }
    }
}

/// Zero-based column positions for tab-separated extraction dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub subject: usize,
    pub predicate: usize,
    pub object: usize,
    pub confidence: Option<usize>,
    pub count: Option<usize>,
}

impl ColumnMap {
    /// `subject, predicate, object[, confidence]`
    pub const SIMPLE: ColumnMap = ColumnMap {
        subject: 0,
        predicate: 1,
        object: 2,
        confidence: Some(3),
        count: None,
    };

    /// ReVerb ClueWeb extraction dump: id, arg1, rel, arg2, normalized arg1,
    /// normalized rel, normalized arg2, sentence count, confidence, urls.
    /// The normalized columns are used.
    pub const RCE: ColumnMap = ColumnMap {
        subject: 4,
        predicate: 5,
        object: 6,
        confidence: Some(8),
        count: Some(7),
    };

    fn required_fields(&self) -> usize {
        self.subject.max(self.predicate).max(self.object) + 1
    }

    /// Parses `subject=4,predicate=5,object=6,confidence=8,count=7`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let mut map = ColumnMap {
            subject: usize::MAX,
            predicate: usize::MAX,
            object: usize::MAX,
            confidence: None,
            count: None,
        };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| DartError::Config(format!("bad column entry `{part}`")))?;
            let idx: usize = value
                .trim()
                .parse()
                .map_err(|_| DartError::Config(format!("bad column index in `{part}`")))?;
            match key.trim() {
                "subject" => map.subject = idx,
                "predicate" => map.predicate = idx,
                "object" => map.object = idx,
                "confidence" => map.confidence = Some(idx),
                "count" => map.count = Some(idx),
                other => return Err(DartError::Config(format!("unknown column `{other}`"))),
            }
        }
        if [map.subject, map.predicate, map.object].contains(&usize::MAX) {
            return Err(DartError::Config(
                "column map must name subject, predicate and object".into(),
            ));
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    SimpleTsv,
    Rce(ColumnMap),
}

impl CorpusFormat {
    fn columns(&self) -> ColumnMap {
        match self {
            CorpusFormat::SimpleTsv => ColumnMap::SIMPLE,
            CorpusFormat::Rce(map) => *map,
        }
    }
}

/// Streaming reader over an extraction file. Malformed records are skipped
/// and counted; only I/O failures are surfaced as errors.
pub struct ExtractionReader<R> {
    lines: std::io::Lines<R>,
    columns: ColumnMap,
    path: PathBuf,
    malformed: usize,
}

impl<R: BufRead> ExtractionReader<R> {
    pub fn new(reader: R, format: CorpusFormat, path: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            columns: format.columns(),
            path: path.into(),
            malformed: 0,
        }
    }

    pub fn malformed(&self) -> usize {
        self.malformed
    }

    fn parse_record(&self, line: &str) -> Option<RawTriple> {
        let fields: Vec<&str> = line.split('\t').collect();
        let cols = &self.columns;
        if fields.len() < 3 || fields.len() < cols.required_fields() {
            return None;
        }
        let (subject, predicate, object) = (
            fields[cols.subject].trim(),
            fields[cols.predicate].trim(),
            fields[cols.object].trim(),
        );
        if subject.is_empty() || predicate.is_empty() || object.is_empty() {
            return None;
        }
        let confidence = cols
            .confidence
            .and_then(|i| fields.get(i))
            .and_then(|v| v.trim().parse::<f64>().ok());
        let count = match cols.count.and_then(|i| fields.get(i)) {
            Some(v) => v.trim().parse::<u64>().ok().filter(|&c| c >= 1)?,
            None => 1,
        };
        Some(RawTriple {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
            confidence,
            count,
        })
    }
}

impl<R: BufRead> Iterator for ExtractionReader<R> {
    type Item = Result<RawTriple>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(DartError::io(&self.path, e))),
            };
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_record(&line) {
                Some(t) => return Some(Ok(t)),
                None => self.malformed += 1,
            }
        }
    }
}

pub fn open_extraction_file(
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<ExtractionReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DartError::io(path, e))?;
    Ok(ExtractionReader::new(BufReader::new(file), format, path))
}

/// Parsed extraction file held in memory.
#[derive(Debug, Clone, Default)]
pub struct Extractions {
    pub triples: Vec<RawTriple>,
    pub malformed: usize,
}

pub fn parse_extraction_file(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Extractions> {
    let mut reader = open_extraction_file(path, format)?;
    let triples = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok(Extractions {
        triples,
        malformed: reader.malformed(),
    })
}

/// A corpus triple whose subject and object belong to the two input classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedTriple {
    pub subject: String,
    pub pattern: String,
    pub object: String,
    pub direction: Direction,
    pub count: u64,
}

/// The clustering unit: a normalized predicate in one direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternKey {
    pub text: String,
    pub direction: Direction,
    pub content_words: Vec<String>,
    pub frequency: u64,
}

impl PatternKey {
    pub fn new(text: &str, direction: Direction, frequency: u64, fw: &FunctionWords) -> Self {
        Self {
            text: text.to_string(),
            direction,
            content_words: fw.content_words(text),
            frequency,
        }
    }

    /// Identity of the pattern: `(text, direction)`.
    pub fn id(&self) -> PatternId {
        PatternId {
            text: self.text.clone(),
            direction: self.direction,
        }
    }

    pub fn same_pattern(&self, other: &PatternKey) -> bool {
        self.text == other.text && self.direction == other.direction
    }

    pub fn tokens(&self) -> Vec<String> {
        crate::text::tokenize(&self.text)
    }
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.text, self.direction)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternId {
    pub text: String,
    pub direction: Direction,
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.text, self.direction)
    }
}

/// The directed triple corpus C together with its pattern inventory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    /// Sorted by (subject, pattern, object, direction).
    pub triples: Vec<DirectedTriple>,
    /// Sorted by (text, direction).
    pub patterns: Vec<PatternKey>,
}

impl Corpus {
    /// Reassembles a corpus from persisted triples, recomputing pattern frequencies.
    pub fn from_triples(triples: impl IntoIterator<Item = DirectedTriple>, fw: &FunctionWords) -> Self {
        let mut merged: BTreeMap<(String, String, String, Direction), u64> = BTreeMap::new();
        for t in triples {
            *merged
                .entry((t.subject, t.pattern, t.object, t.direction))
                .or_default() += t.count;
        }
        finish_corpus(merged, fw)
    }

    pub fn total_count(&self) -> u64 {
        self.triples.iter().map(|t| t.count).sum()
    }
}

fn finish_corpus(merged: BTreeMap<(String, String, String, Direction), u64>, fw: &FunctionWords) -> Corpus {
    let mut freq: BTreeMap<(String, Direction), u64> = BTreeMap::new();
    let triples: Vec<DirectedTriple> = merged
        .into_iter()
        .map(|((subject, pattern, object, direction), count)| {
            *freq.entry((pattern.clone(), direction)).or_default() += count;
            DirectedTriple {
                subject,
                pattern,
                object,
                direction,
                count,
            }
        })
        .collect();
    let patterns = freq
        .into_iter()
        .map(|((text, direction), frequency)| PatternKey::new(&text, direction, frequency, fw))
        .collect();
    Corpus { triples, patterns }
}

/// Incremental form of [`build_corpus`] for streaming large extraction files.
pub struct CorpusBuilder<'a> {
    d1: &'a ClassSpec,
    d2: &'a ClassSpec,
    fw: &'a FunctionWords,
    merged: BTreeMap<(String, String, String, Direction), u64>,
    seen: usize,
    matched: usize,
}

impl<'a> CorpusBuilder<'a> {
    pub fn new(d1: &'a ClassSpec, d2: &'a ClassSpec, fw: &'a FunctionWords) -> Self {
        Self {
            d1,
            d2,
            fw,
            merged: BTreeMap::new(),
            seen: 0,
            matched: 0,
        }
    }

    /// Direction of a normalized (subject, object) pair, Forward preferred.
    pub fn direction_of(&self, subject: &str, object: &str) -> Option<Direction> {
        if self.d1.contains(subject) && self.d2.contains(object) {
            Some(Direction::Forward)
        } else if self.d2.contains(subject) && self.d1.contains(object) {
            Some(Direction::Reverse)
        } else {
            None
        }
    }

    pub fn push(&mut self, raw: &RawTriple) {
        self.seen += 1;
        let subject = normalize(&raw.subject);
        let object = normalize(&raw.object);
        let pattern = normalize(&raw.predicate);
        if pattern.is_empty() {
            return;
        }
        if let Some(direction) = self.direction_of(&subject, &object) {
            self.matched += 1;
            *self
                .merged
                .entry((subject, pattern, object, direction))
                .or_default() += raw.count.max(1);
        }
    }

    /// Number of raw records pushed and how many matched the class pair.
    pub fn stats(&self) -> (usize, usize) {
        (self.seen, self.matched)
    }

    pub fn finish(self) -> Corpus {
        finish_corpus(self.merged, self.fw)
    }
}

/// Restricts raw triples to the class pair, assigns directions and merges
/// duplicate records. Output is independent of input order.
pub fn build_corpus<'r, I>(raw: I, d1: &ClassSpec, d2: &ClassSpec, fw: &FunctionWords) -> Corpus
where
    I: IntoIterator<Item = &'r RawTriple>,
{
    let mut builder = CorpusBuilder::new(d1, d2, fw);
    for t in raw {
        builder.push(t);
    }
    builder.finish()
}
