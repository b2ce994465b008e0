//! Ontology schema loaded from an N-Triples subset: property domains and
//! ranges, labels, and the subclass hierarchy with its reflexive-transitive
//! closure.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DartError, Result};
use crate::text::{split_identifier, FunctionWords};

pub const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
pub const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySignature {
    pub iri: String,
    pub label_tokens: Vec<String>,
    pub domain: String,
    pub range: String,
}

/// Domain/range declarations supplied outside the schema file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaOverrides {
    pub domains: Vec<(String, String)>,
    pub ranges: Vec<(String, String)>,
}

impl SchemaOverrides {
    /// Parses a `PROPERTY=CLASS` entry.
    pub fn parse_entry(entry: &str) -> Result<(String, String)> {
        entry
            .split_once('=')
            .map(|(p, c)| (p.trim().to_string(), c.trim().to_string()))
            .filter(|(p, c)| !p.is_empty() && !c.is_empty())
            .ok_or_else(|| DartError::Config(format!("override `{entry}` is not PROPERTY=CLASS")))
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty() && self.ranges.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OntologySchema {
    pub properties: BTreeMap<String, PropertySignature>,
    pub subclass_edges: BTreeSet<(String, String)>,
    /// class -> every class it is a subclass of, itself included.
    closure: HashMap<String, BTreeSet<String>>,
    /// Lines that could not be parsed.
    pub malformed: usize,
    /// Properties left out of grounding, with the reason.
    pub excluded: Vec<(String, String)>,
    pub has_cycles: bool,
}

impl OntologySchema {
    pub fn is_subclass_of(&self, a: &str, b: &str) -> bool {
        a == b || self.closure.get(a).is_some_and(|sup| sup.contains(b))
    }

    pub fn superclasses(&self, class: &str) -> Option<&BTreeSet<String>> {
        self.closure.get(class)
    }

    /// Every class mentioned in a subclass edge.
    pub fn classes(&self) -> impl Iterator<Item = &String> {
        self.closure.keys()
    }

    pub fn property(&self, iri: &str) -> Option<&PropertySignature> {
        self.properties.get(iri)
    }
}

/// The text after the last `#` or `/` of an IRI.
pub fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/']).next().unwrap_or(iri)
}

/// Content words of a property name: the label when one exists, the IRI's
/// local name otherwise, split on camel case and punctuation.
pub fn property_label_tokens(iri: &str, label: Option<&str>, fw: &FunctionWords) -> Vec<String> {
    let source = label.unwrap_or_else(|| local_name(iri));
    split_identifier(source)
        .into_iter()
        .map(|w| w.to_lowercase())
        .filter(|w| !fw.contains(w))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Iri(String),
    Blank(String),
    Literal { value: String, lang: Option<String> },
}

struct LineParser<'a> {
    rest: &'a str,
}

impl<'a> LineParser<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn term(&mut self) -> Option<Term> {
        self.skip_ws();
        let mut chars = self.rest.chars();
        match chars.next()? {
            '<' => {
                let end = self.rest.find('>')?;
                let iri = &self.rest[1..end];
                if iri.contains(char::is_whitespace) {
                    return None;
                }
                self.rest = &self.rest[end + 1..];
                Some(Term::Iri(iri.to_string()))
            }
            '_' => {
                let end = self.rest.find(char::is_whitespace)?;
                let id = &self.rest[..end];
                self.rest = &self.rest[end..];
                Some(Term::Blank(id.to_string()))
            }
            '"' => {
                let mut value = String::new();
                let mut escaped = false;
                let mut close = None;
                for (i, c) in self.rest.char_indices().skip(1) {
                    if escaped {
                        value.push(match c {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            other => other,
                        });
                        escaped = false;
                    } else if c == '\\' {
                        escaped = true;
                    } else if c == '"' {
                        close = Some(i);
                        break;
                    } else {
                        value.push(c);
                    }
                }
                self.rest = &self.rest[close? + 1..];
                let mut lang = None;
                if let Some(after) = self.rest.strip_prefix('@') {
                    let end = after
                        .find(|c: char| !(c.is_alphanumeric() || c == '-'))
                        .unwrap_or(after.len());
                    lang = Some(after[..end].to_lowercase());
                    self.rest = &after[end..];
                } else if let Some(after) = self.rest.strip_prefix("^^<") {
                    let end = after.find('>')?;
                    self.rest = &after[end + 1..];
                }
                Some(Term::Literal { value, lang })
            }
            _ => None,
        }
    }

    fn statement(line: &'a str) -> Option<(Term, String, Term)> {
        let mut p = LineParser { rest: line };
        let s = p.term()?;
        let Term::Iri(pred) = p.term()? else {
            return None;
        };
        let o = p.term()?;
        p.skip_ws();
        let tail = p.rest.strip_prefix('.')?.trim();
        if !(tail.is_empty() || tail.starts_with('#')) {
            return None;
        }
        if matches!(s, Term::Literal { .. }) {
            return None;
        }
        Some((s, pred, o))
    }
}

pub fn parse_schema(path: impl AsRef<Path>, fw: &FunctionWords, overrides: &SchemaOverrides) -> Result<OntologySchema> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DartError::io(path, e))?;
    let schema = parse_schema_str(&text, fw, overrides);
    if schema.malformed > 0 {
        log::warn!("{}: skipped {} unparsable lines", path.display(), schema.malformed);
    }
    Ok(schema)
}

pub fn parse_schema_str(text: &str, fw: &FunctionWords, overrides: &SchemaOverrides) -> OntologySchema {
    let mut domains: BTreeMap<String, String> = BTreeMap::new();
    let mut ranges: BTreeMap<String, String> = BTreeMap::new();
    // (is_english_or_untagged, label)
    let mut labels: BTreeMap<String, (bool, String)> = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let mut malformed = 0;

    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((s, pred, o)) = LineParser::statement(trimmed) else {
            malformed += 1;
            continue;
        };
        let Term::Iri(subject) = s else { continue };
        match (pred.as_str(), o) {
            (RDFS_DOMAIN, Term::Iri(c)) => {
                domains.insert(subject, c);
            }
            (RDFS_RANGE, Term::Iri(c)) => {
                ranges.insert(subject, c);
            }
            (RDFS_SUBCLASS_OF, Term::Iri(sup)) => {
                edges.insert((subject, sup));
            }
            (RDFS_LABEL, Term::Literal { value, lang }) => {
                let preferred = lang.as_deref().is_none_or(|l| l == "en" || l.starts_with("en-"));
                match labels.get(&subject) {
                    Some((true, _)) => {}
                    Some((false, _)) if !preferred => {}
                    _ => {
                        labels.insert(subject, (preferred, value));
                    }
                }
            }
            _ => {}
        }
    }

    // Override keys are full IRIs or unambiguous local names of known properties.
    let known: BTreeSet<String> = domains.keys().chain(ranges.keys()).chain(labels.keys()).cloned().collect();
    let resolve = |key: &str| -> Option<String> {
        if known.contains(key) {
            return Some(key.to_string());
        }
        let hits: Vec<&String> = known.iter().filter(|p| local_name(p) == key).collect();
        match hits.as_slice() {
            [one] => Some(one.to_string()),
            [] if key.contains([':', '/', '#']) => Some(key.to_string()),
            _ => None,
        }
    };
    for (target, entries, what) in [
        (&mut domains, &overrides.domains, "domain"),
        (&mut ranges, &overrides.ranges, "range"),
    ] {
        for (p, c) in entries {
            match resolve(p) {
                Some(iri) => {
                    target.insert(iri, c.clone());
                }
                None => log::warn!("{what} override for unknown or ambiguous property `{p}` ignored"),
            }
        }
    }

    let mut properties = BTreeMap::new();
    let mut excluded = Vec::new();
    let all_props: BTreeSet<String> = domains.keys().chain(ranges.keys()).cloned().collect();
    for iri in all_props {
        let (Some(domain), Some(range)) = (domains.get(&iri), ranges.get(&iri)) else {
            log::warn!("property {iri} lacks a domain or range; excluded from grounding");
            excluded.push((iri, "missing domain or range".to_string()));
            continue;
        };
        let label = labels.get(&iri).map(|(_, l)| l.as_str());
        let label_tokens = property_label_tokens(&iri, label, fw);
        if label_tokens.is_empty() {
            log::warn!("property {iri} has no content words in its name; excluded from grounding");
            excluded.push((iri, "empty label tokens".to_string()));
            continue;
        }
        properties.insert(
            iri.clone(),
            PropertySignature {
                iri,
                label_tokens,
                domain: domain.clone(),
                range: range.clone(),
            },
        );
    }

    let (closure, has_cycles) = subclass_closure(&edges);
    if has_cycles {
        log::warn!("subClassOf hierarchy contains a cycle");
    }
    OntologySchema {
        properties,
        subclass_edges: edges,
        closure,
        malformed,
        excluded,
        has_cycles,
    }
}

/// Reflexive-transitive closure by breadth-first reachability from every class.
fn subclass_closure(edges: &BTreeSet<(String, String)>) -> (HashMap<String, BTreeSet<String>>, bool) {
    let mut up: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut classes: BTreeSet<&str> = BTreeSet::new();
    for (sub, sup) in edges {
        up.entry(sub).or_default().push(sup);
        classes.insert(sub);
        classes.insert(sup);
    }
    let mut closure = HashMap::new();
    let mut has_cycles = false;
    for &c in &classes {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        seen.insert(c.to_string());
        let mut queue: VecDeque<&str> = VecDeque::from([c]);
        while let Some(x) = queue.pop_front() {
            for &y in up.get(x).into_iter().flatten() {
                if y == c {
                    has_cycles = true;
                }
                if seen.insert(y.to_string()) {
                    queue.push_back(y);
                }
            }
        }
        closure.insert(c.to_string(), seen);
    }
    (closure, has_cycles)
}
