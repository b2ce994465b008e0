//! Reading and writing the per-stage artifacts. Every artifact is plain TSV
//! or JSON with a deterministic row order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineRun;
use crate::corpus::{ClassSpec, Corpus, DirectedTriple, Direction, PatternId, PatternKey};
use crate::discover::{RelationCluster, SimilarityInput, TraceEvent};
use crate::error::{DartError, Result};
use crate::eval::ClassPair;
use crate::ground::{CandidateAxiom, GroundingDecision, Verdict};
use crate::text::FunctionWords;
use crate::triples::{relation_slug, GeneratedTriple};

pub const CLASSES_JSON: &str = "classes.json";
pub const CORPUS_TSV: &str = "corpus.tsv";
pub const PATTERNS_TSV: &str = "patterns.tsv";
pub const FILTERED_TSV: &str = "filtered_patterns.tsv";
pub const CLUSTERS_JSON: &str = "clusters.json";
pub const TRACE_LOG: &str = "trace.log";
pub const DECISIONS_TSV: &str = "decisions.tsv";
pub const AXIOMS_TSV: &str = "axioms.tsv";
pub const TRIPLES_TSV: &str = "triples.tsv";
pub const TRIPLES_NT: &str = "triples.nt";
pub const BASELINE_RELATIONS_TSV: &str = "baseline_relations.tsv";
pub const BASELINE_SEEDS_TSV: &str = "baseline_seeds.tsv";
pub const BASELINE_REPORT_JSON: &str = "baseline_report.json";
pub const REPORT_JSON: &str = "report.json";

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| DartError::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| DartError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DartError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| DartError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| DartError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Data rows of a TSV file with their 1-based line numbers; the header is skipped.
fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
}

fn field<'a>(path: &Path, line: usize, fields: &[&'a str], idx: usize) -> Result<&'a str> {
    fields
        .get(idx)
        .copied()
        .ok_or_else(|| DartError::parse(path, line, format!("missing column {}", idx + 1)))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, fields: &[&str], idx: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = field(path, line, fields, idx)?;
    raw.parse()
        .map_err(|e| DartError::parse(path, line, format!("column {}: `{raw}`: {e}", idx + 1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassesFile {
    pub d1: ClassSpec,
    pub d2: ClassSpec,
}

impl ClassesFile {
    pub fn pair(&self) -> ClassPair {
        ClassPair {
            d1: self.d1.label.clone(),
            d2: self.d2.label.clone(),
        }
    }
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = String::from("subject\tpattern\tobject\tdirection\tcount\n");
    for t in &corpus.triples {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", t.subject, t.pattern, t.object, t.direction, t.count).unwrap();
    }
    write_text(&dir.join(CORPUS_TSV), &out)?;
    let mut pats = String::from("text\tdirection\tfrequency\n");
    for p in &corpus.patterns {
        writeln!(pats, "{}\t{}\t{}", p.text, p.direction, p.frequency).unwrap();
    }
    write_text(&dir.join(PATTERNS_TSV), &pats)
}

pub fn read_corpus(path: &Path, fw: &FunctionWords) -> Result<Corpus> {
    let text = read_text(path)?;
    let mut triples = Vec::new();
    for (line, f) in tsv_rows(&text) {
        triples.push(DirectedTriple {
            subject: field(path, line, &f, 0)?.to_string(),
            pattern: field(path, line, &f, 1)?.to_string(),
            object: field(path, line, &f, 2)?.to_string(),
            direction: parse_field(path, line, &f, 3)?,
            count: parse_field(path, line, &f, 4)?,
        });
    }
    Ok(Corpus::from_triples(triples, fw))
}

pub fn read_patterns(path: &Path, fw: &FunctionWords) -> Result<Vec<PatternKey>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, f) in tsv_rows(&text) {
        let text = field(path, line, &f, 0)?;
        out.push(PatternKey::new(
            text,
            parse_field(path, line, &f, 1)?,
            parse_field(path, line, &f, 2)?,
            fw,
        ));
    }
    Ok(out)
}

pub fn write_filtered(dir: &Path, filtered: &[(PatternKey, Option<f64>)]) -> Result<()> {
    let mut out = String::from("text\tdirection\tfrequency\tcontext_score\n");
    for (p, score) in filtered {
        let score = score.map_or("-".to_string(), |s| format!("{s:.6}"));
        writeln!(out, "{}\t{}\t{}\t{}", p.text, p.direction, p.frequency, score).unwrap();
    }
    write_text(&dir.join(FILTERED_TSV), &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub representative: PatternKey,
    pub members: Vec<PatternKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersFile {
    pub classes: Option<ClassesFile>,
    pub dname: String,
    pub c_threshold: f64,
    pub s_threshold: f64,
    pub similarity_input: SimilarityInput,
    pub filtered_patterns: usize,
    pub clusters: Vec<ClusterRecord>,
}

impl ClustersFile {
    pub fn relation_clusters(&self) -> Result<Vec<RelationCluster>> {
        self.clusters
            .iter()
            .map(|c| {
                let representative = c
                    .members
                    .iter()
                    .position(|m| m.same_pattern(&c.representative))
                    .ok_or_else(|| {
                        DartError::Data(format!("cluster {}: representative is not a member", c.id))
                    })?;
                Ok(RelationCluster {
                    id: c.id,
                    members: c.members.clone(),
                    representative,
                })
            })
            .collect()
    }

    pub fn records(clusters: &[RelationCluster]) -> Vec<ClusterRecord> {
        clusters
            .iter()
            .map(|c| ClusterRecord {
                id: c.id,
                representative: c.representative().clone(),
                members: c.members.clone(),
            })
            .collect()
    }
}

pub fn write_trace(dir: &Path, trace: &[TraceEvent]) -> Result<()> {
    let mut out = String::from("# step\tpattern\tdirection\taction\tcluster\tsimilarity\trep_before\trep_after\n");
    for e in trace {
        writeln!(out, "{e}").unwrap();
    }
    write_text(&dir.join(TRACE_LOG), &out)
}

/// One row of `decisions.tsv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub relation: String,
    pub direction: Direction,
    pub verdict: Verdict,
    pub matched_iri: Option<String>,
    pub support: f64,
    pub rep_similarity: f64,
    pub cluster_id: usize,
    pub relation_domain: String,
    pub relation_range: String,
}

impl From<&GroundingDecision> for DecisionRecord {
    fn from(d: &GroundingDecision) -> Self {
        Self {
            relation: d.relation.text.clone(),
            direction: d.relation.direction,
            verdict: d.verdict,
            matched_iri: d.matched.as_ref().map(|m| m.iri.clone()),
            support: d.member_support,
            rep_similarity: d.rep_similarity,
            cluster_id: d.cluster_id,
            relation_domain: d.relation_domain.clone(),
            relation_range: d.relation_range.clone(),
        }
    }
}

impl crate::triples::RelationDecision for DecisionRecord {
    fn cluster_id(&self) -> usize {
        self.cluster_id
    }
    fn relation_id(&self) -> PatternId {
        DecisionRecord::relation_id(self)
    }
    fn verdict(&self) -> Verdict {
        self.verdict
    }
    fn matched_iri(&self) -> Option<&str> {
        self.matched_iri.as_deref()
    }
}

impl DecisionRecord {
    pub fn relation_id(&self) -> PatternId {
        PatternId {
            text: self.relation.clone(),
            direction: self.direction,
        }
    }

    pub fn axiom(&self) -> Option<CandidateAxiom> {
        let axiom = match self.verdict {
            Verdict::Equivalent => "owl:equivalentProperty",
            Verdict::SubProperty => "rdfs:subPropertyOf",
            Verdict::Inverse { .. } => "owl:inverseOf",
            Verdict::New | Verdict::Discard => return None,
        };
        Some(CandidateAxiom {
            relation: self.relation.clone(),
            direction: self.direction,
            verdict: self.verdict.to_string(),
            axiom: axiom.to_string(),
            property: self.matched_iri.clone()?,
        })
    }
}

pub fn write_decisions(dir: &Path, decisions: &[DecisionRecord], namespace: &str) -> Result<()> {
    let mut out = String::from(
        "relation\tdirection\tverdict\tmatched_iri\tsupport\trep_similarity\tcluster\tdomain\trange\n",
    );
    for d in decisions {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
            d.relation,
            d.direction,
            d.verdict,
            d.matched_iri.as_deref().unwrap_or("-"),
            d.support,
            d.rep_similarity,
            d.cluster_id,
            d.relation_domain,
            d.relation_range
        )
        .unwrap();
    }
    write_text(&dir.join(DECISIONS_TSV), &out)?;

    let mut axioms = String::from("relation\tdirection\taxiom\tproperty\tverdict\trelation_iri\n");
    for a in decisions.iter().filter_map(DecisionRecord::axiom) {
        writeln!(
            axioms,
            "{}\t{}\t{}\t{}\t{}\t{namespace}{}",
            a.relation,
            a.direction,
            a.axiom,
            a.property,
            a.verdict,
            relation_slug(&a.relation)
        )
        .unwrap();
    }
    write_text(&dir.join(AXIOMS_TSV), &axioms)
}

pub fn read_decisions(path: &Path) -> Result<Vec<DecisionRecord>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, f) in tsv_rows(&text) {
        let matched = field(path, line, &f, 3)?;
        out.push(DecisionRecord {
            relation: field(path, line, &f, 0)?.to_string(),
            direction: parse_field(path, line, &f, 1)?,
            verdict: parse_field(path, line, &f, 2)?,
            matched_iri: (matched != "-").then(|| matched.to_string()),
            support: parse_field(path, line, &f, 4)?,
            rep_similarity: parse_field(path, line, &f, 5)?,
            cluster_id: parse_field(path, line, &f, 6)?,
            relation_domain: field(path, line, &f, 7)?.to_string(),
            relation_range: field(path, line, &f, 8)?.to_string(),
        });
    }
    Ok(out)
}

pub fn write_triples(dir: &Path, triples: &[GeneratedTriple], relation_ns: &str, entity_ns: &str) -> Result<()> {
    let mut out =
        String::from("subject\trelation\tobject\tdirection\tverdict\tmatched_iri\tsource_count\tprovenance\n");
    for t in triples {
        let provenance: Vec<String> = t
            .provenance
            .iter()
            .map(|p| format!("{}|{}:{}", p.pattern.text, p.pattern.direction, p.count))
            .collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.subject,
            t.relation.text,
            t.object,
            t.relation.direction,
            t.verdict,
            t.matched_iri.as_deref().unwrap_or("-"),
            t.source_count,
            provenance.join(";")
        )
        .unwrap();
    }
    write_text(&dir.join(TRIPLES_TSV), &out)?;
    write_text(
        &dir.join(TRIPLES_NT),
        &crate::triples::to_ntriples(triples, relation_ns, entity_ns),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub classes: Option<ClassPair>,
    pub context_patterns: usize,
    pub k: Option<usize>,
    pub k_range: Option<(usize, usize)>,
    pub sse_curve: Vec<(usize, f64)>,
    pub relations: usize,
    pub seeds: usize,
}

pub fn write_baseline(dir: &Path, run: Option<&BaselineRun>, report: &BaselineReport) -> Result<()> {
    let mut rel = String::from("relation\tpattern\tdirection\tmembers\tmember_patterns\n");
    let mut seeds = String::from("relation\tpattern\trank\tsubject\tobject\tweight\n");
    if let Some(run) = run {
        for (i, r) in run.relations.iter().enumerate() {
            let members: Vec<String> = r.members.iter().map(|m| format!("{}|{}", m.text, m.direction)).collect();
            writeln!(
                rel,
                "{i}\t{}\t{}\t{}\t{}",
                r.pattern.text,
                r.pattern.direction,
                r.members.len(),
                members.join(";")
            )
            .unwrap();
            for (rank, s) in r.seeds.iter().enumerate() {
                writeln!(
                    seeds,
                    "{i}\t{}\t{}\t{}\t{}\t{:.6}",
                    r.pattern.text,
                    rank + 1,
                    s.subject,
                    s.object,
                    s.weight
                )
                .unwrap();
            }
        }
    }
    write_text(&dir.join(BASELINE_RELATIONS_TSV), &rel)?;
    write_text(&dir.join(BASELINE_SEEDS_TSV), &seeds)?;
    write_json(&dir.join(BASELINE_REPORT_JSON), report)
}
