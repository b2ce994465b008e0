//! Relation discovery: contextual filtering followed by single-pass
//! clustering of patterns around representative relations.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{PatternId, PatternKey};
use crate::embed::{contextual_filter, EmbeddingStore};
use crate::error::Result;
use crate::lexsim::{text_similarity, LexicalDatabase, TextSimilarityParams};
use crate::text::FunctionWords;

/// Which tokens of a pattern enter the text similarity during clustering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityInput {
    /// Function words removed (default).
    #[default]
    Content,
    /// Every token of the normalized pattern.
    Raw,
}

impl FromStr for SimilarityInput {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "content" => Ok(SimilarityInput::Content),
            "raw" => Ok(SimilarityInput::Raw),
            other => Err(format!("unknown similarity input `{other}` (expected content|raw)")),
        }
    }
}

impl fmt::Display for SimilarityInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityInput::Content => "content",
            SimilarityInput::Raw => "raw",
        })
    }
}

/// Pattern similarity as used by the clustering stage.
pub fn pattern_similarity(a: &PatternKey, b: &PatternKey, db: &LexicalDatabase, input: SimilarityInput) -> f64 {
    match input {
        SimilarityInput::Content => text_similarity(&a.content_words, &b.content_words, db),
        SimilarityInput::Raw => text_similarity(&a.tokens(), &b.tokens(), db),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCluster {
    /// Creation index.
    pub id: usize,
    /// Members in insertion order.
    pub members: Vec<PatternKey>,
    /// Index of the representative in `members`.
    pub representative: usize,
}

impl RelationCluster {
    pub fn singleton(id: usize, founder: PatternKey) -> Self {
        Self {
            id,
            members: vec![founder],
            representative: 0,
        }
    }

    pub fn representative(&self) -> &PatternKey {
        &self.members[self.representative]
    }

    pub fn contains(&self, id: &PatternId) -> bool {
        self.members
            .iter()
            .any(|m| m.text == id.text && m.direction == id.direction)
    }
}

/// Tie-break for representatives: higher frequency, then lexicographic text,
/// then Forward before Reverse. `Less` means `a` is preferred.
fn rep_preference(a: &PatternKey, b: &PatternKey) -> Ordering {
    b.frequency
        .cmp(&a.frequency)
        .then_with(|| a.text.cmp(&b.text))
        .then_with(|| a.direction.cmp(&b.direction))
}

/// Picks the member with maximum average similarity to the other members,
/// given the per-member similarity sums.
fn argmax_average(members: &[PatternKey], sums: &[f64]) -> usize {
    if members.len() == 1 {
        return 0;
    }
    let denom = (members.len() - 1) as f64;
    let mut best = 0;
    for i in 1..members.len() {
        let (ai, ab) = (sums[i] / denom, sums[best] / denom);
        if ai > ab || (ai == ab && rep_preference(&members[i], &members[best]) == Ordering::Less) {
            best = i;
        }
    }
    best
}

/// Recomputes a cluster's representative from scratch.
pub fn recompute_representative(members: &[PatternKey], db: &LexicalDatabase, input: SimilarityInput) -> usize {
    assert!(!members.is_empty(), "empty cluster has no representative");
    let sums: Vec<f64> = (0..members.len())
        .map(|i| {
            (0..members.len())
                .filter(|&j| j != i)
                .map(|j| pattern_similarity(&members[i], &members[j], db, input))
                .sum()
        })
        .collect();
    argmax_average(members, &sums)
}

/// One step of the single pass, for audit and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: usize,
    pub pattern: PatternId,
    pub cluster: usize,
    /// True when the pattern founded a new cluster.
    pub opened: bool,
    /// Best similarity to an existing representative; `None` for the first pattern.
    pub similarity: Option<f64>,
    pub rep_before: Option<PatternId>,
    pub rep_after: PatternId,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sim = self.similarity.map_or("-".to_string(), |s| s.to_string());
        let before = self
            .rep_before
            .as_ref()
            .map_or("-".to_string(), |p| format!("{}|{}", p.text, p.direction));
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}|{}",
            self.step,
            self.pattern.text,
            self.pattern.direction,
            if self.opened { "open" } else { "join" },
            self.cluster,
            sim,
            before,
            self.rep_after.text,
            self.rep_after.direction
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<RelationCluster>,
    pub trace: Vec<TraceEvent>,
}

impl Clustering {
    pub fn representatives(&self) -> Vec<&PatternKey> {
        self.clusters.iter().map(RelationCluster::representative).collect()
    }
}

/// Descending frequency, then text, then Forward first.
pub fn processing_order(patterns: &mut [PatternKey]) {
    patterns.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.text.cmp(&b.text))
            .then_with(|| a.direction.cmp(&b.direction))
    });
}

/// Single-pass clustering over `patterns` in the given order.
///
/// Each pattern joins the cluster whose current representative is most
/// similar to it (earliest cluster on ties) when that similarity reaches
/// `params.s_threshold`; otherwise it founds a new cluster. Only the
/// augmented cluster's representative is recomputed.
pub fn single_pass_cluster(
    patterns: &[PatternKey],
    params: &TextSimilarityParams,
    db: &LexicalDatabase,
    input: SimilarityInput,
) -> Clustering {
    let mut clusters: Vec<RelationCluster> = Vec::new();
    // per cluster, per member: sum of similarities to the other members
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut trace = Vec::with_capacity(patterns.len());

    for (step, p) in patterns.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (cid, c) in clusters.iter().enumerate() {
            let s = pattern_similarity(p, c.representative(), db, input);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((cid, s));
            }
        }

        match best {
            Some((cid, s)) if s >= params.s_threshold => {
                let rep_before = clusters[cid].representative().id();
                let cluster = &mut clusters[cid];
                let cluster_sums = &mut sums[cid];
                let mut new_sum = 0.0;
                for (j, m) in cluster.members.iter().enumerate() {
                    let sim = pattern_similarity(m, p, db, input);
                    cluster_sums[j] += sim;
                    new_sum += sim;
                }
                cluster.members.push(p.clone());
                cluster_sums.push(new_sum);
                cluster.representative = argmax_average(&cluster.members, cluster_sums);
                trace.push(TraceEvent {
                    step,
                    pattern: p.id(),
                    cluster: cid,
                    opened: false,
                    similarity: Some(s),
                    rep_before: Some(rep_before),
                    rep_after: cluster.representative().id(),
                });
            }
            _ => {
                let cid = clusters.len();
                clusters.push(RelationCluster::singleton(cid, p.clone()));
                sums.push(vec![0.0]);
                trace.push(TraceEvent {
                    step,
                    pattern: p.id(),
                    cluster: cid,
                    opened: true,
                    similarity: best.map(|(_, s)| s),
                    rep_before: None,
                    rep_after: p.id(),
                });
            }
        }
    }
    Clustering { clusters, trace }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySettings {
    pub c_threshold: f64,
    pub params: TextSimilarityParams,
    pub input: SimilarityInput,
}

impl Default for DiscoverySettings {
    fn default() -> Self {
        Self {
            c_threshold: 0.2,
            params: TextSimilarityParams::default(),
            input: SimilarityInput::Content,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Discovery {
    /// Patterns that passed the contextual filter, in processing order.
    pub filtered: Vec<PatternKey>,
    pub clustering: Clustering,
}

impl Discovery {
    pub fn clusters(&self) -> &[RelationCluster] {
        &self.clustering.clusters
    }

    pub fn representatives(&self) -> Vec<&PatternKey> {
        self.clustering.representatives()
    }
}

/// Filter the corpus patterns against `dname`, then cluster the survivors.
pub fn discover_relations(
    patterns: &[PatternKey],
    dname: &str,
    settings: &DiscoverySettings,
    store: &EmbeddingStore,
    db: &LexicalDatabase,
    fw: &FunctionWords,
) -> Result<Discovery> {
    settings.params.validate()?;
    if patterns.is_empty() {
        return Ok(Discovery::default());
    }
    let mut filtered = contextual_filter(patterns, dname, settings.c_threshold, store, fw)?;
    processing_order(&mut filtered);
    let clustering = single_pass_cluster(&filtered, &settings.params, db, settings.input);
    Ok(Discovery { filtered, clustering })
}
