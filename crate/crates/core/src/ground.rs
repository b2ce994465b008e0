//! Grounding of discovered relations against existing schema properties.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClassSpec, Direction, PatternKey};
use crate::discover::RelationCluster;
use crate::lexsim::{text_similarity, LexicalDatabase, TextSimilarityParams};
use crate::schema::{OntologySchema, PropertySignature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No existing property matched: a new relation for the schema.
    New,
    Equivalent,
    SubProperty,
    /// `via_subclass` marks the inverse-with-subclass-signature case.
    Inverse { via_subclass: bool },
    /// Matched, but the signatures are incompatible: ambiguous or noisy.
    Discard,
}

impl Verdict {
    /// Relations kept for triple generation.
    pub fn is_retained(self) -> bool {
        !matches!(self, Verdict::Discard)
    }

    pub fn is_axiom(self) -> bool {
        matches!(self, Verdict::Equivalent | Verdict::SubProperty | Verdict::Inverse { .. })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::New => "new",
            Verdict::Equivalent => "equivalent",
            Verdict::SubProperty => "subproperty",
            Verdict::Inverse { via_subclass: false } => "inverse",
            Verdict::Inverse { via_subclass: true } => "inverse(sub)",
            Verdict::Discard => "discard",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "new" => Verdict::New,
            "equivalent" => Verdict::Equivalent,
            "subproperty" => Verdict::SubProperty,
            "inverse" => Verdict::Inverse { via_subclass: false },
            "inverse(sub)" => Verdict::Inverse { via_subclass: true },
            "discard" => Verdict::Discard,
            other => return Err(format!("unknown verdict `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingDecision {
    pub cluster_id: usize,
    pub relation: PatternKey,
    pub matched: Option<PropertySignature>,
    /// Similarity of the representative to the matched (or best) property.
    pub rep_similarity: f64,
    /// Fraction of cluster members close to the matched (or best) property.
    pub member_support: f64,
    pub verdict: Verdict,
    pub relation_domain: String,
    pub relation_range: String,
}

/// Forward relations run D1 → D2, reverse ones D2 → D1.
pub fn relation_signature(rep: &PatternKey, d1: &ClassSpec, d2: &ClassSpec) -> (String, String) {
    match rep.direction {
        Direction::Forward => (d1.id.clone(), d2.id.clone()),
        Direction::Reverse => (d2.id.clone(), d1.id.clone()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyMatch<'a> {
    pub property: &'a PropertySignature,
    pub rep_similarity: f64,
    pub member_support: f64,
}

/// Every property the representative reaches at `g_threshold`, with the
/// share of cluster members that reach it too.
pub fn property_candidates<'a>(
    rep: &PatternKey,
    cluster: &RelationCluster,
    props: impl IntoIterator<Item = &'a PropertySignature>,
    params: &TextSimilarityParams,
    db: &LexicalDatabase,
) -> Vec<PropertyMatch<'a>> {
    let mut out = Vec::new();
    for p in props {
        let rep_similarity = text_similarity(&rep.content_words, &p.label_tokens, db);
        if rep_similarity < params.g_threshold {
            continue;
        }
        let close = cluster
            .members
            .iter()
            .filter(|m| text_similarity(&m.content_words, &p.label_tokens, db) >= params.g_threshold)
            .count();
        out.push(PropertyMatch {
            property: p,
            rep_similarity,
            member_support: close as f64 / cluster.members.len() as f64,
        });
    }
    out
}

fn candidate_order(a: &PropertyMatch<'_>, b: &PropertyMatch<'_>) -> Ordering {
    b.rep_similarity
        .total_cmp(&a.rep_similarity)
        .then_with(|| b.member_support.total_cmp(&a.member_support))
        .then_with(|| a.property.iri.cmp(&b.property.iri))
}

/// The property the relation is grounded to: a candidate supported by more
/// than half of the cluster, best by (rep similarity, support, IRI).
pub fn match_property<'a>(
    rep: &PatternKey,
    cluster: &RelationCluster,
    props: impl IntoIterator<Item = &'a PropertySignature>,
    params: &TextSimilarityParams,
    db: &LexicalDatabase,
) -> Option<PropertyMatch<'a>> {
    property_candidates(rep, cluster, props, params, db)
        .into_iter()
        .filter(|m| m.member_support > 0.5)
        .min_by(candidate_order)
}

/// Verdict for a grounded relation with signature `(domain, range)`.
///
/// Checks in order: identical signature, swapped signature, subclass
/// signature, swapped subclass signature; anything else is discarded.
pub fn classify_grounding(domain: &str, range: &str, property: &PropertySignature, schema: &OntologySchema) -> Verdict {
    let (dp, rp) = (property.domain.as_str(), property.range.as_str());
    if domain == dp && range == rp {
        Verdict::Equivalent
    } else if domain == rp && range == dp {
        Verdict::Inverse { via_subclass: false }
    } else if schema.is_subclass_of(domain, dp) && schema.is_subclass_of(range, rp) {
        Verdict::SubProperty
    } else if schema.is_subclass_of(domain, rp) && schema.is_subclass_of(range, dp) {
        Verdict::Inverse { via_subclass: true }
    } else {
        Verdict::Discard
    }
}

/// One decision per cluster representative.
pub fn ground_all(
    clusters: &[RelationCluster],
    d1: &ClassSpec,
    d2: &ClassSpec,
    schema: &OntologySchema,
    params: &TextSimilarityParams,
    db: &LexicalDatabase,
) -> Vec<GroundingDecision> {
    clusters
        .iter()
        .map(|cluster| {
            let rep = cluster.representative();
            let (relation_domain, relation_range) = relation_signature(rep, d1, d2);
            let candidates = property_candidates(rep, cluster, schema.properties.values(), params, db);
            let matched = candidates
                .iter()
                .filter(|m| m.member_support > 0.5)
                .min_by(|a, b| candidate_order(a, b));
            let (verdict, matched_sig, rep_similarity, member_support) = match matched {
                Some(m) => (
                    classify_grounding(&relation_domain, &relation_range, m.property, schema),
                    Some(m.property.clone()),
                    m.rep_similarity,
                    m.member_support,
                ),
                None => {
                    // report the strongest near-miss for auditing
                    let best = candidates.iter().min_by(|a, b| candidate_order(a, b));
                    (
                        Verdict::New,
                        None,
                        best.map_or(0.0, |m| m.rep_similarity),
                        best.map_or(0.0, |m| m.member_support),
                    )
                }
            };
            GroundingDecision {
                cluster_id: cluster.id,
                relation: rep.clone(),
                matched: matched_sig,
                rep_similarity,
                member_support,
                verdict,
                relation_domain,
                relation_range,
            }
        })
        .collect()
}

/// A proposed property axiom between a discovered relation and a schema property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAxiom {
    pub relation: String,
    pub direction: Direction,
    pub verdict: String,
    pub axiom: String,
    pub property: String,
}

impl CandidateAxiom {
    pub fn from_decision(d: &GroundingDecision) -> Option<Self> {
        let axiom = match d.verdict {
            Verdict::Equivalent => "owl:equivalentProperty",
            Verdict::SubProperty => "rdfs:subPropertyOf",
            Verdict::Inverse { .. } => "owl:inverseOf",
            Verdict::New | Verdict::Discard => return None,
        };
        Some(Self {
            relation: d.relation.text.clone(),
            direction: d.relation.direction,
            verdict: d.verdict.to_string(),
            axiom: axiom.to_string(),
            property: d.matched.as_ref()?.iri.clone(),
        })
    }
}

pub fn candidate_axioms(decisions: &[GroundingDecision]) -> Vec<CandidateAxiom> {
    decisions.iter().filter_map(CandidateAxiom::from_decision).collect()
}
