//! Instance generation for retained relations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{DirectedTriple, Direction, PatternId, PatternKey};
use crate::discover::RelationCluster;
use crate::ground::{GroundingDecision, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub pattern: PatternId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTriple {
    pub subject: String,
    pub relation: PatternKey,
    pub object: String,
    pub verdict: Verdict,
    pub matched_iri: Option<String>,
    /// One record per member pattern that contributed.
    pub provenance: Vec<Provenance>,
    pub source_count: u64,
}

/// Orients a corpus pair for a relation: kept when the member pattern runs in
/// the relation's direction, swapped otherwise.
pub fn orient<'a>(subject: &'a str, object: &'a str, member: Direction, relation: Direction) -> (&'a str, &'a str) {
    if member == relation {
        (subject, object)
    } else {
        (object, subject)
    }
}

/// What instance generation needs to know about a grounding decision.
pub trait RelationDecision {
    fn cluster_id(&self) -> usize;
    fn relation_id(&self) -> PatternId;
    fn verdict(&self) -> Verdict;
    fn matched_iri(&self) -> Option<&str>;
}

impl RelationDecision for GroundingDecision {
    fn cluster_id(&self) -> usize {
        self.cluster_id
    }
    fn relation_id(&self) -> PatternId {
        self.relation.id()
    }
    fn verdict(&self) -> Verdict {
        self.verdict
    }
    fn matched_iri(&self) -> Option<&str> {
        self.matched.as_ref().map(|m| m.iri.as_str())
    }
}

/// Emits `(s, p, o)` for every corpus occurrence of every member of each
/// retained relation's cluster. Discarded relations produce nothing.
pub fn generate_triples<D: RelationDecision>(
    decisions: &[D],
    clusters: &[RelationCluster],
    corpus: &[DirectedTriple],
) -> Vec<GeneratedTriple> {
    let mut by_pattern: HashMap<(&str, Direction), Vec<&DirectedTriple>> = HashMap::new();
    for t in corpus {
        by_pattern.entry((t.pattern.as_str(), t.direction)).or_default().push(t);
    }
    let cluster_by_id: HashMap<usize, &RelationCluster> = clusters.iter().map(|c| (c.id, c)).collect();

    let mut out = Vec::new();
    for decision in decisions.iter().filter(|d| d.verdict().is_retained()) {
        let Some(cluster) = cluster_by_id.get(&decision.cluster_id()) else {
            log::warn!("no cluster {} for relation {}", decision.cluster_id(), decision.relation_id().text);
            continue;
        };
        let rel = cluster.representative();
        if rel.id() != decision.relation_id() {
            log::warn!(
                "cluster {} is represented by `{}`, not `{}`",
                cluster.id,
                rel.text,
                decision.relation_id().text
            );
        }
        // (subject, object) -> (member pattern -> count)
        let mut merged: BTreeMap<(String, String), BTreeMap<PatternId, u64>> = BTreeMap::new();
        for member in &cluster.members {
            let Some(occurrences) = by_pattern.get(&(member.text.as_str(), member.direction)) else {
                continue;
            };
            for t in occurrences {
                let (s, o) = orient(&t.subject, &t.object, member.direction, rel.direction);
                *merged
                    .entry((s.to_string(), o.to_string()))
                    .or_default()
                    .entry(member.id())
                    .or_default() += t.count;
            }
        }
        for ((subject, object), members) in merged {
            let provenance: Vec<Provenance> = members
                .into_iter()
                .map(|(pattern, count)| Provenance { pattern, count })
                .collect();
            out.push(GeneratedTriple {
                subject,
                relation: rel.clone(),
                object,
                verdict: decision.verdict(),
                matched_iri: decision.matched_iri().map(str::to_string),
                source_count: provenance.iter().map(|p| p.count).sum(),
                provenance,
            });
        }
    }
    out
}

/// `flows through` -> `flowsThrough`.
pub fn relation_slug(text: &str) -> String {
    let mut out = String::new();
    for (i, word) in text.split_whitespace().enumerate() {
        let clean: String = word.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        let mut chars = clean.chars();
        if let Some(first) = chars.next() {
            if i == 0 || out.is_empty() {
                out.push(first);
            } else {
                out.extend(first.to_uppercase());
            }
            out.push_str(chars.as_str());
        }
    }
    out
}

/// Entity names become IRI local names: spaces to underscores, unsafe bytes
/// percent-encoded.
pub fn entity_local_name(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        match c {
            ' ' => out.push('_'),
            c if c.is_ascii_alphanumeric() || "-._~".contains(c) => out.push(c),
            c => {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    out.push_str(&format!("%{b:02X}"));
                }
            }
        }
    }
    out
}

/// N-Triples lines for generated triples under the given namespaces.
pub fn to_ntriples(triples: &[GeneratedTriple], relation_ns: &str, entity_ns: &str) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&format!(
            "<{entity_ns}{}> <{relation_ns}{}> <{entity_ns}{}> .\n",
            entity_local_name(&t.subject),
            relation_slug(&t.relation.text),
            entity_local_name(&t.object)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::FunctionWords;

    #[test]
    fn orient_truth_table() {
        use Direction::*;
        assert_eq!(orient("s", "o", Forward, Forward), ("s", "o"));
        assert_eq!(orient("s", "o", Reverse, Reverse), ("s", "o"));
        assert_eq!(orient("s", "o", Forward, Reverse), ("o", "s"));
        assert_eq!(orient("s", "o", Reverse, Forward), ("o", "s"));
    }

    #[test]
    fn flipping_twice_restores_orientation() {
        use Direction::*;
        for m in [Forward, Reverse] {
            for r in [Forward, Reverse] {
                let (a, b) = orient("s", "o", m, r);
                assert_eq!(orient(a, b, m, r), ("s", "o"));
            }
        }
    }

    #[test]
    fn slugs_and_local_names() {
        assert_eq!(relation_slug("flows through"), "flowsThrough");
        assert_eq!(relation_slug("is the predominant religion in"), "isThePredominantReligionIn");
        assert_eq!(relation_slug("doesn't play at"), "doesntPlayAt");
        assert_eq!(entity_local_name("new york"), "new_york");
        assert_eq!(entity_local_name("são paulo"), "s%C3%A3o_paulo");
    }

    #[test]
    fn discarded_relations_emit_nothing() {
        let fw = FunctionWords::shipped();
        let rep = PatternKey::new("is the father of", Direction::Forward, 1, &fw);
        let cluster = RelationCluster::singleton(0, rep.clone());
        let decision = GroundingDecision {
            cluster_id: 0,
            relation: rep,
            matched: None,
            rep_similarity: 0.0,
            member_support: 0.0,
            verdict: Verdict::Discard,
            relation_domain: "A".into(),
            relation_range: "B".into(),
        };
        let corpus = vec![DirectedTriple {
            subject: "x".into(),
            pattern: "is the father of".into(),
            object: "y".into(),
            direction: Direction::Forward,
            count: 1,
        }];
        assert!(generate_triples(&[decision], &[cluster], &corpus).is_empty());
    }
}
