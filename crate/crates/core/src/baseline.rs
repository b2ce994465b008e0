//! Co-occurrence baseline: context patterns are clustered by the
//! subject-object pairs they share, each cluster's centroid pattern is
//! proposed as a relation and the pairs are ranked as seed instances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DirectedTriple, Direction, PatternId};
use crate::error::{DartError, Result};

/// A subject-object pair oriented as (D1 instance, D2 instance).
pub type EntityPair = (String, String);

fn oriented_pair(t: &DirectedTriple) -> EntityPair {
    match t.direction {
        Direction::Forward => (t.subject.clone(), t.object.clone()),
        Direction::Reverse => (t.object.clone(), t.subject.clone()),
    }
}

/// Occ(c, s): how often context pattern c was seen with pair s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Occurrences {
    pub patterns: Vec<PatternId>,
    /// Indexed like `patterns`.
    pub counts: Vec<BTreeMap<EntityPair, u64>>,
}

impl Occurrences {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut table: BTreeMap<PatternId, BTreeMap<EntityPair, u64>> = BTreeMap::new();
        for t in &corpus.triples {
            let id = PatternId {
                text: t.pattern.clone(),
                direction: t.direction,
            };
            *table.entry(id).or_default().entry(oriented_pair(t)).or_default() += t.count;
        }
        let (patterns, counts) = table.into_iter().unzip();
        Self { patterns, counts }
    }

    pub fn get(&self, pattern: usize, pair: &EntityPair) -> u64 {
        self.counts[pattern].get(pair).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub patterns: Vec<PatternId>,
    pub cells: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl CooccurrenceMatrix {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// cell(c1, c2) = Σ over pairs s seen with both patterns of Occ(c1,s) + Occ(c2,s).
pub fn build_cooccurrence_matrix(occ: &Occurrences, zero_diagonal: bool) -> CooccurrenceMatrix {
    let n = occ.patterns.len();
    let mut cells = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            if i == j && zero_diagonal {
                continue;
            }
            let (a, b) = (&occ.counts[i], &occ.counts[j]);
            let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
            let total: u64 = small
                .iter()
                .filter_map(|(pair, &x)| large.get(pair).map(|&y| x + y))
                .sum();
            cells[i][j] = total as f64;
            cells[j][i] = total as f64;
        }
    }
    CooccurrenceMatrix {
        patterns: occ.patterns.clone(),
        cells,
        normalized: false,
    }
}

/// Row-stochastic normalization; all-zero rows stay zero.
pub fn normalize_matrix(m: &CooccurrenceMatrix) -> CooccurrenceMatrix {
    let cells = m
        .cells
        .iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                row.clone()
            } else {
                row.iter().map(|v| v / sum).collect()
            }
        })
        .collect();
    CooccurrenceMatrix {
        patterns: m.patterns.clone(),
        cells,
        normalized: true,
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub k: usize,
    /// Cluster index per row.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// SSE after every assignment step, in order.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == cluster)
            .collect()
    }
}

/// Farthest-point seeding starting from the row with the largest norm
/// (lowest index on ties).
fn seed_centroids(rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let norm = |r: &Vec<f64>| r.iter().map(|v| v * v).sum::<f64>();
    let mut first = 0;
    for i in 1..rows.len() {
        if norm(&rows[i]) > norm(&rows[first]) {
            first = i;
        }
    }
    let mut seeds = vec![first];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while seeds.len() < k {
        let mut next = None;
        for i in 0..rows.len() {
            if seeds.contains(&i) {
                continue;
            }
            if next.is_none_or(|n: usize| nearest[i] > nearest[n]) {
                next = Some(i);
            }
        }
        let next = next.expect("k <= number of rows");
        seeds.push(next);
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(r, &rows[next]));
        }
    }
    seeds
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let assignments = rows
        .iter()
        .map(|r| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(r, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            sse += best.1;
            best.0
        })
        .collect();
    (assignments, sse)
}

fn sse_of(rows: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(r, &c)| sq_dist(r, &centroids[c]))
        .sum()
}

/// Lloyd's algorithm with deterministic seeding. Iterates until the
/// assignment no longer changes or `max_iters` updates have run.
pub fn kmeans(rows: &[Vec<f64>], k: usize, max_iters: usize) -> Result<KMeansResult> {
    if k == 0 || k > rows.len() {
        return Err(DartError::Data(format!(
            "k-means needs 1 <= k <= {} rows, got k = {k}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(DartError::Data("k-means rows differ in dimension".into()));
    }
    let mut centroids: Vec<Vec<f64>> = seed_centroids(rows, k).into_iter().map(|i| rows[i].clone()).collect();
    let (mut assignments, sse) = assign(rows, &centroids);
    let mut sse_history = vec![sse];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;
        // update step; an emptied cluster keeps its previous centroid
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (r, &c) in rows.iter().zip(&assignments) {
            sizes[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        sse_history.push(sse_of(rows, &assignments, &centroids));

        let (next, sse) = assign(rows, &centroids);
        sse_history.push(sse);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    let sse = sse_of(rows, &assignments, &centroids);
    Ok(KMeansResult {
        k,
        assignments,
        centroids,
        sse,
        sse_history,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub k: usize,
    /// (k, SSE) for every k that was run, ascending.
    pub sse_curve: Vec<(usize, f64)>,
    /// Candidate range after clamping to the number of rows.
    pub k_range: (usize, usize),
}

/// Chooses k in `[k_min, k_max]` at the largest second difference of the
/// SSE curve, `SSE(k-1) - 2 SSE(k) + SSE(k+1)`, smaller k on ties.
///
/// The curve is evaluated one step beyond each end of the range so every
/// candidate has both neighbours. `k_max` is clamped to `rows - 1`.
pub fn elbow_select_k(rows: &[Vec<f64>], k_min: usize, k_max: usize, max_iters: usize) -> Result<ElbowResult> {
    let n = rows.len();
    if n < 3 {
        return Err(DartError::Data(format!(
            "elbow search needs at least 3 rows, got {n}"
        )));
    }
    let hi = k_max.min(n - 1).max(1);
    if hi < k_max {
        log::warn!("k range clamped to [{}, {hi}] for {n} rows", k_min.min(hi));
    }
    let lo = k_min.max(1).min(hi);
    let first = lo.saturating_sub(1).max(1);
    let mut sse_curve = Vec::new();
    for k in first..=hi + 1 {
        sse_curve.push((k, kmeans(rows, k, max_iters)?.sse));
    }
    Ok(ElbowResult {
        k: select_elbow(&sse_curve, lo, hi),
        sse_curve,
        k_range: (lo, hi),
    })
}

/// The elbow rule on a precomputed `(k, SSE)` curve: the k in `[lo, hi]`
/// with the largest second difference, smaller k on ties. Candidates
/// without both neighbours on the curve are skipped; `lo` if none remain.
pub fn select_elbow(curve: &[(usize, f64)], lo: usize, hi: usize) -> usize {
    let sse = |k: usize| curve.iter().find(|(kk, _)| *kk == k).map(|(_, s)| *s);
    let mut best: Option<(usize, f64)> = None;
    for k in lo.max(1)..=hi {
        let (Some(prev), Some(cur), Some(next)) = (sse(k - 1), sse(k), sse(k + 1)) else {
            continue;
        };
        let d2 = prev - 2.0 * cur + next;
        if best.is_none_or(|(_, b)| d2 > b) {
            best = Some((k, d2));
        }
    }
    best.map_or(lo, |(k, _)| k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCluster {
    pub member_indices: Vec<usize>,
    pub centroid: Vec<f64>,
    /// Index of the member row nearest the centroid.
    pub centroid_pattern: usize,
}

impl BaselineCluster {
    pub fn from_kmeans(rows: &[Vec<f64>], result: &KMeansResult) -> Vec<Self> {
        (0..result.k)
            .filter_map(|c| {
                let members = result.members(c);
                let centroid = result.centroids[c].clone();
                let nearest = *members.iter().min_by(|&&a, &&b| {
                    sq_dist(&rows[a], &centroid)
                        .total_cmp(&sq_dist(&rows[b], &centroid))
                        .then(a.cmp(&b))
                })?;
                Some(BaselineCluster {
                    member_indices: members,
                    centroid,
                    centroid_pattern: nearest,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInstance {
    pub subject: String,
    pub object: String,
    pub weight: f64,
}

pub const SEED_LIMIT: usize = 50;

/// weight(s) = Σ_c Occ(c, s) / (1 + sd(c)), with sd(c) the Euclidean distance
/// of c's row from the cluster centroid. Top `limit` by weight.
pub fn rank_instances(
    cluster: &BaselineCluster,
    rows: &[Vec<f64>],
    occ: &Occurrences,
    limit: usize,
) -> Vec<SeedInstance> {
    let mut weights: BTreeMap<&EntityPair, f64> = BTreeMap::new();
    for &c in &cluster.member_indices {
        let sd = euclidean(&rows[c], &cluster.centroid);
        for (pair, &count) in &occ.counts[c] {
            *weights.entry(pair).or_default() += count as f64 / (1.0 + sd);
        }
    }
    let mut ranked: Vec<SeedInstance> = weights
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(pair, weight)| SeedInstance {
            subject: pair.0.clone(),
            object: pair.1.clone(),
            weight,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| (&a.subject, &a.object).cmp(&(&b.subject, &b.object)))
    });
    ranked.truncate(limit);
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iters: usize,
    pub zero_diagonal: bool,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 29,
            max_iters: 100,
            zero_diagonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRelation {
    pub pattern: PatternId,
    pub members: Vec<PatternId>,
    pub seeds: Vec<SeedInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub elbow: ElbowResult,
    pub relations: Vec<BaselineRelation>,
}

/// Full baseline over a corpus. Returns `None` (with a warning) when there
/// are fewer than three context patterns.
pub fn run_baseline(corpus: &Corpus, settings: &BaselineSettings) -> Result<Option<BaselineRun>> {
    let occ = Occurrences::from_corpus(corpus);
    if occ.patterns.len() < 3 {
        log::warn!(
            "baseline skipped: {} context patterns, need at least 3",
            occ.patterns.len()
        );
        return Ok(None);
    }
    let matrix = normalize_matrix(&build_cooccurrence_matrix(&occ, settings.zero_diagonal));
    let rows = &matrix.cells;
    let elbow = elbow_select_k(rows, settings.k_min, settings.k_max, settings.max_iters)?;
    let result = kmeans(rows, elbow.k, settings.max_iters)?;
    let relations = BaselineCluster::from_kmeans(rows, &result)
        .into_iter()
        .map(|c| BaselineRelation {
            pattern: occ.patterns[c.centroid_pattern].clone(),
            members: c.member_indices.iter().map(|&i| occ.patterns[i].clone()).collect(),
            seeds: rank_instances(&c, rows, &occ, SEED_LIMIT),
        })
        .collect();
    Ok(Some(BaselineRun { elbow, relations }))
}

/// Distinct pairs, for reporting.
pub fn pair_count(occ: &Occurrences) -> usize {
    occ.counts
        .iter()
        .flat_map(|m| m.keys())
        .collect::<BTreeSet<_>>()
        .len()
}
