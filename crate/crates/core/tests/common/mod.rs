#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use dart_core::corpus::{Corpus, DirectedTriple, Direction};
use dart_core::lexsim::LexicalDatabase;
use dart_core::pipeline::PipelineConfig;
use dart_core::{load_lexical_db, FunctionWords};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fw() -> FunctionWords {
    FunctionWords::shipped()
}

pub fn fixture_db() -> LexicalDatabase {
    load_lexical_db(fixture("glosses.tsv"), &fw()).unwrap()
}

pub fn fixture_config(name: &str, out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::load(fixture(name)).unwrap();
    c.out = out.to_path_buf();
    c
}

pub const FIXTURE_RUNS: [&str; 2] = ["religions.conf", "rivers.conf"];

/// Dice overlap computed by sorting both glosses and merging.
pub fn oracle_overlap(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut x: Vec<&str> = a.iter().map(String::as_str).collect();
    let mut y: Vec<&str> = b.iter().map(String::as_str).collect();
    x.sort_unstable();
    y.sort_unstable();
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(y[j]) {
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    2.0 * shared as f64 / (x.len() + y.len()) as f64
}

pub fn oracle_word_sim(a: &str, b: &str, db: &LexicalDatabase) -> f64 {
    if a == b {
        return 1.0;
    }
    let mut best = 0.0f64;
    for s in db.senses(a) {
        for t in db.senses(b) {
            best = best.max(oracle_overlap(&s.gloss, &t.gloss));
        }
    }
    best
}

/// Best total over every alignment `from -> to`, found by enumerating all
/// |to|^|from| word maps, divided by |from|.
fn best_alignment(from: &[String], to: &[String], sim: &HashMap<(usize, usize), f64>, flip: bool) -> f64 {
    let n = from.len();
    let m = to.len();
    let mut best = 0.0f64;
    let mut choice = vec![0usize; n];
    loop {
        let total: f64 = choice
            .iter()
            .enumerate()
            .map(|(i, &j)| if flip { sim[&(j, i)] } else { sim[&(i, j)] })
            .sum();
        best = best.max(total);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n {
                return best / n as f64;
            }
            choice[pos] += 1;
            if choice[pos] < m {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

pub fn oracle_text_sim(a: &[String], b: &[String], db: &LexicalDatabase) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut sim = HashMap::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            sim.insert((i, j), oracle_word_sim(x, y, db));
        }
    }
    0.5 * (best_alignment(a, b, &sim, false) + best_alignment(b, a, &sim, true))
}

/// Matrix cells by enumerating every (pattern, pattern, pair) combination
/// over the raw corpus triples, in integers.
pub fn oracle_matrix(corpus: &Corpus) -> (Vec<(String, Direction)>, Vec<Vec<u64>>) {
    let mut patterns: Vec<(String, Direction)> =
        corpus.triples.iter().map(|t| (t.pattern.clone(), t.direction)).collect();
    patterns.sort();
    patterns.dedup();
    let pair_of = |t: &DirectedTriple| match t.direction {
        Direction::Forward => (t.subject.clone(), t.object.clone()),
        Direction::Reverse => (t.object.clone(), t.subject.clone()),
    };
    let mut pairs: Vec<(String, String)> = corpus.triples.iter().map(pair_of).collect();
    pairs.sort();
    pairs.dedup();
    let occ = |p: &(String, Direction), pair: &(String, String)| -> u64 {
        corpus
            .triples
            .iter()
            .filter(|t| t.pattern == p.0 && t.direction == p.1 && &pair_of(t) == pair)
            .map(|t| t.count)
            .sum()
    };
    let n = patterns.len();
    let mut cells = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in 0..n {
            for pair in &pairs {
                let (a, b) = (occ(&patterns[i], pair), occ(&patterns[j], pair));
                if a > 0 && b > 0 {
                    cells[i][j] += a + b;
                }
            }
        }
    }
    (patterns, cells)
}
