//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use dart_core::artifacts::{self, ClustersFile};
use dart_core::baseline::{
    build_cooccurrence_matrix, elbow_select_k, kmeans, normalize_matrix, rank_instances, BaselineCluster, Occurrences,
    SEED_LIMIT,
};
use dart_core::corpus::{parse_extraction_file, load_class_instances, CorpusFormat, PatternId};
use dart_core::eval::EvaluationSheet;
use dart_core::ground::GroundingDecision;
use dart_core::pipeline::run_pipeline;
use dart_core::schema::SchemaOverrides;
use dart_core::*;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn eq2_property_suite() -> Check {
    let db = fixture_db();
    let mut vocab: Vec<String> = db.lemmas().map(str::to_string).collect();
    for w in ["flows", "runs", "rises", "banks", "directed", "growing", "fastest", "rules", "zorb", "quux"] {
        vocab.push(w.to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let list = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let n = rng.gen_range(1..=5);
        (0..n).map(|_| vocab.choose(rng).unwrap().clone()).collect()
    };
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let a = list(&mut rng);
        let b = list(&mut rng);
        let ab = text_similarity(&a, &b, &db);
        let ba = text_similarity(&b, &a, &db);
        ensure!(ab == ba, "case {i}: sim(a,b)={ab} but sim(b,a)={ba} for {a:?} / {b:?}");
        ensure!((0.0..=1.0).contains(&ab), "case {i}: {ab} out of range");
        ensure!(text_similarity(&a, &a, &db) == 1.0, "case {i}: self-similarity of {a:?} is not 1");
        let oracle = oracle_text_sim(&a, &b, &db);
        worst = worst.max((oracle - ab).abs());
        ensure!((oracle - ab).abs() <= 1e-9, "case {i}: {ab} vs oracle {oracle} for {a:?} / {b:?}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("1000 cases, max oracle deviation {worst:.1e}, {elapsed:.2?}"))
}

struct TraceLine {
    pattern: PatternId,
    opened: bool,
    cluster: usize,
    similarity: Option<f64>,
    rep_before: Option<PatternId>,
    rep_after: PatternId,
}

fn parse_id(s: &str) -> Option<PatternId> {
    let (text, dir) = s.rsplit_once('|')?;
    Some(PatternId {
        text: text.to_string(),
        direction: dir.parse().ok()?,
    })
}

fn parse_trace(path: &Path) -> std::result::Result<Vec<TraceLine>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.starts_with('#')) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || format!("trace line {}: {line}", i + 1);
        if f.len() != 8 || f[0].parse::<usize>().ok() != Some(out.len()) {
            return Err(bad());
        }
        out.push(TraceLine {
            pattern: PatternId {
                text: f[1].to_string(),
                direction: f[2].parse().map_err(|_| bad())?,
            },
            opened: match f[3] {
                "open" => true,
                "join" => false,
                _ => return Err(bad()),
            },
            cluster: f[4].parse().map_err(|_| bad())?,
            similarity: if f[5] == "-" { None } else { Some(f[5].parse().map_err(|_| bad())?) },
            rep_before: if f[6] == "-" { None } else { Some(parse_id(f[6]).ok_or_else(bad)?) },
            rep_after: parse_id(f[7]).ok_or_else(bad)?,
        });
    }
    Ok(out)
}

fn replay(run_dir: &Path, s_threshold: f64) -> std::result::Result<usize, String> {
    let db = fixture_db();
    let file: ClustersFile =
        artifacts::read_json(&run_dir.join(artifacts::CLUSTERS_JSON)).map_err(|e| e.to_string())?;
    let keys: BTreeMap<PatternId, PatternKey> =
        file.clusters.iter().flat_map(|c| c.members.iter()).map(|m| (m.id(), m.clone())).collect();
    let trace = parse_trace(&run_dir.join(artifacts::TRACE_LOG))?;

    let mut members: Vec<Vec<PatternKey>> = Vec::new();
    let mut reps: Vec<PatternId> = Vec::new();
    for (step, ev) in trace.iter().enumerate() {
        let p = keys.get(&ev.pattern).ok_or(format!("step {step}: unknown pattern {}", ev.pattern))?;
        let sims: Vec<f64> = reps
            .iter()
            .map(|r| oracle_text_sim(&p.content_words, &keys[r].content_words, &db))
            .collect();
        let best = sims.iter().copied().fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));
        if let (Some(b), Some(logged)) = (best, ev.similarity) {
            ensure!((b - logged).abs() <= 1e-12, "step {step}: logged similarity {logged}, recomputed {b}");
        }
        ensure!(best.is_some() == ev.similarity.is_some(), "step {step}: similarity presence mismatch");
        if ev.opened {
            ensure!(best.is_none_or(|b| b < s_threshold), "step {step}: opened a cluster at similarity {best:?}");
            ensure!(ev.cluster == members.len(), "step {step}: new cluster id {}", ev.cluster);
            ensure!(ev.rep_after == ev.pattern, "step {step}: founder is not the representative");
            members.push(vec![p.clone()]);
            reps.push(ev.pattern.clone());
        } else {
            let b = best.ok_or(format!("step {step}: join with no clusters"))?;
            let c = ev.cluster;
            ensure!(c < members.len(), "step {step}: join into unknown cluster {c}");
            ensure!(sims[c] >= s_threshold, "step {step}: joined at {} below the gate", sims[c]);
            ensure!(sims[c] >= b - 1e-12, "step {step}: joined cluster {c} at {} but best was {b}", sims[c]);
            ensure!(ev.rep_before.as_ref() == Some(&reps[c]), "step {step}: representative before join differs");
            members[c].push(p.clone());
            let m = &members[c];
            let avg = |i: usize| -> f64 {
                (0..m.len())
                    .filter(|&j| j != i)
                    .map(|j| oracle_text_sim(&m[i].content_words, &m[j].content_words, &db))
                    .sum::<f64>()
                    / (m.len() - 1) as f64
            };
            let top = (0..m.len()).map(avg).fold(f64::MIN, f64::max);
            let chosen = m.iter().position(|x| x.id() == ev.rep_after).ok_or(format!("step {step}: rep not a member"))?;
            ensure!(avg(chosen) >= top - 1e-12, "step {step}: representative average {} below max {top}", avg(chosen));
            reps[c] = ev.rep_after.clone();
        }
    }

    // partition of the filtered patterns, and agreement with the persisted clusters
    let filtered = fs::read_to_string(run_dir.join(artifacts::FILTERED_TSV)).map_err(|e| e.to_string())?;
    let filtered: BTreeSet<PatternId> = filtered
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            PatternId {
                text: f[0].to_string(),
                direction: f[1].parse().unwrap(),
            }
        })
        .collect();
    let all: Vec<PatternId> = members.iter().flatten().map(PatternKey::id).collect();
    let unique: BTreeSet<PatternId> = all.iter().cloned().collect();
    ensure!(unique.len() == all.len(), "a pattern sits in two clusters");
    ensure!(unique == filtered, "clusters do not cover the filtered patterns");
    ensure!(file.clusters.len() == members.len(), "cluster count differs from clusters.json");
    for (c, rec) in file.clusters.iter().enumerate() {
        let a: BTreeSet<PatternId> = rec.members.iter().map(PatternKey::id).collect();
        let b: BTreeSet<PatternId> = members[c].iter().map(PatternKey::id).collect();
        ensure!(a == b, "cluster {c} members differ from clusters.json");
        ensure!(rec.representative.id() == reps[c], "cluster {c} representative differs from clusters.json");
    }
    Ok(trace.len())
}

fn algorithm_replay() -> Check {
    let mut notes = Vec::new();
    for conf in FIXTURE_RUNS {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = fixture_config(conf, dir.path());
        run_pipeline(&config).map_err(|e| format!("{conf}: {e}"))?;
        let steps = replay(dir.path(), config.s_threshold).map_err(|e| format!("{conf}: {e}"))?;
        notes.push(format!("{conf}: {steps} steps"));
    }
    Ok(notes.join(", "))
}

fn grounding_table() -> Check {
    let fw = fw();
    let db = fixture_db();
    let schema = parse_schema(fixture("schema.nt"), &fw, &SchemaOverrides::default()).map_err(|e| e.to_string())?;
    let onto = |c: &str| format!("http://example.org/onto/{c}");
    let class = |c: &str| ClassSpec::new(onto(c), c, ["x"]).unwrap();
    let params = TextSimilarityParams::default();
    let rows: [(&[&str], Direction, &str, &str, Verdict, Option<&str>); 4] = [
        (&["is the father of"], Direction::Forward, "Religion", "Country", Verdict::Discard, Some("isLeaderOf")),
        (&["was ruler of"], Direction::Forward, "Ruler", "Empire", Verdict::SubProperty, Some("isLeaderOf")),
        (&["directed by"], Direction::Reverse, "Writer", "Novel", Verdict::Discard, Some("directed")),
        (
            &["is a subgenre of", "is the subgenre of"],
            Direction::Forward,
            "MusicGenre",
            "MusicGenre",
            Verdict::Equivalent,
            Some("musicSubgenre"),
        ),
    ];
    let mut out = Vec::new();
    for (texts, dir, d1, d2, verdict, prop) in rows {
        let patterns: Vec<PatternKey> = texts.iter().map(|t| PatternKey::new(t, dir, 3, &fw)).collect();
        let clustering = single_pass_cluster(&patterns, &params, &db, SimilarityInput::Content);
        ensure!(clustering.clusters.len() == 1, "{texts:?} split into {} clusters", clustering.clusters.len());
        let decisions: Vec<GroundingDecision> =
            ground_all(&clustering.clusters, &class(d1), &class(d2), &schema, &params, &db);
        let d = &decisions[0];
        let matched = d.matched.as_ref().map(|m| m.iri.clone());
        ensure!(
            d.verdict == verdict && matched == prop.map(onto),
            "{:?}: got {} via {matched:?}, expected {verdict} via {prop:?}",
            texts[0],
            d.verdict
        );
        out.push(format!("{} -> {}", texts[0], d.verdict));
    }
    Ok(out.join("; "))
}

fn direction_flip() -> Check {
    let fw = fw();
    let mut cases = 0;
    for member_dir in [Direction::Forward, Direction::Reverse] {
        for rep_dir in [Direction::Forward, Direction::Reverse] {
            let rep = PatternKey::new("rep pattern", rep_dir, 5, &fw);
            let member = PatternKey::new("member pattern", member_dir, 1, &fw);
            let cluster = RelationCluster {
                id: 0,
                members: vec![rep.clone(), member.clone()],
                representative: 0,
            };
            let decision = GroundingDecision {
                cluster_id: 0,
                relation: rep.clone(),
                matched: None,
                rep_similarity: 0.0,
                member_support: 0.0,
                verdict: Verdict::New,
                relation_domain: "A".into(),
                relation_range: "B".into(),
            };
            let corpus = vec![DirectedTriple {
                subject: "s".into(),
                pattern: "member pattern".into(),
                object: "o".into(),
                direction: member_dir,
                count: 2,
            }];
            let triples = generate_triples(&[decision], &[cluster], &corpus);
            ensure!(triples.len() == 1, "{member_dir}/{rep_dir}: {} triples", triples.len());
            let t = &triples[0];
            let expected = if member_dir == rep_dir { ("s", "o") } else { ("o", "s") };
            ensure!(
                (t.subject.as_str(), t.object.as_str()) == expected,
                "{member_dir}/{rep_dir}: got ({}, {})",
                t.subject,
                t.object
            );
            ensure!(t.relation.id() == rep.id() && t.source_count == 2, "{member_dir}/{rep_dir}: wrong relation or count");
            cases += 1;
        }
    }

    // conservation on every fixture run
    let mut conserved = Vec::new();
    for conf in FIXTURE_RUNS {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = run_pipeline(&fixture_config(conf, dir.path())).map_err(|e| format!("{conf}: {e}"))?;
        let state = &out.state;
        let corpus = state.corpus.as_ref().unwrap();
        let clusters = state.clusters.as_ref().unwrap();
        let decisions = state.decisions.as_ref().unwrap();
        let triples = generate_triples(decisions, clusters, &corpus.triples);
        let mut expected = 0u64;
        for d in decisions.iter().filter(|d| d.verdict.is_retained()) {
            let c = clusters.iter().find(|c| c.id == d.cluster_id).unwrap();
            for t in &corpus.triples {
                if c.members.iter().any(|m| m.text == t.pattern && m.direction == t.direction) {
                    expected += t.count;
                }
            }
        }
        let produced: u64 = triples.iter().map(|t| t.source_count).sum();
        ensure!(produced == expected, "{conf}: {produced} occurrences emitted, {expected} expected");
        let file_rows = fs::read_to_string(dir.path().join(artifacts::TRIPLES_TSV)).unwrap().lines().count() - 1;
        ensure!(file_rows == triples.len(), "{conf}: triples.tsv has {file_rows} rows for {} triples", triples.len());
        conserved.push(format!("{conf}: {produced}"));
    }
    Ok(format!("{cases} direction cases; occurrences conserved ({})", conserved.join(", ")))
}

fn three_blobs(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    // equilateral triangle of centres, tight spread
    let centres = [(0.0, 0.0), (10.0, 0.0), (5.0, 8.660254037844386)];
    let mut rows = Vec::new();
    for (cx, cy) in centres {
        for _ in 0..10 {
            rows.push(vec![cx + rng.gen_range(-0.5..0.5), cy + rng.gen_range(-0.5..0.5)]);
        }
    }
    rows.shuffle(rng);
    rows
}

fn baseline_oracles() -> Check {
    let corpus = artifacts::read_corpus(&fixture("baseline_corpus.tsv"), &fw()).map_err(|e| e.to_string())?;
    let occ = Occurrences::from_corpus(&corpus);
    ensure!(occ.patterns.len() == 15, "fixture has {} patterns", occ.patterns.len());
    let matrix = build_cooccurrence_matrix(&occ, false);
    let (oracle_patterns, oracle_cells) = oracle_matrix(&corpus);
    let ids: Vec<(String, Direction)> = occ.patterns.iter().map(|p| (p.text.clone(), p.direction)).collect();
    ensure!(ids == oracle_patterns, "pattern order differs from the oracle");
    for i in 0..15 {
        for j in 0..15 {
            let cell = matrix.cells[i][j];
            ensure!(
                cell.fract() == 0.0 && cell as u64 == oracle_cells[i][j],
                "cell ({i},{j}) = {cell}, oracle {}",
                oracle_cells[i][j]
            );
        }
    }

    // seed weights against the formula evaluated directly
    let rows = normalize_matrix(&matrix).cells;
    let mut weights_checked = 0;
    for k in 1..=5 {
        let result = kmeans(&rows, k, 100).map_err(|e| e.to_string())?;
        for cluster in BaselineCluster::from_kmeans(&rows, &result) {
            let seeds = rank_instances(&cluster, &rows, &occ, SEED_LIMIT);
            for s in &seeds {
                let pair = (s.subject.clone(), s.object.clone());
                let direct: f64 = cluster
                    .member_indices
                    .iter()
                    .map(|&c| {
                        let sd = rows[c]
                            .iter()
                            .zip(&cluster.centroid)
                            .map(|(a, b)| (a - b).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        occ.counts[c].get(&pair).copied().unwrap_or(0) as f64 / (1.0 + sd)
                    })
                    .sum();
                ensure!((direct - s.weight).abs() <= 1e-12, "weight {} vs direct {direct}", s.weight);
                weights_checked += 1;
            }
        }
    }

    // elbow on three blobs
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let blobs = three_blobs(&mut rng);
    for (lo, hi) in [(3, 29), (2, 10), (1, 8)] {
        let elbow = elbow_select_k(&blobs, lo, hi, 100).map_err(|e| e.to_string())?;
        ensure!(elbow.k == 3, "elbow over [{lo}, {hi}] chose k={}", elbow.k);
    }

    // SSE never increases within a run
    let mut histories = 0;
    for data in [&rows, &blobs] {
        for k in 1..=10.min(data.len()) {
            let r = kmeans(data, k, 100).map_err(|e| e.to_string())?;
            for w in r.sse_history.windows(2) {
                ensure!(w[1] <= w[0] + 1e-12, "k={k}: SSE rose from {} to {}", w[0], w[1]);
            }
            histories += 1;
        }
    }
    Ok(format!(
        "225 cells exact, {weights_checked} weights within 1e-12, elbow k=3, {histories} SSE histories monotone"
    ))
}

fn accuracy_harness() -> Check {
    let mut text = String::from("relation\tevaluator1\tevaluator2\tevaluator3\n");
    for i in 0..36 {
        let v = match i {
            0..=14 => ["correct", "correct", "correct"],
            15..=24 => ["correct", "incorrect", "correct"],
            _ => ["incorrect", "incorrect", "incorrect"],
        };
        text.push_str(&format!("relation {i}\t{}\t{}\t{}\n", v[0], v[1], v[2]));
    }
    let sheet = EvaluationSheet::parse(&text, Path::new("sheet.tsv")).map_err(|e| e.to_string())?;
    let acc = evaluate_accuracy(&sheet).map_err(|e| e.to_string())?;
    ensure!(acc.num_correct == 15 && acc.total == 36, "counted {}/{}", acc.num_correct, acc.total);
    ensure!(acc.rounded() == 0.42, "accuracy {}", acc.rounded());
    ensure!(acc.to_string() == "15 & 0.42", "rendered `{acc}`");
    Ok(acc.to_string())
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run_pipeline(&fixture_config("religions.conf", dir.path())).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    let report = &out.report;
    let raw = fs::read_to_string(fixture("religions_countries.tsv")).unwrap();
    let raw_lines = raw.lines().filter(|l| !l.trim().is_empty()).count();
    ensure!((150..=250).contains(&raw_lines), "fixture corpus has {raw_lines} records");
    let v = report.counts.verdicts.clone().ok_or("no verdicts")?;
    let axioms = fs::read_to_string(dir.path().join(artifacts::AXIOMS_TSV)).unwrap().lines().count() - 1;
    ensure!(v.new >= 1, "no New relation");
    ensure!(axioms >= 1 && v.axioms() == axioms, "{axioms} axioms listed, tally says {}", v.axioms());
    ensure!(v.discard >= 1, "no Discard");
    let violations = report.consistency_violations();
    ensure!(violations.is_empty(), "inconsistent report: {violations:?}");

    // the same consistencies, recomputed from the files alone
    let patterns = fs::read_to_string(dir.path().join(artifacts::PATTERNS_TSV)).unwrap().lines().count() - 1;
    let filtered = fs::read_to_string(dir.path().join(artifacts::FILTERED_TSV)).unwrap().lines().count() - 1;
    let clusters: ClustersFile = artifacts::read_json(&dir.path().join(artifacts::CLUSTERS_JSON)).unwrap();
    let members: usize = clusters.clusters.iter().map(|c| c.members.len()).sum();
    let decisions = artifacts::read_decisions(&dir.path().join(artifacts::DECISIONS_TSV)).unwrap();
    ensure!(filtered <= patterns, "{filtered} filtered of {patterns}");
    ensure!(members == filtered, "clusters hold {members} of {filtered} filtered patterns");
    ensure!(decisions.len() == clusters.clusters.len(), "{} decisions for {} clusters", decisions.len(), clusters.clusters.len());
    let report_json: RunReport = artifacts::read_json(&dir.path().join(artifacts::REPORT_JSON)).unwrap();
    ensure!(report_json.counts == report.counts, "report.json differs from the returned report");
    Ok(format!(
        "{raw_lines} records, {patterns} patterns, {filtered} filtered, {} clusters: {} new, {axioms} axiom(s), {} discard in {elapsed:.2?}",
        clusters.clusters.len(),
        v.new,
        v.discard
    ))
}

fn threshold_monotonicity() -> Check {
    let fw = fw();
    let d1 = load_class_instances(fixture("religions.txt"), "Religions").unwrap();
    let d2 = load_class_instances(fixture("countries.txt"), "Countries").unwrap();
    let raw = parse_extraction_file(fixture("religions_countries.tsv"), CorpusFormat::SimpleTsv).unwrap();
    let corpus = build_corpus(&raw.triples, &d1, &d2, &fw);
    let store = load_embeddings(fixture("embeddings.txt")).unwrap();
    let mut previous: Option<BTreeSet<PatternId>> = None;
    let mut sizes = Vec::new();
    for c in [0.1, 0.2, 0.3, 0.5, 0.7] {
        let kept: BTreeSet<PatternId> = contextual_filter(&corpus.patterns, "religion", c, &store, &fw)
            .map_err(|e| e.to_string())?
            .iter()
            .map(PatternKey::id)
            .collect();
        if let Some(prev) = &previous {
            ensure!(kept.is_subset(prev), "cThreshold {c} kept a pattern dropped earlier");
        }
        sizes.push(format!("{c}:{}", kept.len()));
        previous = Some(kept);
    }
    ensure!(sizes.first() != sizes.last(), "chain is flat");
    Ok(sizes.join(" ⊇ "))
}

fn main() {
    let checks: [(&str, fn() -> Check); 8] = [
        ("text similarity properties", eq2_property_suite),
        ("single-pass clustering trace replay", algorithm_replay),
        ("grounding table reproduction", grounding_table),
        ("direction flip and triple conservation", direction_flip),
        ("baseline oracle equivalence", baseline_oracles),
        ("accuracy harness", accuracy_harness),
        ("end-to-end fixture pipeline", end_to_end),
        ("context threshold monotonicity", threshold_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
