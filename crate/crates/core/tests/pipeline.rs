mod common;

use std::fs;
use std::path::Path;

use common::*;
use dart_core::artifacts;
use dart_core::pipeline::{run_pipeline, Stage, StageMode};
use dart_core::DartError;

const STAGE_FILES: &[&str] = &[
    artifacts::CLASSES_JSON,
    artifacts::CORPUS_TSV,
    artifacts::PATTERNS_TSV,
    artifacts::FILTERED_TSV,
    artifacts::CLUSTERS_JSON,
    artifacts::TRACE_LOG,
    artifacts::DECISIONS_TSV,
    artifacts::AXIOMS_TSV,
    artifacts::TRIPLES_TSV,
    artifacts::TRIPLES_NT,
];

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    STAGE_FILES
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap_or_default()))
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    for conf in FIXTURE_RUNS {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_pipeline(&fixture_config(conf, a.path())).unwrap();
        run_pipeline(&fixture_config(conf, b.path())).unwrap();
        let (x, y) = (read_all(a.path()), read_all(b.path()));
        for ((name, l), (_, r)) in x.iter().zip(&y) {
            assert!(!l.is_empty(), "{conf}: {name} missing");
            assert_eq!(l, r, "{conf}: {name} differs between runs");
        }
    }
}

#[test]
fn discover_only_stops_after_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fixture_config("religions.conf", dir.path());
    c.set("stages", "discover").unwrap();
    let out = run_pipeline(&c).unwrap();
    assert!(dir.path().join(artifacts::CLUSTERS_JSON).is_file());
    assert!(!dir.path().join(artifacts::DECISIONS_TSV).exists());
    assert!(!dir.path().join(artifacts::TRIPLES_TSV).exists());
    assert!(out.report.counts.decisions.is_none());
    assert_eq!(
        out.report.stages,
        vec![(Stage::Ingest, StageMode::Run), (Stage::Discover, StageMode::Run)]
    );
}

#[test]
fn restart_from_persisted_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let full = run_pipeline(&fixture_config("religions.conf", dir.path())).unwrap();
    let before = read_all(dir.path());

    let mut c = fixture_config("religions.conf", dir.path());
    c.set("stages", "ground,triples").unwrap();
    // upstream inputs are no longer needed once their artifacts exist
    c.corpus = None;
    c.embeddings = None;
    let restarted = run_pipeline(&c).unwrap();
    assert_eq!(
        restarted.report.stages,
        vec![
            (Stage::Ingest, StageMode::Load),
            (Stage::Discover, StageMode::Load),
            (Stage::Ground, StageMode::Run),
            (Stage::Triples, StageMode::Run),
        ]
    );
    assert_eq!(read_all(dir.path()), before);
    let (a, b) = (&full.report.counts, &restarted.report.counts);
    assert_eq!(a.decisions, b.decisions);
    assert_eq!(a.verdicts, b.verdicts);
    assert_eq!(a.generated_triples, b.generated_triples);
    assert!(restarted.report.is_consistent(), "{:?}", restarted.report.consistency_violations());
}

#[test]
fn missing_upstream_artifacts_are_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fixture_config("rivers.conf", dir.path());
    c.set("stages", "triples").unwrap();
    let out = run_pipeline(&c).unwrap();
    assert!(out.report.stages.iter().all(|(_, m)| *m == StageMode::Run));
    assert!(dir.path().join(artifacts::TRIPLES_NT).is_file());
}

#[test]
fn stage_failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    fs::write(&empty, "# nothing here\n").unwrap();
    let mut c = fixture_config("religions.conf", &dir.path().join("run"));
    c.lexdb = Some(empty);
    match run_pipeline(&c) {
        Err(DartError::Stage { stage, source }) => {
            assert_eq!(stage, "discover");
            assert!(matches!(*source, DartError::Data(_)), "{source}");
        }
        other => panic!("{other:?}"),
    }
    // ingest already finished and persisted its artifacts
    assert!(dir.path().join("run").join(artifacts::CORPUS_TSV).is_file());
}

#[test]
fn unknown_dname_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fixture_config("religions.conf", dir.path());
    c.set("dname", "astrophysics").unwrap();
    let err = run_pipeline(&c).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn ingestion_counts_and_malformed_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(&fixture_config("religions.conf", dir.path())).unwrap();
    let c = &out.report.counts;
    assert_eq!(c.malformed_records, Some(3));
    assert_eq!(c.raw_records, Some(199));
    assert!(c.matched_records.unwrap() < c.raw_records.unwrap());
    let corpus: u64 = out.state.corpus.as_ref().unwrap().total_count();
    assert_eq!(corpus, c.matched_records.unwrap() as u64);
}

#[test]
fn baseline_stage_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fixture_config("religions.conf", dir.path());
    c.set("stages", "ingest,baseline").unwrap();
    let out = run_pipeline(&c).unwrap();
    let b = out.report.baseline.expect("baseline summary");
    assert_eq!(b.context_patterns, 11);
    assert!(b.k.is_some());
    assert!(b.relations >= 1 && b.seeds >= 1);
    let report: artifacts::BaselineReport = artifacts::read_json(&dir.path().join(artifacts::BASELINE_REPORT_JSON)).unwrap();
    assert_eq!(report.k, b.k);
    let seeds = fs::read_to_string(dir.path().join(artifacts::BASELINE_SEEDS_TSV)).unwrap();
    assert_eq!(seeds.lines().count() - 1, b.seeds);
    // only the requested stages ran
    assert!(!dir.path().join(artifacts::CLUSTERS_JSON).exists());
}

#[test]
fn similarity_input_setting_changes_clustering_input() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = fixture_config("rivers.conf", dir.path());
    c.set("similarity_input", "raw").unwrap();
    c.set("stages", "discover").unwrap();
    let out = run_pipeline(&c).unwrap();
    let file: artifacts::ClustersFile = artifacts::read_json(&dir.path().join(artifacts::CLUSTERS_JSON)).unwrap();
    assert_eq!(file.similarity_input.to_string(), "raw");
    assert_eq!(out.report.counts.filtered_patterns, Some(4));
}
