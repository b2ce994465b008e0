//! Configuration and orchestration of the staged pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifacts::{self as art, ClassesFile, ClustersFile, DecisionRecord};
use crate::baseline::{run_baseline, BaselineSettings};
use crate::corpus::{load_class_instances, open_extraction_file, ClassSpec, ColumnMap, Corpus, CorpusBuilder, CorpusFormat, PatternKey};
use crate::discover::{processing_order, single_pass_cluster, RelationCluster, SimilarityInput, TraceEvent};
use crate::embed::{load_embeddings, ContextFilter};
use crate::error::{DartError, Result};
use crate::eval::ClassPair;
use crate::ground::{ground_all, Verdict};
use crate::lexsim::{load_lexical_db, LexicalDatabase, TextSimilarityParams};
use crate::schema::{parse_schema, SchemaOverrides};
use crate::text::FunctionWords;
use crate::triples::generate_triples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Discover,
    Ground,
    Triples,
    Baseline,
}

impl Stage {
    pub const MAIN: [Stage; 4] = [Stage::Ingest, Stage::Discover, Stage::Ground, Stage::Triples];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Discover => "discover",
            Stage::Ground => "ground",
            Stage::Triples => "triples",
            Stage::Baseline => "baseline",
        }
    }

    /// Stages whose output this one consumes.
    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Discover => &[Stage::Ingest],
            Stage::Ground => &[Stage::Ingest, Stage::Discover],
            Stage::Triples => &[Stage::Ingest, Stage::Discover, Stage::Ground],
            Stage::Baseline => &[Stage::Ingest],
        }
    }

    /// Files that let a later run skip this stage.
    fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[art::CLASSES_JSON, art::CORPUS_TSV, art::PATTERNS_TSV],
            Stage::Discover => &[art::CLUSTERS_JSON],
            Stage::Ground => &[art::DECISIONS_TSV],
            Stage::Triples => &[art::TRIPLES_TSV],
            Stage::Baseline => &[art::BASELINE_REPORT_JSON],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = DartError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ingest" => Ok(Stage::Ingest),
            // filtering happens inside discovery
            "filter" | "discover" => Ok(Stage::Discover),
            "ground" => Ok(Stage::Ground),
            "triples" => Ok(Stage::Triples),
            "baseline" => Ok(Stage::Baseline),
            other => Err(DartError::Config(format!("unknown stage `{other}`"))),
        }
    }
}

pub fn parse_stages(list: &str) -> Result<Vec<Stage>> {
    let mut stages: Vec<Stage> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if stages.is_empty() {
        return Err(DartError::Config("empty stage list".into()));
    }
    stages.sort();
    stages.dedup();
    Ok(stages)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub corpus_format: CorpusFormat,
    pub d1_instances: Option<PathBuf>,
    pub d2_instances: Option<PathBuf>,
    pub d1_label: Option<String>,
    pub d2_label: Option<String>,
    pub d1_id: Option<String>,
    pub d2_id: Option<String>,
    pub dname: Option<String>,
    pub embeddings: Option<PathBuf>,
    pub lexdb: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub function_words: Option<PathBuf>,
    pub c_threshold: f64,
    pub s_threshold: f64,
    pub g_threshold: f64,
    pub similarity_input: SimilarityInput,
    pub out: PathBuf,
    /// Where persisted upstream artifacts are read from; `out` when unset.
    pub input: Option<PathBuf>,
    pub namespace: String,
    pub entity_namespace: String,
    pub stages: Vec<Stage>,
    pub overrides: SchemaOverrides,
    pub baseline: BaselineSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            corpus_format: CorpusFormat::SimpleTsv,
            d1_instances: None,
            d2_instances: None,
            d1_label: None,
            d2_label: None,
            d1_id: None,
            d2_id: None,
            dname: None,
            embeddings: None,
            lexdb: None,
            schema: None,
            function_words: None,
            c_threshold: 0.2,
            s_threshold: 0.5,
            g_threshold: 0.75,
            similarity_input: SimilarityInput::Content,
            out: PathBuf::from("out"),
            input: None,
            namespace: "http://example.org/dart/relation/".into(),
            entity_namespace: "http://example.org/dart/entity/".into(),
            stages: Stage::MAIN.to_vec(),
            overrides: SchemaOverrides::default(),
            baseline: BaselineSettings::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| DartError::Config(format!("{key}: `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(DartError::Config(format!("{key}: `{value}` is not a boolean"))),
    }
}

impl PipelineConfig {
    /// Applies one `key=value` setting. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let path = || Some(PathBuf::from(v));
        match key.as_str() {
            "corpus" => self.corpus = path(),
            "format" | "corpus_format" => {
                self.corpus_format = match v {
                    "tsv" => CorpusFormat::SimpleTsv,
                    "rce" => match self.corpus_format {
                        CorpusFormat::Rce(map) => CorpusFormat::Rce(map),
                        CorpusFormat::SimpleTsv => CorpusFormat::Rce(ColumnMap::RCE),
                    },
                    other => return Err(DartError::Config(format!("unknown corpus format `{other}`"))),
                }
            }
            "rce_columns" => self.corpus_format = CorpusFormat::Rce(ColumnMap::parse_spec(v)?),
            "d1" | "d1_instances" => self.d1_instances = path(),
            "d2" | "d2_instances" => self.d2_instances = path(),
            "d1_label" => self.d1_label = Some(v.to_string()),
            "d2_label" => self.d2_label = Some(v.to_string()),
            "d1_id" => self.d1_id = Some(v.to_string()),
            "d2_id" => self.d2_id = Some(v.to_string()),
            "dname" => self.dname = Some(v.to_string()),
            "embeddings" => self.embeddings = path(),
            "lexdb" | "lexical_db" => self.lexdb = path(),
            "schema" => self.schema = path(),
            "function_words" => self.function_words = path(),
            "c_threshold" | "cthreshold" => self.c_threshold = parse_num(&key, v)?,
            "s_threshold" | "sthreshold" => self.s_threshold = parse_num(&key, v)?,
            "g_threshold" | "gthreshold" => self.g_threshold = parse_num(&key, v)?,
            "similarity_input" => self.similarity_input = v.parse().map_err(DartError::Config)?,
            "out" => self.out = PathBuf::from(v),
            "input" => self.input = path(),
            "namespace" => self.namespace = v.to_string(),
            "entity_namespace" => self.entity_namespace = v.to_string(),
            "stages" => self.stages = parse_stages(v)?,
            "domain_override" => {
                for entry in v.split(',').filter(|e| !e.trim().is_empty()) {
                    self.overrides.domains.push(SchemaOverrides::parse_entry(entry)?);
                }
            }
            "range_override" => {
                for entry in v.split(',').filter(|e| !e.trim().is_empty()) {
                    self.overrides.ranges.push(SchemaOverrides::parse_entry(entry)?);
                }
            }
            "k_min" => self.baseline.k_min = parse_num(&key, v)?,
            "k_max" => self.baseline.k_max = parse_num(&key, v)?,
            "max_iters" => self.baseline.max_iters = parse_num(&key, v)?,
            "zero_diagonal" => self.baseline.zero_diagonal = parse_bool(&key, v)?,
            _ => return Err(DartError::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Parses flat `key=value` text; `#` starts a comment line.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_kv(text)?;
        Ok(config)
    }

    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DartError::Config(format!("config line {}: expected key=value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| DartError::Config(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DartError::io(path, e))?;
        let mut config = Self::parse_kv(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_relative(base);
        }
        Ok(config)
    }

    fn resolve_relative(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.d1_instances,
            &mut self.d2_instances,
            &mut self.embeddings,
            &mut self.lexdb,
            &mut self.schema,
            &mut self.function_words,
            &mut self.input,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.out.is_relative() {
            self.out = base.join(&self.out);
        }
    }

    pub fn source_dir(&self) -> &Path {
        self.input.as_deref().unwrap_or(&self.out)
    }

    pub fn similarity_params(&self) -> TextSimilarityParams {
        TextSimilarityParams {
            s_threshold: self.s_threshold,
            g_threshold: self.g_threshold,
        }
    }

    pub fn function_word_list(&self) -> Result<FunctionWords> {
        match &self.function_words {
            Some(p) => FunctionWords::load(p),
            None => Ok(FunctionWords::shipped()),
        }
    }

    fn validate_thresholds(&self) -> Result<()> {
        for (name, v) in [
            ("c_threshold", self.c_threshold),
            ("s_threshold", self.s_threshold),
            ("g_threshold", self.g_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DartError::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        self.similarity_params().validate()
    }

    /// Checks that everything a stage needs to actually run is configured.
    pub fn validate_stage(&self, stage: Stage) -> Result<()> {
        fn need<T>(v: &Option<T>, key: &str, stage: Stage) -> Result<()> {
            if v.is_none() {
                return Err(DartError::Config(format!("stage `{stage}` requires `{key}`")));
            }
            Ok(())
        }
        fn need_file(v: &Option<PathBuf>, key: &str, stage: Stage) -> Result<()> {
            need(v, key, stage)?;
            exists(v, key)
        }
        fn exists(v: &Option<PathBuf>, key: &str) -> Result<()> {
            match v {
                Some(p) if !p.is_file() => Err(DartError::Config(format!("`{key}` file {} does not exist", p.display()))),
                _ => Ok(()),
            }
        }
        match stage {
            Stage::Ingest => {
                need_file(&self.corpus, "corpus", stage)?;
                need_file(&self.d1_instances, "d1", stage)?;
                need_file(&self.d2_instances, "d2", stage)?;
                exists(&self.function_words, "function_words")?;
                need(&self.d1_label, "d1_label", stage)?;
                need(&self.d2_label, "d2_label", stage)?;
            }
            Stage::Discover => {
                need_file(&self.embeddings, "embeddings", stage)?;
                need_file(&self.lexdb, "lexdb", stage)?;
                need(&self.dname, "dname", stage)?;
            }
            Stage::Ground => {
                need_file(&self.schema, "schema", stage)?;
                need_file(&self.lexdb, "lexdb", stage)?;
            }
            Stage::Baseline => {
                if self.baseline.k_min == 0 || self.baseline.k_min > self.baseline.k_max {
                    return Err(DartError::Config(format!(
                        "baseline k range [{}, {}] is empty",
                        self.baseline.k_min, self.baseline.k_max
                    )));
                }
            }
            Stage::Triples => {}
        }
        Ok(())
    }

    /// Decides which stages run and which load their persisted artifacts.
    /// Requested stages always run; an unrequested upstream stage is loaded
    /// when its artifacts exist and run otherwise.
    pub fn plan(&self) -> Result<Vec<(Stage, StageMode)>> {
        self.validate_thresholds()?;
        let mut needed: Vec<Stage> = self
            .stages
            .iter()
            .flat_map(|s| s.upstream().iter().copied().chain([*s]))
            .collect();
        needed.sort();
        needed.dedup();
        let mut plan = Vec::new();
        let mut ran_upstream = false;
        for stage in needed {
            let requested = self.stages.contains(&stage);
            let persisted = stage.artifacts().iter().all(|f| self.source_dir().join(f).is_file());
            // anything downstream of a stage that reran must be rebuilt too
            let mode = if requested || !persisted || (ran_upstream && stage != Stage::Baseline) {
                self.validate_stage(stage)?;
                StageMode::Run
            } else {
                StageMode::Load
            };
            if mode == StageMode::Run && stage != Stage::Baseline {
                ran_upstream = true;
            }
            plan.push((stage, mode));
        }
        Ok(plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageMode {
    Run,
    Load,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictTally {
    pub new: usize,
    pub equivalent: usize,
    pub subproperty: usize,
    pub inverse: usize,
    pub discard: usize,
}

impl VerdictTally {
    pub fn from_decisions(decisions: &[DecisionRecord]) -> Self {
        let mut t = Self::default();
        for d in decisions {
            match d.verdict {
                Verdict::New => t.new += 1,
                Verdict::Equivalent => t.equivalent += 1,
                Verdict::SubProperty => t.subproperty += 1,
                Verdict::Inverse { .. } => t.inverse += 1,
                Verdict::Discard => t.discard += 1,
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.new + self.equivalent + self.subproperty + self.inverse + self.discard
    }

    pub fn axioms(&self) -> usize {
        self.equivalent + self.subproperty + self.inverse
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    /// Raw extraction records read; unknown when ingestion was loaded.
    pub raw_records: Option<usize>,
    pub malformed_records: Option<usize>,
    pub matched_records: Option<usize>,
    pub corpus_triples: usize,
    pub patterns: usize,
    pub filtered_patterns: Option<usize>,
    pub clusters: Option<usize>,
    pub clustered_members: Option<usize>,
    pub representatives: Option<usize>,
    pub decisions: Option<usize>,
    pub verdicts: Option<VerdictTally>,
    pub axioms: Option<usize>,
    pub generated_triples: Option<usize>,
    /// Corpus occurrences behind retained relations, before merging.
    pub retained_occurrences: Option<u64>,
    /// Sum of `source_count` over generated triples.
    pub generated_occurrences: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub context_patterns: usize,
    pub k: Option<usize>,
    pub relations: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub classes: ClassPair,
    pub stages: Vec<(Stage, StageMode)>,
    pub counts: StageCounts,
    pub timings_ms: BTreeMap<String, f64>,
    pub baseline: Option<BaselineSummary>,
}

impl RunReport {
    /// Cross-stage consistency checks; returns every violation found.
    pub fn consistency_violations(&self) -> Vec<String> {
        let c = &self.counts;
        let mut bad = Vec::new();
        if let Some(f) = c.filtered_patterns {
            if f > c.patterns {
                bad.push(format!("filtered patterns {f} exceed total patterns {}", c.patterns));
            }
            if let Some(m) = c.clustered_members {
                if m != f {
                    bad.push(format!("clusters hold {m} members but {f} patterns were filtered"));
                }
            }
        }
        if let (Some(cl), Some(r)) = (c.clusters, c.representatives) {
            if cl != r {
                bad.push(format!("{cl} clusters but {r} representatives"));
            }
        }
        if let (Some(d), Some(r)) = (c.decisions, c.representatives) {
            if d != r {
                bad.push(format!("{d} decisions for {r} representatives"));
            }
        }
        if let (Some(d), Some(v)) = (c.decisions, &c.verdicts) {
            if v.total() != d {
                bad.push(format!("verdict tally {} differs from {d} decisions", v.total()));
            }
            if c.axioms.is_some_and(|a| a != v.axioms()) {
                bad.push("axiom count differs from verdict tally".into());
            }
        }
        if let (Some(a), Some(b)) = (c.retained_occurrences, c.generated_occurrences) {
            if a != b {
                bad.push(format!("{a} retained occurrences but {b} in generated triples"));
            }
        }
        bad
    }

    pub fn is_consistent(&self) -> bool {
        self.consistency_violations().is_empty()
    }
}

/// Everything the stages produce, in memory.
#[derive(Debug, Clone, Default)]
pub struct RunState {
    pub classes: Option<ClassesFile>,
    pub corpus: Option<Corpus>,
    pub filtered: Option<Vec<PatternKey>>,
    pub clusters: Option<Vec<RelationCluster>>,
    pub trace: Vec<TraceEvent>,
    pub decisions: Option<Vec<DecisionRecord>>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: RunReport,
    pub state: RunState,
}

fn missing(stage: Stage, what: &str) -> DartError {
    DartError::Data(format!("stage `{stage}` has no {what} to work on"))
}

struct Runner<'c> {
    config: &'c PipelineConfig,
    fw: FunctionWords,
    lexdb: Option<LexicalDatabase>,
    state: RunState,
    counts: StageCounts,
    baseline: Option<BaselineSummary>,
}

impl Runner<'_> {
    fn lexdb(&mut self) -> Result<&LexicalDatabase> {
        if self.lexdb.is_none() {
            let path = self.config.lexdb.as_ref().ok_or_else(|| DartError::Config("`lexdb` is not set".into()))?;
            self.lexdb = Some(load_lexical_db(path, &self.fw)?);
        }
        Ok(self.lexdb.as_ref().unwrap())
    }

    fn out(&self) -> &Path {
        &self.config.out
    }

    fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Discover => self.discover(),
            Stage::Ground => self.ground(),
            Stage::Triples => self.triples(),
            Stage::Baseline => self.baseline(),
        }
    }

    fn load(&mut self, stage: Stage) -> Result<()> {
        let out = self.config.source_dir().to_path_buf();
        if out != self.config.out {
            copy_artifacts(stage, &out, &self.config.out)?;
        }
        match stage {
            Stage::Ingest => {
                self.state.classes = Some(art::read_json(&out.join(art::CLASSES_JSON))?);
                let corpus = art::read_corpus(&out.join(art::CORPUS_TSV), &self.fw)?;
                self.set_corpus_counts(&corpus);
                self.state.corpus = Some(corpus);
            }
            Stage::Discover => {
                let file: ClustersFile = art::read_json(&out.join(art::CLUSTERS_JSON))?;
                let clusters = file.relation_clusters()?;
                let filtered: Vec<PatternKey> = clusters.iter().flat_map(|c| c.members.clone()).collect();
                self.counts.filtered_patterns = Some(file.filtered_patterns);
                self.set_cluster_counts(&clusters);
                self.state.filtered = Some(filtered);
                self.state.clusters = Some(clusters);
            }
            Stage::Ground => {
                let decisions = art::read_decisions(&out.join(art::DECISIONS_TSV))?;
                self.set_decision_counts(&decisions);
                self.state.decisions = Some(decisions);
            }
            Stage::Triples | Stage::Baseline => {}
        }
        Ok(())
    }

    fn set_corpus_counts(&mut self, corpus: &Corpus) {
        self.counts.corpus_triples = corpus.triples.len();
        self.counts.patterns = corpus.patterns.len();
    }

    fn set_cluster_counts(&mut self, clusters: &[RelationCluster]) {
        self.counts.clusters = Some(clusters.len());
        self.counts.representatives = Some(clusters.len());
        self.counts.clustered_members = Some(clusters.iter().map(|c| c.members.len()).sum());
    }

    fn set_decision_counts(&mut self, decisions: &[DecisionRecord]) {
        let tally = VerdictTally::from_decisions(decisions);
        self.counts.decisions = Some(decisions.len());
        self.counts.axioms = Some(decisions.iter().filter_map(DecisionRecord::axiom).count());
        self.counts.verdicts = Some(tally);
    }

    fn ingest(&mut self) -> Result<()> {
        let c = self.config;
        let (Some(corpus_path), Some(p1), Some(p2), Some(l1), Some(l2)) =
            (&c.corpus, &c.d1_instances, &c.d2_instances, &c.d1_label, &c.d2_label)
        else {
            return Err(DartError::Config("ingest requires corpus, d1, d2, d1_label and d2_label".into()));
        };
        let mut d1 = load_class_instances(p1, l1)?;
        let mut d2 = load_class_instances(p2, l2)?;
        d1.id = c.d1_id.clone().unwrap_or_else(|| l1.clone());
        d2.id = c.d2_id.clone().unwrap_or_else(|| l2.clone());

        let mut reader = open_extraction_file(corpus_path, c.corpus_format)?;
        let mut builder = CorpusBuilder::new(&d1, &d2, &self.fw);
        for raw in reader.by_ref() {
            builder.push(&raw?);
        }
        let (seen, matched) = builder.stats();
        let corpus = builder.finish();
        let malformed = reader.malformed();
        if malformed > 0 {
            log::warn!("{malformed} malformed extraction records skipped");
        }
        if corpus.triples.is_empty() {
            log::warn!("no extraction record links `{}` and `{}`", d1.label, d2.label);
        }
        self.counts.raw_records = Some(seen + malformed);
        self.counts.malformed_records = Some(malformed);
        self.counts.matched_records = Some(matched);
        self.set_corpus_counts(&corpus);

        let classes = ClassesFile { d1, d2 };
        art::write_json(&self.out().join(art::CLASSES_JSON), &classes)?;
        art::write_corpus(self.out(), &corpus)?;
        self.state.classes = Some(classes);
        self.state.corpus = Some(corpus);
        Ok(())
    }

    fn discover(&mut self) -> Result<()> {
        let c = self.config;
        let patterns = self.state.corpus.as_ref().ok_or_else(|| missing(Stage::Discover, "corpus"))?.patterns.clone();
        let dname = c.dname.as_deref().ok_or_else(|| DartError::Config("`dname` is not set".into()))?;
        let store = load_embeddings(c.embeddings.as_ref().ok_or_else(|| DartError::Config("`embeddings` is not set".into()))?)?;
        let filter = ContextFilter::new(&store, dname, &self.fw)?;
        let mut scored: Vec<(PatternKey, Option<f64>)> = patterns
            .iter()
            .map(|p| (p.clone(), filter.score(p)))
            .filter(|(_, s)| s.is_some_and(|s| s >= c.c_threshold))
            .collect();
        let mut filtered: Vec<PatternKey> = scored.iter().map(|(p, _)| p.clone()).collect();
        processing_order(&mut filtered);
        scored.sort_by(|a, b| a.0.text.cmp(&b.0.text).then(a.0.direction.cmp(&b.0.direction)));
        art::write_filtered(self.out(), &scored)?;

        let params = c.similarity_params();
        let input = c.similarity_input;
        let clustering = single_pass_cluster(&filtered, &params, self.lexdb()?, input);
        self.counts.filtered_patterns = Some(filtered.len());
        self.set_cluster_counts(&clustering.clusters);

        let file = ClustersFile {
            classes: self.state.classes.clone(),
            dname: dname.to_string(),
            c_threshold: c.c_threshold,
            s_threshold: c.s_threshold,
            similarity_input: input,
            filtered_patterns: filtered.len(),
            clusters: ClustersFile::records(&clustering.clusters),
        };
        art::write_json(&self.out().join(art::CLUSTERS_JSON), &file)?;
        art::write_trace(self.out(), &clustering.trace)?;
        self.state.filtered = Some(filtered);
        self.state.clusters = Some(clustering.clusters);
        self.state.trace = clustering.trace;
        Ok(())
    }

    fn ground(&mut self) -> Result<()> {
        let c = self.config;
        let schema_path = c.schema.as_ref().ok_or_else(|| DartError::Config("`schema` is not set".into()))?;
        let schema = parse_schema(schema_path, &self.fw, &c.overrides)?;
        if schema.malformed > 0 {
            log::warn!("{} malformed schema lines skipped", schema.malformed);
        }
        for (iri, reason) in &schema.excluded {
            log::info!("property {iri} excluded from grounding: {reason}");
        }
        let params = c.similarity_params();
        self.lexdb()?;
        let classes = self.state.classes.as_ref().ok_or_else(|| missing(Stage::Ground, "class pair"))?;
        let clusters = self.state.clusters.as_ref().ok_or_else(|| missing(Stage::Ground, "clusters"))?;
        let decisions = ground_all(clusters, &classes.d1, &classes.d2, &schema, &params, self.lexdb.as_ref().unwrap());
        let records: Vec<DecisionRecord> = decisions.iter().map(DecisionRecord::from).collect();
        art::write_decisions(self.out(), &records, &c.namespace)?;
        self.set_decision_counts(&records);
        self.state.decisions = Some(records);
        Ok(())
    }

    fn triples(&mut self) -> Result<()> {
        let corpus = self.state.corpus.as_ref().ok_or_else(|| missing(Stage::Triples, "corpus"))?;
        let clusters = self.state.clusters.as_ref().ok_or_else(|| missing(Stage::Triples, "clusters"))?;
        let decisions = self.state.decisions.as_ref().ok_or_else(|| missing(Stage::Triples, "decisions"))?;
        let triples = generate_triples(decisions, clusters, &corpus.triples);
        art::write_triples(self.out(), &triples, &self.config.namespace, &self.config.entity_namespace)?;
        self.counts.generated_triples = Some(triples.len());
        self.counts.generated_occurrences = Some(triples.iter().map(|t| t.source_count).sum());
        self.counts.retained_occurrences = Some(retained_occurrences(decisions, clusters, corpus));
        Ok(())
    }

    fn baseline(&mut self) -> Result<()> {
        let corpus = self.state.corpus.as_ref().ok_or_else(|| missing(Stage::Baseline, "corpus"))?;
        let run = run_baseline(corpus, &self.config.baseline)?;
        let context_patterns = crate::baseline::Occurrences::from_corpus(corpus).patterns.len();
        let report = art::BaselineReport {
            classes: self.state.classes.as_ref().map(ClassesFile::pair),
            context_patterns,
            k: run.as_ref().map(|r| r.elbow.k),
            k_range: run.as_ref().map(|r| r.elbow.k_range),
            sse_curve: run.as_ref().map_or_else(Vec::new, |r| r.elbow.sse_curve.clone()),
            relations: run.as_ref().map_or(0, |r| r.relations.len()),
            seeds: run.as_ref().map_or(0, |r| r.relations.iter().map(|x| x.seeds.len()).sum()),
        };
        art::write_baseline(self.out(), run.as_ref(), &report)?;
        self.baseline = Some(BaselineSummary {
            context_patterns,
            k: report.k,
            relations: report.relations,
            seeds: report.seeds,
        });
        Ok(())
    }
}

/// Copies a loaded stage's files so the output directory is self-contained.
fn copy_artifacts(stage: Stage, from: &Path, to: &Path) -> Result<()> {
    let extra: &[&str] = match stage {
        Stage::Discover => &[art::FILTERED_TSV, art::TRACE_LOG],
        Stage::Ground => &[art::AXIOMS_TSV],
        _ => &[],
    };
    for name in stage.artifacts().iter().chain(extra) {
        let src = from.join(name);
        if src.is_file() {
            let dst = to.join(name);
            fs::copy(&src, &dst).map_err(|e| DartError::io(&dst, e))?;
        }
    }
    Ok(())
}

/// Corpus occurrences of every member pattern of a retained relation.
pub fn retained_occurrences(decisions: &[DecisionRecord], clusters: &[RelationCluster], corpus: &Corpus) -> u64 {
    let retained: Vec<&RelationCluster> = decisions
        .iter()
        .filter(|d| d.verdict.is_retained())
        .filter_map(|d| clusters.iter().find(|c| c.id == d.cluster_id))
        .collect();
    corpus
        .triples
        .iter()
        .map(|t| {
            let hits = retained
                .iter()
                .filter(|c| c.members.iter().any(|m| m.text == t.pattern && m.direction == t.direction))
                .count() as u64;
            hits * t.count
        })
        .sum()
}

/// Runs the configured stages. Configuration problems surface before any
/// stage starts; stage failures carry the stage name.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    let plan = config.plan()?;
    let fw = config.function_word_list()?;
    fs::create_dir_all(&config.out).map_err(|e| DartError::io(&config.out, e))?;
    let mut runner = Runner {
        config,
        fw,
        lexdb: None,
        state: RunState::default(),
        counts: StageCounts::default(),
        baseline: None,
    };
    let mut timings_ms = BTreeMap::new();
    for &(stage, mode) in &plan {
        let start = Instant::now();
        let result = match mode {
            StageMode::Run => {
                log::info!("running stage {stage}");
                runner.run(stage)
            }
            StageMode::Load => {
                log::info!("loading stage {stage} from {}", config.source_dir().display());
                runner.load(stage)
            }
        };
        result.map_err(|e| e.in_stage(stage.as_str()))?;
        timings_ms.insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
    }

    let classes = runner
        .state
        .classes
        .as_ref()
        .map(ClassesFile::pair)
        .ok_or_else(|| DartError::Data("no class pair after ingestion".into()))?;
    let report = RunReport {
        classes,
        stages: plan,
        counts: runner.counts,
        timings_ms,
        baseline: runner.baseline,
    };
    art::write_json(&config.out.join(art::REPORT_JSON), &report)?;
    Ok(PipelineOutput {
        report,
        state: runner.state,
    })
}

/// A class spec from an already-ingested run directory.
pub fn load_classes(dir: &Path) -> Result<(ClassSpec, ClassSpec)> {
    let file: ClassesFile = art::read_json(&dir.join(art::CLASSES_JSON))?;
    Ok((file.d1, file.d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing_and_overrides() {
        let c = PipelineConfig::parse_kv(
            "# comment\ncorpus = a.tsv\nc-threshold=0.3\nstages=discover,ingest\nformat=rce\nzero_diagonal=yes\n",
        )
        .unwrap();
        assert_eq!(c.corpus, Some(PathBuf::from("a.tsv")));
        assert_eq!(c.c_threshold, 0.3);
        assert_eq!(c.stages, vec![Stage::Ingest, Stage::Discover]);
        assert_eq!(c.corpus_format, CorpusFormat::Rce(ColumnMap::RCE));
        assert!(c.baseline.zero_diagonal);
        assert!(PipelineConfig::parse_kv("nonsense").unwrap_err().is_config());
        assert!(PipelineConfig::parse_kv("bogus=1").unwrap_err().is_config());
        assert!(parse_stages("ingest,frobnicate").is_err());
    }

    #[test]
    fn missing_schema_is_a_config_error_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = PipelineConfig {
            out: dir.path().join("run"),
            stages: vec![Stage::Ground],
            ..Default::default()
        };
        for (k, v) in [
            ("corpus", "c"),
            ("d1", "a"),
            ("d2", "b"),
            ("d1_label", "A"),
            ("d2_label", "B"),
            ("embeddings", "e"),
            ("lexdb", "l"),
            ("dname", "x"),
        ] {
            c.set(k, v).unwrap();
        }
        let err = run_pipeline(&c).unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(!dir.path().join("run").exists());
    }

    #[test]
    fn thresholds_are_validated() {
        let c = PipelineConfig {
            g_threshold: 1.5,
            ..Default::default()
        };
        assert!(c.plan().unwrap_err().is_config());
        let c = PipelineConfig {
            s_threshold: 0.9,
            g_threshold: 0.75,
            ..Default::default()
        };
        assert!(c.plan().unwrap_err().is_config());
    }
}
