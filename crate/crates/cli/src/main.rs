use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dart_core::artifacts::{self, BaselineReport};
use dart_core::eval::{compare_runs, evaluate_accuracy, EvaluationSheet};
use dart_core::pipeline::{run_pipeline, PipelineConfig, RunReport, Stage, StageMode};
use dart_core::{DartError, Result};

#[derive(Parser, Debug)]
#[command(name = "dart", version, about = "Discover new relations between two ontology classes")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Flat key=value configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated stages: ingest, discover, ground, triples, baseline.
    #[arg(long, global = true, value_name = "LIST")]
    stages: Option<String>,
    #[arg(long, global = true, value_name = "X")]
    c_threshold: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    s_threshold: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    g_threshold: Option<f64>,
    /// Namespace for minted relation IRIs.
    #[arg(long, global = true, value_name = "IRI")]
    namespace: Option<String>,
    /// Any configuration key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Restrict an extraction corpus to the class pair and collect patterns.
    Ingest(IngestArgs),
    /// Context-filter the patterns and cluster them into relations.
    Discover(DiscoverArgs),
    /// Ground relations against the ontology schema.
    Ground(GroundArgs),
    /// Generate instance triples for retained relations.
    Triples(StageInput),
    /// Run the co-occurrence clustering baseline.
    Baseline(BaselineArgs),
    /// Score an evaluation sheet.
    Evaluate(EvaluateArgs),
    /// Compare two systems' sheets for the same class pair.
    Compare(CompareArgs),
    /// Run the whole pipeline.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Default)]
struct StageInput {
    /// Directory holding upstream artifacts (defaults to --out).
    #[arg(long, value_name = "DIR")]
    input: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct IngestArgs {
    /// Extraction file.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// `tsv` (subject, predicate, object[, confidence]) or `rce`.
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
    /// Column map for `rce`, e.g. `subject=4,predicate=5,object=6,confidence=8`.
    #[arg(long, value_name = "SPEC")]
    rce_columns: Option<String>,
    /// Instance names of the first class, one per line.
    #[arg(long, value_name = "FILE")]
    d1: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    d2: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    d1_label: Option<String>,
    #[arg(long, value_name = "NAME")]
    d2_label: Option<String>,
    /// Class IRI used for grounding (defaults to the label).
    #[arg(long, value_name = "IRI")]
    d1_id: Option<String>,
    #[arg(long, value_name = "IRI")]
    d2_id: Option<String>,
    #[arg(long, value_name = "FILE")]
    function_words: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct DiscoverArgs {
    #[command(flatten)]
    input: StageInput,
    /// Domain name for the context filter.
    #[arg(long)]
    dname: Option<String>,
    /// Word vectors in text format (`<vocab> <dim>` header).
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Gloss database: lemma, pos, sense id, gloss.
    #[arg(long, value_name = "FILE")]
    lexdb: Option<PathBuf>,
    /// `content` or `raw` tokens for clustering similarity.
    #[arg(long, value_name = "MODE")]
    similarity_input: Option<String>,
}

#[derive(Args, Debug, Default)]
struct GroundArgs {
    #[command(flatten)]
    input: StageInput,
    /// Ontology schema in N-Triples.
    #[arg(long, value_name = "FILE")]
    schema: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    lexdb: Option<PathBuf>,
    /// Extra domain declaration, PROPERTY=CLASS. Repeatable.
    #[arg(long, value_name = "P=C")]
    domain_override: Vec<String>,
    /// Extra range declaration, PROPERTY=CLASS. Repeatable.
    #[arg(long, value_name = "P=C")]
    range_override: Vec<String>,
}

#[derive(Args, Debug, Default)]
struct BaselineArgs {
    #[command(flatten)]
    input: StageInput,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Zero the matrix diagonal before clustering.
    #[arg(long)]
    zero_diagonal: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// relation, evaluator1, evaluator2, evaluator3 (correct/incorrect).
    #[arg(long, value_name = "FILE")]
    sheet: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, value_name = "FILE")]
    dart_sheet: PathBuf,
    #[arg(long, value_name = "FILE")]
    baseline_sheet: PathBuf,
    /// `report.json` of the pipeline run.
    #[arg(long, value_name = "FILE")]
    dart_report: PathBuf,
    /// `baseline_report.json` of the baseline run.
    #[arg(long, value_name = "FILE")]
    baseline_report: PathBuf,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    #[command(flatten)]
    discover: DiscoverArgs,
    #[arg(long, value_name = "FILE")]
    schema: Option<PathBuf>,
    #[arg(long, value_name = "P=C")]
    domain_override: Vec<String>,
    #[arg(long, value_name = "P=C")]
    range_override: Vec<String>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    zero_diagonal: bool,
}

type Overrides = Vec<(&'static str, String)>;

fn push<T: ToString>(out: &mut Overrides, key: &'static str, value: &Option<T>) {
    if let Some(v) = value {
        out.push((key, v.to_string()));
    }
}

fn push_path(out: &mut Overrides, key: &'static str, value: &Option<PathBuf>) {
    if let Some(v) = value {
        out.push((key, v.display().to_string()));
    }
}

impl StageInput {
    fn overrides(&self, out: &mut Overrides) {
        push_path(out, "input", &self.input);
    }
}

impl IngestArgs {
    fn overrides(&self, out: &mut Overrides) {
        push_path(out, "corpus", &self.corpus);
        push(out, "format", &self.format);
        push(out, "rce_columns", &self.rce_columns);
        push_path(out, "d1", &self.d1);
        push_path(out, "d2", &self.d2);
        push(out, "d1_label", &self.d1_label);
        push(out, "d2_label", &self.d2_label);
        push(out, "d1_id", &self.d1_id);
        push(out, "d2_id", &self.d2_id);
        push_path(out, "function_words", &self.function_words);
    }
}

impl DiscoverArgs {
    fn overrides(&self, out: &mut Overrides) {
        self.input.overrides(out);
        push(out, "dname", &self.dname);
        push_path(out, "embeddings", &self.embeddings);
        push_path(out, "lexdb", &self.lexdb);
        push(out, "similarity_input", &self.similarity_input);
    }
}

fn schema_overrides(out: &mut Overrides, schema: &Option<PathBuf>, domains: &[String], ranges: &[String]) {
    push_path(out, "schema", schema);
    for d in domains {
        out.push(("domain_override", d.clone()));
    }
    for r in ranges {
        out.push(("range_override", r.clone()));
    }
}

impl GroundArgs {
    fn overrides(&self, out: &mut Overrides) {
        self.input.overrides(out);
        push_path(out, "lexdb", &self.lexdb);
        schema_overrides(out, &self.schema, &self.domain_override, &self.range_override);
    }
}

impl BaselineArgs {
    fn overrides(&self, out: &mut Overrides) {
        self.input.overrides(out);
        push(out, "k_min", &self.k_min);
        push(out, "k_max", &self.k_max);
        push(out, "max_iters", &self.max_iters);
        if self.zero_diagonal {
            out.push(("zero_diagonal", "true".into()));
        }
    }
}

impl PipelineArgs {
    fn overrides(&self, out: &mut Overrides) {
        self.ingest.overrides(out);
        self.discover.overrides(out);
        schema_overrides(out, &self.schema, &self.domain_override, &self.range_override);
        push(out, "k_min", &self.k_min);
        push(out, "k_max", &self.k_max);
        if self.zero_diagonal {
            out.push(("zero_diagonal", "true".into()));
        }
    }
}

fn build_config(global: &GlobalArgs, stage: Option<Stage>, specific: Overrides) -> Result<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)
            .map_err(|e| DartError::Config(format!("cannot load config {}: {e}", path.display())))?,
        None => PipelineConfig::default(),
    };
    if let Some(stage) = stage {
        config.stages = vec![stage];
    }
    let mut all: Overrides = Vec::new();
    push_path(&mut all, "out", &global.out);
    push(&mut all, "stages", &global.stages);
    push(&mut all, "c_threshold", &global.c_threshold);
    push(&mut all, "s_threshold", &global.s_threshold);
    push(&mut all, "g_threshold", &global.g_threshold);
    push(&mut all, "namespace", &global.namespace);
    all.extend(specific);
    for (k, v) in all {
        config.set(k, &v)?;
    }
    for entry in &global.set {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| DartError::Config(format!("--set `{entry}` is not KEY=VALUE")))?;
        config.set(k, v)?;
    }
    Ok(config)
}

fn print_report(report: &RunReport, config: &PipelineConfig) {
    for (stage, mode) in &report.stages {
        let ms = report.timings_ms.get(stage.as_str()).copied().unwrap_or_default();
        let how = match mode {
            StageMode::Run => "ran",
            StageMode::Load => "loaded",
        };
        println!("{:<9} {how:<7} {ms:>9.1} ms", stage.to_string());
    }
    let c = &report.counts;
    println!("classes: {}", report.classes);
    println!("patterns: {} ({} corpus triples)", c.patterns, c.corpus_triples);
    if let (Some(f), Some(k)) = (c.filtered_patterns, c.clusters) {
        println!("filtered: {f}, clusters: {k}");
    }
    if let Some(v) = &c.verdicts {
        println!(
            "verdicts: new {}, equivalent {}, subproperty {}, inverse {}, discard {} ({} axioms)",
            v.new,
            v.equivalent,
            v.subproperty,
            v.inverse,
            v.discard,
            v.axioms()
        );
    }
    if let Some(t) = c.generated_triples {
        println!("triples: {t}");
    }
    if let Some(b) = &report.baseline {
        let k = b.k.map_or("-".to_string(), |k| k.to_string());
        println!("baseline: k={k}, {} relations, {} seeds", b.relations, b.seeds);
    }
    for v in report.consistency_violations() {
        log::warn!("report inconsistency: {v}");
    }
    println!("artifacts in {}", config.out.display());
}

fn run(cli: Cli) -> Result<()> {
    let (stage, specific) = {
        let mut o = Overrides::new();
        let stage = match &cli.command {
            Command::Ingest(a) => {
                a.overrides(&mut o);
                Some(Stage::Ingest)
            }
            Command::Discover(a) => {
                a.overrides(&mut o);
                Some(Stage::Discover)
            }
            Command::Ground(a) => {
                a.overrides(&mut o);
                Some(Stage::Ground)
            }
            Command::Triples(a) => {
                a.overrides(&mut o);
                Some(Stage::Triples)
            }
            Command::Baseline(a) => {
                a.overrides(&mut o);
                Some(Stage::Baseline)
            }
            Command::Pipeline(a) => {
                a.overrides(&mut o);
                None
            }
            Command::Evaluate(a) => return evaluate(a),
            Command::Compare(a) => return compare(a, &cli.global),
        };
        (stage, o)
    };
    let config = build_config(&cli.global, stage, specific)?;
    let output = run_pipeline(&config)?;
    print_report(&output.report, &config);
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let sheet = EvaluationSheet::load(&args.sheet)?;
    let acc = evaluate_accuracy(&sheet)?;
    println!("{acc}");
    println!("{} of {} relations correct", acc.num_correct, acc.total);
    Ok(())
}

fn compare(args: &CompareArgs, global: &GlobalArgs) -> Result<()> {
    let dart: RunReport = artifacts::read_json(&args.dart_report)?;
    let baseline: BaselineReport = artifacts::read_json(&args.baseline_report)?;
    let baseline_classes = baseline
        .classes
        .ok_or_else(|| DartError::Data(format!("{} names no class pair", args.baseline_report.display())))?;
    let table = compare_runs(
        &dart.classes,
        &baseline_classes,
        &EvaluationSheet::load(&args.dart_sheet)?,
        &EvaluationSheet::load(&args.baseline_sheet)?,
    )?;
    println!("{}", table.table_row());
    if let Some(dir) = &global.out {
        artifacts::write_text(&dir.join("comparison.tsv"), &table.to_tsv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
