//! Command-line pipeline: `parse`, `check`, `generate`, `analyze`,
//! `simulate`, `conform`, and `pipeline` running every stage in order.
//!
//! Exit codes: 0 success, 1 violations or failed verdicts, 2 usage and
//! configuration errors. Every subcommand supports `--format json`.

use crate::codegen::{self, BackendConfig, LayerTexts};
use crate::complexity::{self, ControlFlowGraph};
use crate::constraint::{self, CodeQualityRuleSet, Constraint, InstanceStore};
use crate::diag::ParseDiagnostic;
use crate::model::UmlModel;
use crate::ontology::{self, OntologyRegistry};
use crate::puml;
use crate::sim::{self, ConformanceMode, SimConfig, Trace};
use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(
    name = "mddkit",
    version,
    about = "Model-driven development toolchain for multi-agent systems"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format for reports.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse model files and report the merged model plus diagnostics.
    Parse(ParseArgs),
    /// Check constraints, ontology consistency, and optional instance data.
    Check(CheckArgs),
    /// Assemble the prompt and run a code-generation backend.
    Generate(GenerateArgs),
    /// Compute cyclomatic complexity from graph files or source directories.
    Analyze(AnalyzeArgs),
    /// Run the deterministic fleet mission and record its trace.
    Simulate(SimulateArgs),
    /// Check a recorded trace against the modeled flow.
    Conform(ConformArgs),
    /// Run every stage in order: parse, check, generate, analyze, simulate,
    /// conform.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args, Clone)]
struct ModelArgs {
    /// Model diagram files (.puml): class, state, and activity diagrams.
    #[arg(long = "model", required = true, num_args = 1..)]
    model: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct ParseArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write the canonical JSON model document here.
    #[arg(long)]
    emit_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Constraint file (.ocl).
    #[arg(long)]
    constraints: PathBuf,
    /// Ontology definition files (.onto).
    #[arg(long = "ontology", required = true, num_args = 1..)]
    ontology: Vec<PathBuf>,
    /// Instance data (.json) to check the invariants over.
    #[arg(long)]
    instances: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    constraints: PathBuf,
    #[arg(long = "ontology", required = true, num_args = 1..)]
    ontology: Vec<PathBuf>,
    /// Backend to dispatch the prompt to.
    #[arg(long, value_enum, default_value_t = BackendChoice::Offline)]
    backend: BackendChoice,
    /// Target language identifier embedded in the prompt.
    #[arg(long, default_value = "sim")]
    target: String,
    /// Directory the artifact and manifest are written to.
    #[arg(long)]
    out: PathBuf,
    /// Chat endpoint URL (http backend).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model identifier sent to the endpoint (http backend).
    #[arg(long, default_value = "gpt-4")]
    model_id: String,
    /// Environment variable holding the bearer token (http backend).
    #[arg(long, default_value = "MDDKIT_API_TOKEN")]
    token_env: String,
    /// Request timeout in seconds (http backend).
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    /// Retries after a transient failure (http backend).
    #[arg(long, default_value_t = 2)]
    retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Offline,
    Http,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Graph files (.cfg.json) to analyze.
    #[arg(long = "graph", num_args = 1..)]
    graph: Vec<PathBuf>,
    /// Source directory to extract control-flow graphs from.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Language profile for source extraction.
    #[arg(long, default_value = "sim")]
    profile: String,
}

#[derive(Debug, Args)]
struct SimArgsCommon {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    constraints: PathBuf,
    #[arg(long = "ontology", required = true, num_args = 1..)]
    ontology: Vec<PathBuf>,
    /// Simulation config file (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Drop the fleet-discovery exchange from the flow.
    #[arg(long)]
    no_discovery: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: SimArgsCommon,
    /// Write the trace (text form) here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Trace rendering printed to stdout.
    #[arg(long, value_enum, default_value_t = TraceEmit::Text)]
    emit: TraceEmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceEmit {
    Text,
    Json,
    Puml,
}

#[derive(Debug, Args)]
struct ConformArgs {
    #[command(flatten)]
    common: SimArgsCommon,
    /// Recorded trace file (text form).
    #[arg(long)]
    trace: PathBuf,
    /// Conformance mode; defaults to the config file's mode.
    #[arg(long, value_enum)]
    mode: Option<ModeChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeChoice {
    Strict,
    Relaxed,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: SimArgsCommon,
    #[arg(long, value_enum, default_value_t = BackendChoice::Offline)]
    backend: BackendChoice,
    #[arg(long, default_value = "sim")]
    target: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4")]
    model_id: String,
    #[arg(long, default_value = "MDDKIT_API_TOKEN")]
    token_env: String,
}

/// Entry point used by the binary.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match dispatch(cli) {
        Ok(outcome) => {
            match format {
                OutputFormat::Text => {
                    if !outcome.text.is_empty() {
                        println!("{}", outcome.text.trim_end());
                    }
                }
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.json).expect("report serializes")
                ),
            }
            ExitCode::from(outcome.exit)
        }
        Err(error) => {
            match format {
                OutputFormat::Text => eprintln!("error: {error:#}"),
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "status": "error",
                        "error": format!("{error:#}"),
                    }))
                    .expect("error serializes")
                ),
            }
            ExitCode::from(2)
        }
    }
}

struct Outcome {
    exit: u8,
    text: String,
    json: serde_json::Value,
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::Check(args) => cmd_check(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Conform(args) => cmd_conform(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

// ---------------------------------------------------------------------------
// Shared loading
// ---------------------------------------------------------------------------

fn load_model(paths: &[PathBuf]) -> Result<(UmlModel, Vec<ParseDiagnostic>)> {
    puml::load_model(paths).map_err(|e| anyhow!(e))
}

fn load_constraints(path: &PathBuf) -> Result<(Vec<Constraint>, Vec<ParseDiagnostic>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read constraints file `{}`", path.display()))?;
    Ok(constraint::parse_constraints(&text))
}

fn load_registry(paths: &[PathBuf]) -> Result<(OntologyRegistry, Vec<ParseDiagnostic>)> {
    let mut registry = OntologyRegistry::default();
    let mut diagnostics = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read ontology file `{}`", path.display()))?;
        diagnostics.extend(registry.extend(&text).map_err(|e| anyhow!(e))?);
    }
    Ok((registry, diagnostics))
}

fn load_sim_config(common: &SimArgsCommon) -> Result<SimConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config `{}`", path.display()))?;
            SimConfig::from_text(&text).map_err(|e| anyhow!(e))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if common.no_discovery {
        config.discovery = false;
    }
    Ok(config)
}

fn diagnostics_json(diags: &[ParseDiagnostic]) -> serde_json::Value {
    serde_json::to_value(diags).expect("diagnostics serialize")
}

fn violations_json(violations: &[crate::diag::Violation]) -> serde_json::Value {
    serde_json::to_value(violations).expect("violations serialize")
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_parse(args: ParseArgs) -> Result<Outcome> {
    let (model, diagnostics) = load_model(&args.model.model)?;
    if let Some(path) = &args.emit_model {
        std::fs::write(path, model.to_canonical_json())
            .with_context(|| format!("cannot write `{}`", path.display()))?;
    }
    let errors = diagnostics.iter().filter(|d| d.is_error()).count();
    let mut text = format!(
        "classes: {}\nrelationships: {}\nstate machines: {}\nactivity nodes: {}\n",
        model.classes.len(),
        model.relationships.len(),
        model.state_machines.len(),
        model.activity.as_ref().map(|a| a.nodes.len()).unwrap_or(0),
    );
    for diag in &diagnostics {
        text.push_str(&format!("{diag}\n"));
    }
    Ok(Outcome {
        exit: if errors > 0 { 1 } else { 0 },
        text,
        json: json!({
            "command": "parse",
            "status": if errors > 0 { "violations" } else { "ok" },
            "classes": model.classes.len(),
            "relationships": model.relationships.len(),
            "state_machines": model.state_machines.len(),
            "activity_nodes": model.activity.as_ref().map(|a| a.nodes.len()).unwrap_or(0),
            "diagnostics": diagnostics_json(&diagnostics),
        }),
    })
}

fn cmd_check(args: CheckArgs) -> Result<Outcome> {
    let (model, model_diags) = load_model(&args.model.model)?;
    let (constraints, constraint_diags) = load_constraints(&args.constraints)?;
    let (registry, ontology_diags) = load_registry(&args.ontology)?;

    let mut diagnostics = model_diags;
    diagnostics.extend(constraint_diags);
    diagnostics.extend(ontology_diags);

    let mut defects = constraint::reconcile_cardinality(&model, &constraints);
    let mut violations = ontology::check_predicate_consistency(&registry, &model);

    let mut store_report = json!(null);
    if let Some(path) = &args.instances {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read instances `{}`", path.display()))?;
        let store = InstanceStore::from_json(&text)
            .with_context(|| format!("cannot parse instance store `{}`", path.display()))?;
        violations.extend(store.validate(&model));
        let invariant_violations = constraint::check_invariants(&model, &store, &constraints);
        store_report = json!({
            "instances": store.instances.values().map(Vec::len).sum::<usize>(),
            "invariant_violations": violations_json(&invariant_violations),
        });
        violations.extend(invariant_violations);
    }

    let problem_count = diagnostics.iter().filter(|d| d.is_error()).count()
        + defects.len()
        + violations.len();
    let mut text = String::new();
    for diag in &diagnostics {
        text.push_str(&format!("{diag}\n"));
    }
    defects.sort_by(|a, b| (&a.location, a.code).cmp(&(&b.location, b.code)));
    for defect in &defects {
        text.push_str(&format!("defect: {defect}\n"));
    }
    for violation in &violations {
        text.push_str(&format!("violation: {violation}\n"));
    }
    if problem_count == 0 {
        text.push_str("all checks passed\n");
    }
    Ok(Outcome {
        exit: if problem_count > 0 { 1 } else { 0 },
        text,
        json: json!({
            "command": "check",
            "status": if problem_count > 0 { "violations" } else { "ok" },
            "constraints": constraints.len(),
            "concepts": registry.concept_count(),
            "diagnostics": diagnostics_json(&diagnostics),
            "defects": serde_json::to_value(&defects)?,
            "violations": violations_json(&violations),
            "instances": store_report,
        }),
    })
}

fn backend_config(
    backend: BackendChoice,
    endpoint: &Option<String>,
    model_id: &str,
    token_env: &str,
    timeout: u64,
    retries: u32,
) -> Result<BackendConfig> {
    match backend {
        BackendChoice::Offline => Ok(BackendConfig::offline()),
        BackendChoice::Http => {
            let endpoint = endpoint
                .clone()
                .ok_or_else(|| anyhow!("--endpoint is required with --backend http"))?;
            let mut config = BackendConfig::http(endpoint, model_id, token_env);
            config.timeout_secs = timeout;
            config.max_retries = retries;
            Ok(config)
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<Outcome> {
    let layers = LayerTexts::load(&args.model.model, &args.constraints, &args.ontology)?;
    let bundle = codegen::assemble_prompt(&layers, &args.target)?;
    let config = backend_config(
        args.backend,
        &args.endpoint,
        &args.model_id,
        &args.token_env,
        args.timeout,
        args.retries,
    )?;
    let artifact = codegen::generate(&bundle, &config)?;
    let written = artifact.write_to(&args.out)?;
    let violations = codegen::audit_artifact(&artifact, &CodeQualityRuleSet::default());

    let mut text = format!(
        "backend: {}\nprompt digest: {}\nfiles written: {}\n",
        artifact.backend,
        artifact.prompt_digest,
        written.len()
    );
    for path in &written {
        text.push_str(&format!("  {}\n", path.display()));
    }
    for violation in &violations {
        text.push_str(&format!("violation: {violation}\n"));
    }
    Ok(Outcome {
        exit: if violations.is_empty() { 0 } else { 1 },
        text,
        json: json!({
            "command": "generate",
            "status": if violations.is_empty() { "ok" } else { "violations" },
            "backend": artifact.backend,
            "prompt_digest": artifact.prompt_digest,
            "files": artifact.files.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>(),
            "out_dir": args.out.display().to_string(),
            "audit_violations": violations_json(&violations),
        }),
    })
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<Outcome> {
    let (graphs, warnings) = collect_graphs(&args)?;
    if graphs.is_empty() {
        return Err(anyhow!("nothing to analyze: pass --graph files or a --source directory"));
    }
    let report = complexity::report(&graphs).map_err(|e| anyhow!(e))?;
    let mut text = report.to_text_table();
    for warning in &warnings {
        text.push_str(&format!("warning: {warning}\n"));
    }
    Ok(Outcome {
        exit: 0,
        text,
        json: json!({
            "command": "analyze",
            "status": "ok",
            "rows": serde_json::to_value(&report.rows)?,
            "model_total": report.model_total,
            "warnings": warnings,
        }),
    })
}

fn collect_graphs(args: &AnalyzeArgs) -> Result<(Vec<ControlFlowGraph>, Vec<String>)> {
    let mut graphs = Vec::new();
    let mut warnings = Vec::new();
    for path in &args.graph {
        let (mut file_graphs, mut file_warnings) =
            complexity::build_cfg_from_graphfile(path).map_err(|e| anyhow!(e))?;
        graphs.append(&mut file_graphs);
        warnings.append(&mut file_warnings);
    }
    if let Some(dir) = &args.source {
        let profile = complexity::profile_named(&args.profile).map_err(|e| anyhow!(e))?;
        let entries = std::fs::read_dir(dir)
            .with_context(|| format!("cannot read source directory `{}`", dir.display()))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .map(|e| e.to_string_lossy() == profile.file_extension)
                    .unwrap_or(false)
            })
            .collect();
        paths.sort();
        let mut files = Vec::new();
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read `{}`", path.display()))?;
            files.push((path.display().to_string(), text));
        }
        let units = complexity::build_cfg_from_source(&files, &profile).map_err(|e| anyhow!(e))?;
        for unit in units {
            let counts = complexity::cyclomatic(&unit.cfg).map_err(|e| anyhow!(e))?;
            if counts.complexity != unit.decision_points as i64 + 1 {
                return Err(anyhow!(
                    "extractor invariant broken for `{}`: M = {} but decisions + 1 = {}",
                    unit.cfg.unit,
                    counts.complexity,
                    unit.decision_points + 1
                ));
            }
            graphs.push(unit.cfg);
        }
    }
    Ok((graphs, warnings))
}

fn sim_inputs(
    common: &SimArgsCommon,
) -> Result<(UmlModel, OntologyRegistry, Vec<Constraint>, SimConfig)> {
    let (model, diags) = load_model(&common.model.model)?;
    let errors: Vec<&ParseDiagnostic> = diags.iter().filter(|d| d.is_error()).collect();
    if !errors.is_empty() {
        return Err(anyhow!(
            "model has errors:\n{}",
            errors.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
        ));
    }
    let (constraints, cdiags) = load_constraints(&common.constraints)?;
    if cdiags.iter().any(|d| d.is_error()) {
        return Err(anyhow!("constraints have syntax errors"));
    }
    let (registry, _) = load_registry(&common.ontology)?;
    let config = load_sim_config(common)?;
    Ok((model, registry, constraints, config))
}

fn cmd_simulate(args: SimulateArgs) -> Result<Outcome> {
    let (model, registry, constraints, config) = sim_inputs(&args.common)?;
    match sim::run_mission(&model, &registry, &constraints, &config) {
        Ok(outcome) => {
            if let Some(path) = &args.trace_out {
                std::fs::write(path, outcome.trace.to_text())
                    .with_context(|| format!("cannot write `{}`", path.display()))?;
            }
            let text = match args.emit {
                TraceEmit::Text => outcome.trace.to_text(),
                TraceEmit::Json => outcome.trace.to_json(),
                TraceEmit::Puml => outcome.trace.to_plantuml(),
            };
            Ok(Outcome {
                exit: 0,
                text,
                json: json!({
                    "command": "simulate",
                    "status": "ok",
                    "seed": config.seed,
                    "events": outcome.trace.len(),
                    "fleet_performance": outcome.fleet_performance,
                    "uv_states": serde_json::to_value(&outcome.uv_states)?,
                    "trace": serde_json::to_value(&outcome.trace)?,
                }),
            })
        }
        Err(
            error @ (sim::SimError::ConstraintViolation(_)
            | sim::SimError::SchemaViolation(_)
            | sim::SimError::Deadlock { .. }),
        ) => Ok(Outcome {
            exit: 1,
            text: format!("simulation aborted: {error}"),
            json: json!({
                "command": "simulate",
                "status": "violations",
                "error": error.to_string(),
            }),
        }),
        Err(error) => Err(anyhow!(error)),
    }
}

fn cmd_conform(args: ConformArgs) -> Result<Outcome> {
    let (model, registry, _, config) = sim_inputs(&args.common)?;
    let trace_text = std::fs::read_to_string(&args.trace)
        .with_context(|| format!("cannot read trace `{}`", args.trace.display()))?;
    let trace = Trace::parse_text(&trace_text).map_err(|e| anyhow!(e))?;
    let roster: Vec<String> = config.roster.iter().map(|e| e.id.clone()).collect();
    let flow = sim::derive_expected_flow(&model, &registry, &roster, config.discovery)
        .map_err(|e| anyhow!(e))?;
    let mode = match args.mode {
        Some(ModeChoice::Strict) => ConformanceMode::Strict,
        Some(ModeChoice::Relaxed) => ConformanceMode::Relaxed,
        None => config.conformance_mode,
    };
    let result = sim::check_conformance(&trace, &flow, mode, &registry);

    let mut text = format!(
        "mode: {mode}\nexpected events: {}\ntrace events: {}\nverdict: {}\n",
        flow.event_count(),
        trace.len(),
        if result.passed() { "pass" } else { "fail" }
    );
    for mismatch in &result.mismatches {
        text.push_str(&format!("mismatch: {}\n", serde_json::to_string(mismatch)?));
    }
    Ok(Outcome {
        exit: if result.passed() { 0 } else { 1 },
        text,
        json: json!({
            "command": "conform",
            "status": if result.passed() { "ok" } else { "violations" },
            "mode": mode.to_string(),
            "verdict": if result.passed() { "pass" } else { "fail" },
            "expected_events": flow.event_count(),
            "trace_events": trace.len(),
            "mismatches": serde_json::to_value(&result.mismatches)?,
        }),
    })
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
struct StageResult {
    stage: &'static str,
    status: &'static str,
    duration_ms: u128,
    detail: String,
    artifacts: Vec<String>,
}

enum StageOutcome {
    Ok { detail: String, artifacts: Vec<String> },
    Violations { detail: String },
    Error { detail: String },
    Skipped,
}

impl StageOutcome {
    fn ok(detail: impl Into<String>) -> Self {
        StageOutcome::Ok { detail: detail.into(), artifacts: Vec::new() }
    }

    fn unpack(self) -> (&'static str, String, Vec<String>, u8) {
        match self {
            StageOutcome::Ok { detail, artifacts } => ("ok", detail, artifacts, 0),
            StageOutcome::Violations { detail } => ("violations", detail, Vec::new(), 1),
            StageOutcome::Error { detail } => ("error", detail, Vec::new(), 2),
            StageOutcome::Skipped => ("skipped", String::new(), Vec::new(), 0),
        }
    }
}

struct PipelineRecorder {
    stages: Vec<StageResult>,
    worst: u8,
}

impl PipelineRecorder {
    fn record(&mut self, stage: &'static str, started: Instant, outcome: StageOutcome) {
        let (status, detail, artifacts, severity) = outcome.unpack();
        self.stages.push(StageResult {
            stage,
            status,
            duration_ms: started.elapsed().as_millis(),
            detail,
            artifacts,
        });
        self.worst = self.worst.max(severity);
    }
}

fn cmd_pipeline(args: PipelineArgs) -> Result<Outcome> {
    let mut rec = PipelineRecorder { stages: Vec::new(), worst: 0 };

    // parse
    let started = Instant::now();
    let model = match load_model(&args.common.model.model) {
        Ok((model, diags)) => {
            let errors: Vec<String> =
                diags.iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect();
            if errors.is_empty() {
                rec.record(
                    "parse",
                    started,
                    StageOutcome::ok(format!("{} classes", model.classes.len())),
                );
                Some(model)
            } else {
                rec.record("parse", started, StageOutcome::Violations {
                    detail: errors.join("; "),
                });
                None
            }
        }
        Err(e) => {
            rec.record("parse", started, StageOutcome::Error { detail: e.to_string() });
            None
        }
    };

    // check
    let started = Instant::now();
    let mut checked: Option<(Vec<Constraint>, OntologyRegistry)> = None;
    match &model {
        None => rec.record("check", started, StageOutcome::Skipped),
        Some(model) => {
            let result = (|| -> Result<(Vec<Constraint>, OntologyRegistry, usize)> {
                let (constraints, cdiags) = load_constraints(&args.common.constraints)?;
                let syntax_errors = cdiags.iter().filter(|d| d.is_error()).count();
                let (registry, _) = load_registry(&args.common.ontology)?;
                let defects = constraint::reconcile_cardinality(model, &constraints);
                let violations = ontology::check_predicate_consistency(&registry, model);
                Ok((constraints, registry, syntax_errors + defects.len() + violations.len()))
            })();
            match result {
                Ok((constraints, registry, 0)) => {
                    rec.record(
                        "check",
                        started,
                        StageOutcome::ok(format!("{} constraints", constraints.len())),
                    );
                    checked = Some((constraints, registry));
                }
                Ok((_, _, problems)) => rec.record("check", started, StageOutcome::Violations {
                    detail: format!("{problems} problems"),
                }),
                Err(e) => {
                    rec.record("check", started, StageOutcome::Error { detail: e.to_string() })
                }
            }
        }
    }

    // generate
    let started = Instant::now();
    let mut generated = None;
    if checked.is_none() {
        rec.record("generate", started, StageOutcome::Skipped);
    } else {
        let result = (|| -> Result<(codegen::GeneratedArtifact, Vec<String>)> {
            let layers = LayerTexts::load(
                &args.common.model.model,
                &args.common.constraints,
                &args.common.ontology,
            )?;
            let bundle = codegen::assemble_prompt(&layers, &args.target)?;
            let config = backend_config(
                args.backend,
                &args.endpoint,
                &args.model_id,
                &args.token_env,
                120,
                2,
            )?;
            let artifact = codegen::generate(&bundle, &config)?;
            let written = artifact.write_to(&args.out)?;
            Ok((artifact, written.iter().map(|p| p.display().to_string()).collect()))
        })();
        match result {
            Ok((artifact, written)) => {
                let audit = codegen::audit_artifact(&artifact, &CodeQualityRuleSet::default());
                if audit.is_empty() {
                    rec.record("generate", started, StageOutcome::Ok {
                        detail: format!("{} files", artifact.files.len()),
                        artifacts: written,
                    });
                    generated = Some(artifact);
                } else {
                    rec.record("generate", started, StageOutcome::Violations {
                        detail: format!("{} audit violations", audit.len()),
                    });
                }
            }
            Err(e) => {
                rec.record("generate", started, StageOutcome::Error { detail: e.to_string() })
            }
        }
    }

    // analyze the generated artifact
    let started = Instant::now();
    match &generated {
        None => rec.record("analyze", started, StageOutcome::Skipped),
        Some(artifact) => {
            let result = (|| -> Result<complexity::ComplexityReport> {
                let profile = complexity::sim_profile();
                let units = complexity::build_cfg_from_source(&artifact.files, &profile)
                    .map_err(|e| anyhow!(e))?;
                let graphs: Vec<ControlFlowGraph> = units.into_iter().map(|u| u.cfg).collect();
                complexity::report(&graphs).map_err(|e| anyhow!(e))
            })();
            match result {
                Ok(report) => rec.record(
                    "analyze",
                    started,
                    StageOutcome::ok(format!("model total M = {}", report.model_total)),
                ),
                Err(e) => {
                    rec.record("analyze", started, StageOutcome::Error { detail: e.to_string() })
                }
            }
        }
    }

    // simulate and conform run on the model itself, independent of
    // generate/analyze results.
    let started = Instant::now();
    let mut traced = None;
    match (&model, &checked) {
        (Some(model), Some((constraints, registry))) => match load_sim_config(&args.common) {
            Err(e) => rec.record("simulate", started, StageOutcome::Error { detail: e.to_string() }),
            Ok(config) => match sim::run_mission(model, registry, constraints, &config) {
                Ok(outcome) => {
                    rec.record(
                        "simulate",
                        started,
                        StageOutcome::ok(format!("{} events", outcome.trace.len())),
                    );
                    traced = Some((outcome.trace, config));
                }
                Err(e) => rec.record("simulate", started, StageOutcome::Violations {
                    detail: e.to_string(),
                }),
            },
        },
        _ => rec.record("simulate", started, StageOutcome::Skipped),
    }

    let started = Instant::now();
    match (&model, &checked, &traced) {
        (Some(model), Some((_, registry)), Some((trace, config))) => {
            let roster: Vec<String> = config.roster.iter().map(|e| e.id.clone()).collect();
            match sim::derive_expected_flow(model, registry, &roster, config.discovery) {
                Err(e) => {
                    rec.record("conform", started, StageOutcome::Error { detail: e.to_string() })
                }
                Ok(flow) => {
                    let result =
                        sim::check_conformance(trace, &flow, config.conformance_mode, registry);
                    if result.passed() {
                        rec.record("conform", started, StageOutcome::ok("verdict: pass"));
                    } else {
                        rec.record("conform", started, StageOutcome::Violations {
                            detail: format!("{} mismatches", result.mismatches.len()),
                        });
                    }
                }
            }
        }
        _ => rec.record("conform", started, StageOutcome::Skipped),
    }

    let worst = rec.worst;
    let mut text = String::new();
    for stage in &rec.stages {
        text.push_str(&format!(
            "{:<9} {:<10} {:>6} ms  {}\n",
            stage.stage, stage.status, stage.duration_ms, stage.detail
        ));
    }
    text.push_str(&format!("exit: {worst}\n"));
    Ok(Outcome {
        exit: worst,
        text,
        json: json!({
            "command": "pipeline",
            "status": match worst { 0 => "ok", 1 => "violations", _ => "error" },
            "stages": serde_json::to_value(&rec.stages)?,
            "exit": worst,
        }),
    })
}
