//! The `gazeground` command line.
//!
//! ```text
//! gazeground fixtures --out fx/                        # bundled breakfast/T1 inputs
//! gazeground extract --scene fx/scene.json --trace fx/trace.jsonl \
//!     --transcript fx/transcript.json --out history.json
//! gazeground scanpath --history history.json --transcript fx/transcript.json > block.txt
//! gazeground agent-run --scanpath block.txt --scene fx/scene.json
//! gazeground demo breakfast T1
//! gazeground eval --synthetic-users 7 --format table
//! gazeground serve --addr 127.0.0.1:8080
//! ```
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeground_core::agent::{
    backend_from_name, build_tool_registry, AgentConfig, AgentSession, Backend, ReplayScript, TurnTranscript,
};
use gazeground_core::eval::{
    builtin_scenario, demo_fixture, render_report_tables, report_csv, run_evaluation, synthesize_grid,
    EvalCondition, EvalOptions, EvalReport, RecordGrid, Scenario, SynthOptions, TaskId, SCENARIO_IDS,
};
use gazeground_core::geometry::{Scene, Vec3};
use gazeground_core::io::{
    history_to_string, load_history, load_trace, load_transcript, load_turn_records, parse_scene_str,
    save_scene, save_trace, save_transcript, save_turn_records,
};
use gazeground_core::scanpath::{
    compose, parse_prompt_text, render_prompt_text, render_timeline, SemanticScanpath, Utterance,
};
use gazeground_core::segmentation::{build_gaze_history, GazeHistory, SegmentationParams, TimeWindow};

/// Invalid combination of arguments that clap cannot express; exits 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit status for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "gazeground", version, about = "Gaze + speech semantic scanpaths for LLM robot assistants")]
pub struct Cli {
    /// More diagnostics on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaze history from a head-pose trace; JSON plus a text timeline.
    Extract(ExtractArgs),
    /// Pairs a gaze history with a transcript and renders the prompt block.
    Scanpath(ScanpathArgs),
    /// Runs one agent turn on a scanpath and prints the transcript JSON.
    AgentRun(AgentRunArgs),
    /// Accuracy, gaze distributions and chi-square over a record grid.
    Eval(EvalArgs),
    /// Runs the HTTP/SSE session service.
    Serve(ServeArgs),
    /// End-to-end run of a bundled interaction in the simulated scene.
    Demo(DemoArgs),
    /// Writes a synthetic record grid, one JSONL file per user and scenario.
    SynthRecords(SynthArgs),
    /// Writes the bundled demo inputs (scene, trace, transcript) for a task.
    Fixtures(FixturesArgs),
}

/// Gaze-history parameters. Flags default to the published values; a
/// `--params` TOML file overrides the flags.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = SegmentationParams::DEFAULT_ANGULAR_THRESHOLD_DEG)]
    pub angular_threshold_deg: f64,
    #[arg(long, default_value_t = SegmentationParams::DEFAULT_MIN_FIXATION_MS)]
    pub min_fixation_ms: f64,
    #[arg(long, default_value_t = SegmentationParams::DEFAULT_SAMPLE_SPACING_MM)]
    pub sample_spacing_mm: f64,
    #[arg(long, default_value_t = SegmentationParams::DEFAULT_MERGE_WINDOW_MS)]
    pub merge_window_ms: f64,
    #[arg(long, default_value_t = SegmentationParams::DEFAULT_SACCADE_SPEED_DEG_PER_S)]
    pub saccade_speed_deg_per_s: f64,
    /// TOML file with any of the fields of the parameter set.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
}

impl ParamArgs {
    pub fn resolve(&self) -> anyhow::Result<SegmentationParams> {
        let mut p = SegmentationParams {
            angular_threshold_deg: self.angular_threshold_deg,
            min_fixation_ms: self.min_fixation_ms,
            sample_spacing_mm: self.sample_spacing_mm,
            merge_window_ms: self.merge_window_ms,
            saccade_speed_threshold_deg_per_s: self.saccade_speed_deg_per_s,
        };
        if let Some(path) = &self.params {
            let text = read(path)?;
            let table: toml::Table = toml::from_str(&text).with_context(|| format!("{}", path.display()))?;
            // Merge over the flag values rather than the defaults.
            let mut merged = toml::Table::try_from(p)?;
            merged.extend(table);
            p = merged
                .try_into()
                .with_context(|| format!("{}: invalid parameter file", path.display()))?;
        }
        p.validate()?;
        Ok(p)
    }
}

/// A scene file, or a built-in scenario's scene.
#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene JSON file.
    #[arg(long, value_name = "FILE", conflicts_with = "scenario")]
    pub scene: Option<PathBuf>,
    /// Built-in scenario whose scene to use (default breakfast).
    #[arg(long)]
    pub scenario: Option<String>,
}

impl SceneArgs {
    pub fn load(&self) -> anyhow::Result<(Scene, Option<Vec3>)> {
        match &self.scene {
            Some(path) => Ok(parse_scene_str(&read(path)?, &path.display().to_string())?),
            None => {
                let s = scenario(self.scenario.as_deref().unwrap_or("breakfast"))?;
                Ok((s.scene, Some(s.viewer)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Heuristic,
    Replay,
    Remote,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Heuristic => "heuristic",
            BackendKind::Replay => "replay",
            BackendKind::Remote => "remote",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Remote reads GAZEGROUND_API_KEY (or OPENAI_API_KEY), GAZEGROUND_BASE_URL
    /// and GAZEGROUND_MODEL.
    #[arg(long, value_enum, default_value_t = BackendKind::Heuristic)]
    pub backend: BackendKind,
    /// Replay script (JSON) for the replay backend.
    #[arg(long, value_name = "FILE")]
    pub script: Option<PathBuf>,
}

impl BackendArgs {
    pub fn build(&self) -> anyhow::Result<Arc<dyn Backend>> {
        let script = match &self.script {
            Some(path) => Some(
                ReplayScript::from_json(&read(path)?).with_context(|| format!("{}: invalid replay script", path.display()))?,
            ),
            None if self.backend == BackendKind::Replay => return Err(usage("--backend replay needs --script FILE")),
            None => None,
        };
        Ok(backend_from_name(self.backend.name(), script)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Window start and end in ms. Defaults to the transcript's turn window,
    /// then to the whole trace.
    #[arg(long, num_args = 2, value_names = ["START_MS", "END_MS"], allow_negative_numbers = true)]
    pub window: Option<Vec<f64>>,
    /// Transcript whose turn window to use.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// Write the history JSON here and the timeline to stdout; otherwise the
    /// JSON goes to stdout and the timeline to stderr.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanpathFormat {
    Text,
    Json,
    Timeline,
}

#[derive(Debug, Clone, Args)]
pub struct ScanpathArgs {
    #[arg(long, value_name = "FILE")]
    pub history: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub transcript: PathBuf,
    #[arg(long, value_enum, default_value_t = ScanpathFormat::Text)]
    pub format: ScanpathFormat,
}

#[derive(Debug, Clone, Args)]
pub struct AgentRunArgs {
    /// Rendered prompt block or scanpath JSON.
    #[arg(long, value_name = "FILE")]
    pub scanpath: PathBuf,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Ablation: no query_objects tool.
    #[arg(long)]
    pub no_scene_query: bool,
    /// Leave out the action tools.
    #[arg(long)]
    pub no_actions: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Full,
    SpeechGaze,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Directory of record files; otherwise a synthetic grid is generated.
    #[arg(long, value_name = "DIR", conflicts_with = "synthetic_users")]
    pub records: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub synthetic_users: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate one scenario only.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_enum, default_value_t = ConditionArg::Both)]
    pub condition: ConditionArg,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub parallelism: usize,
    /// Leave out turns whose gaze history misses a target object.
    #[arg(long)]
    pub discard_missed_target: bool,
    /// Register the action tools too.
    #[arg(long)]
    pub actions: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Default backend; heuristic is always available as well.
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Sessions start without query_objects unless they ask for it.
    #[arg(long)]
    pub no_scene_query: bool,
    #[arg(long)]
    pub no_actions: bool,
    /// Leading margin before speech start for the default turn window.
    #[arg(long, default_value_t = gazeground_service::DEFAULT_LOOKBACK_MS)]
    pub lookback_ms: f64,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(default_value = "breakfast")]
    pub scenario: String,
    #[arg(default_value = "T1")]
    pub task: TaskId,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Print the transcript JSON instead of the summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub users: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of a glance at a non-target object per fixation.
    #[arg(long, default_value_t = 0.0)]
    pub glance_prob: f64,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FixturesArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value = "breakfast")]
    pub scenario: String,
    #[arg(long, default_value = "T1")]
    pub task: TaskId,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scenario(name: &str) -> anyhow::Result<Scenario> {
    Ok(builtin_scenario(name)?)
}

// ------------------------------------------------------------- commands

/// History JSON and timeline for `args`.
pub fn extract(args: &ExtractArgs) -> anyhow::Result<(GazeHistory, String)> {
    let params = args.params.resolve()?;
    let (scene, _) = args.scene.load()?;
    let (trace, warnings) = load_trace(&args.trace)?;
    for w in &warnings {
        tracing::warn!(code = %w.code, line = ?w.line, "{}: {}", args.trace.display(), w.message);
    }
    let window = match (&args.window, &args.transcript) {
        (Some(w), _) => TimeWindow::new(w[0], w[1]),
        (None, Some(t)) => load_transcript(t)?.turn_window,
        (None, None) => match (trace.samples.first(), trace.samples.last()) {
            (Some(a), Some(b)) => TimeWindow::new(a.timestamp_ms, b.timestamp_ms),
            _ => TimeWindow::new(0.0, 0.0),
        },
    };
    if !(window.start_ms <= window.end_ms) {
        return Err(usage(format!("--window start {} is after end {}", window.start_ms, window.end_ms)));
    }
    let history = build_gaze_history(&trace.samples, &scene, window, &params)?;
    let timeline = render_timeline(&SemanticScanpath {
        utterance: Utterance::new("", window),
        gaze_history: history.clone(),
    });
    // No utterance here; drop its empty line.
    let timeline = timeline.strip_suffix("Speech: \"\"\n").unwrap_or(&timeline).to_string();
    Ok((history, timeline))
}

pub fn scanpath(args: &ScanpathArgs) -> anyhow::Result<SemanticScanpath> {
    let history = load_history(&args.history)?;
    let utterance = load_transcript(&args.transcript)?;
    Ok(compose(utterance, history)?)
}

pub fn render_scanpath(sp: &SemanticScanpath, format: ScanpathFormat) -> String {
    match format {
        ScanpathFormat::Text => render_prompt_text(sp),
        ScanpathFormat::Json => serde_json::to_string_pretty(sp).expect("scanpath serializes") + "\n",
        ScanpathFormat::Timeline => render_timeline(sp),
    }
}

/// Reads a prompt block, or scanpath JSON when the file starts with `{`.
pub fn load_scanpath(path: &Path) -> anyhow::Result<SemanticScanpath> {
    let text = read(path)?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).with_context(|| format!("{}: invalid scanpath JSON", path.display()))
    } else {
        parse_prompt_text(&text).with_context(|| format!("{}", path.display()))
    }
}

/// One turn in a fresh session.
pub fn run_agent(
    scene: Scene,
    scanpath: SemanticScanpath,
    backend: Arc<dyn Backend>,
    condition: EvalCondition,
    actions_enabled: bool,
) -> TurnTranscript {
    let mut session = AgentSession::new(
        scene,
        build_tool_registry(condition, actions_enabled),
        backend,
        AgentConfig::default(),
    );
    let turn = session.run_turn(&scanpath);
    TurnTranscript {
        turn_index: 0,
        scanpath,
        turn,
    }
}

pub fn agent_run(args: &AgentRunArgs) -> anyhow::Result<TurnTranscript> {
    let sp = load_scanpath(&args.scanpath)?;
    let (scene, _) = args.scene.load()?;
    let backend = args.backend.build()?;
    let condition = EvalCondition {
        scene_query_enabled: !args.no_scene_query,
    };
    Ok(run_agent(scene, sp, backend, condition, !args.no_actions))
}

fn eval_grid(args: &EvalArgs, scenarios: &[Scenario], params: &SegmentationParams) -> anyhow::Result<RecordGrid> {
    match &args.records {
        Some(dir) => Ok(load_turn_records(dir)?),
        None => {
            let refs: Vec<&Scenario> = scenarios.iter().collect();
            let users = args.synthetic_users.unwrap_or(7);
            if users == 0 {
                return Err(usage("--synthetic-users must be at least 1"));
            }
            Ok(synthesize_grid(&refs, users, args.seed, &SynthOptions::default(), params)?)
        }
    }
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<Vec<EvalReport>> {
    let params = args.params.resolve()?;
    let names: Vec<&str> = match &args.scenario {
        Some(s) => vec![s.as_str()],
        None => SCENARIO_IDS.to_vec(),
    };
    let scenarios = names.iter().map(|n| scenario(n)).collect::<anyhow::Result<Vec<_>>>()?;
    let grid = eval_grid(args, &scenarios, &params)?;
    let backend = args.backend.build()?;
    let conditions: &[EvalCondition] = match args.condition {
        ConditionArg::Full => &[EvalCondition::FULL],
        ConditionArg::SpeechGaze => &[EvalCondition::SPEECH_GAZE],
        ConditionArg::Both => &[EvalCondition::FULL, EvalCondition::SPEECH_GAZE],
    };
    let present = grid.scenarios();
    let mut reports = Vec::new();
    for s in &scenarios {
        if !present.contains(&s.id.as_str()) {
            if args.scenario.is_some() || args.records.is_none() {
                bail!("no records for scenario {:?}", s.id);
            }
            continue;
        }
        let mut results = Vec::new();
        for &condition in conditions {
            let options = EvalOptions {
                condition,
                parallelism: args.parallelism,
                discard_missed_target: args.discard_missed_target,
                actions_enabled: args.actions,
                agent: AgentConfig::default(),
            };
            tracing::info!(scenario = %s.id, condition = condition.name(), "evaluating");
            results.push(run_evaluation(&grid, s, &options, backend.clone())?);
        }
        reports.push(EvalReport::new(&s.id, results));
    }
    if reports.is_empty() {
        bail!("the record grid has none of the requested scenarios");
    }
    Ok(reports)
}

pub fn render_reports(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => reports.iter().map(render_report_tables).collect::<Vec<_>>().join("\n"),
        ReportFormat::Json => serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
        ReportFormat::Csv => {
            let mut out = String::new();
            for (i, r) in reports.iter().enumerate() {
                let csv = report_csv(r);
                // One header for the whole file.
                let body = if i == 0 { csv.as_str() } else { csv.split_once('\n').map_or("", |x| x.1) };
                out.push_str(body);
            }
            out
        }
    }
}

/// Bundled interaction for `scenario`/`task` run through the full pipeline
/// with actions enabled.
pub fn demo(scenario_name: &str, task: TaskId, backend: Arc<dyn Backend>) -> anyhow::Result<TurnTranscript> {
    let s = scenario(scenario_name)?;
    let f = demo_fixture(&s, task)?;
    let history = build_gaze_history(
        &f.trace.samples,
        &s.scene,
        f.utterance.turn_window,
        &SegmentationParams::default(),
    )?;
    let sp = compose(f.utterance, history)?;
    Ok(run_agent(s.scene, sp, backend, EvalCondition::FULL, true))
}

pub fn demo_summary(t: &TurnTranscript) -> String {
    let mut out = String::new();
    out.push_str(&render_prompt_text(&t.scanpath));
    out.push_str("\nTool calls:\n");
    for (i, e) in t.turn.exchanges.iter().enumerate() {
        let args = serde_json::to_string(&e.call.arguments).expect("arguments serialize");
        let status = if e.result.is_error { "rejected" } else { "ok" };
        let _ = writeln!(out, "  {}. {}({}) -> {}", i + 1, e.call.name, args, status);
    }
    for r in &t.turn.spoken {
        let _ = writeln!(out, "Robot to {}: {}", r.person_name, r.text);
    }
    let _ = writeln!(
        out,
        "Required objects: {}",
        t.turn.required_objects.as_ref().map_or("-".to_string(), |r| r.join(", "))
    );
    let _ = writeln!(out, "Status: {}", serde_json::to_value(t.turn.status).expect("status serializes").as_str().unwrap_or("?"));
    out
}

/// Writes scene.json, trace.jsonl and transcript.json for a bundled task.
pub fn fixtures(args: &FixturesArgs) -> anyhow::Result<Vec<PathBuf>> {
    let s = scenario(&args.scenario)?;
    let f = demo_fixture(&s, args.task)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let scene = args.out.join("scene.json");
    let trace = args.out.join("trace.jsonl");
    let transcript = args.out.join("transcript.json");
    save_scene(&scene, &s.scene, Some(s.viewer))?;
    save_trace(&trace, &f.trace)?;
    save_transcript(&transcript, &f.utterance)?;
    Ok(vec![scene, trace, transcript])
}

pub fn synth_records(args: &SynthArgs) -> anyhow::Result<Vec<PathBuf>> {
    let params = args.params.resolve()?;
    if args.users == 0 {
        return Err(usage("--users must be at least 1"));
    }
    let scenarios = SCENARIO_IDS.iter().map(|n| scenario(n)).collect::<anyhow::Result<Vec<_>>>()?;
    let refs: Vec<&Scenario> = scenarios.iter().collect();
    let options = SynthOptions {
        glance_prob: args.glance_prob,
        ..SynthOptions::default()
    };
    let grid = synthesize_grid(&refs, args.users, args.seed, &options, &params)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    Ok(save_turn_records(&args.out, &grid)?)
}

/// Builds every backend the server offers. Runs before the async runtime
/// starts: the remote backend owns a blocking HTTP client.
pub fn serve_config(args: &ServeArgs) -> anyhow::Result<gazeground_service::ServiceConfig> {
    let mut config = gazeground_service::ServiceConfig {
        params: args.params.resolve()?,
        condition: EvalCondition {
            scene_query_enabled: !args.no_scene_query,
        },
        actions_enabled: !args.no_actions,
        lookback_ms: args.lookback_ms,
        ..Default::default()
    };
    if !(args.lookback_ms >= 0.0 && args.lookback_ms.is_finite()) {
        return Err(usage("--lookback-ms must be a non-negative number"));
    }
    let default = args.backend.backend.name().to_string();
    if args.backend.backend != BackendKind::Heuristic {
        config.backends.insert(default.clone(), args.backend.build()?);
    }
    config.default_backend = default;
    Ok(config)
}

pub fn serve(args: &ServeArgs) -> anyhow::Result<()> {
    let config = serve_config(args)?;
    // Dropped after the runtime, outside any async context.
    let backends = config.backends.clone();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start the async runtime")?;
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("cannot bind {}", args.addr))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let state = gazeground_service::AppState::new(config);
        gazeground_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
            eprintln!("shutting down");
        })
        .await
        .context("server error")
    });
    drop(runtime);
    drop(backends);
    result
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract(a) => {
            let (history, timeline) = extract(&a)?;
            let json = history_to_string(&history);
            match &a.out {
                Some(p) => {
                    write_out(Some(p), &json)?;
                    print!("{timeline}");
                }
                None => {
                    print!("{json}");
                    if !json.ends_with('\n') {
                        println!();
                    }
                    eprint!("{timeline}");
                }
            }
        }
        Command::Scanpath(a) => {
            let sp = scanpath(&a)?;
            let text = render_scanpath(&sp, a.format);
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
        Command::AgentRun(a) => {
            let t = agent_run(&a)?;
            let json = serde_json::to_string_pretty(&t)? + "\n";
            write_out(a.out.as_deref(), &json)?;
        }
        Command::Eval(a) => {
            let reports = eval(&a)?;
            write_out(a.out.as_deref(), &render_reports(&reports, a.format))?;
        }
        Command::Serve(a) => serve(&a)?,
        Command::Demo(a) => {
            let backend = a.backend.build()?;
            let t = demo(&a.scenario, a.task, backend)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&t)?);
            } else {
                print!("{}", demo_summary(&t));
            }
        }
        Command::SynthRecords(a) => {
            for p in synth_records(&a)? {
                println!("{}", p.display());
            }
        }
        Command::Fixtures(a) => {
            for p in fixtures(&a)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
