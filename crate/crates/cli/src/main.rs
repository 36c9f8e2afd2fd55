use std::collections::HashMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sts_core::catalog::{load_catalog, validate_catalog};
use sts_core::jsonl::{parse_jsonl, write_jsonl, JsonlError};
use sts_core::questgen::{generate_questions, render_prompt, BenchmarkDoc, PromptFamily, PromptTemplates};
use sts_core::sampler::{score_all, subsample, SamplingConfig};
use sts_core::scorer::{bias_report, format_table, score, AnswerLine};
use sts_core::synth::{synth_kinds, synth_scene, synth_suite};
use sts_core::verifier::{MergePolicy, Store, StoreError};
use sts_core::{default_catalog, mine_scene, parse_scene, serialize_scene, Catalog, MinerConfig, ScenarioInstance, Scene};

const EXIT_INVALID: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "sts", version, about = "Mine driving scenarios and turn them into a multiple-choice benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check scene files and optionally a catalog.
    Validate(ValidateArgs),
    /// Detect catalog scenarios in every scene of a directory.
    Mine(MineArgs),
    /// Cap each scenario type with spatially balanced sub-sampling.
    Sample(SampleArgs),
    /// Run the review service.
    Serve(ServeArgs),
    /// Merge stored reviews into the verified scenario set.
    Merge(MergeArgs),
    /// Build the multiple-choice benchmark from verified scenarios.
    Questgen(QuestgenArgs),
    /// Score model answers against a benchmark.
    Score(ScoreArgs),
    /// Write synthetic scenes with known labels.
    Synth(SynthArgs),
    /// Review timing and agreement figures from the store.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scene files or directories of `.scene.json` files.
    paths: Vec<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// MinerConfig JSON; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "mined.scenarios.jsonl")]
    out: PathBuf,
    /// Worker threads; 0 means one per logical core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Scenes used for occlusion and distance; instances of missing scenes
    /// fall back to their stored metrics.
    #[arg(long)]
    scenes: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "sampled.scenarios.jsonl")]
    out: PathBuf,
    /// Per-type kept/dropped counts as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct DbArgs {
    /// Store log file.
    #[arg(long, env = "STS_DB_PATH", default_value = "sts-store.jsonl")]
    db: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Scenario database to ingest before serving.
    #[arg(long)]
    ingest: Option<PathBuf>,
    /// Scene directory for the excerpts shown to reviewers.
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Show every reviewer's verdicts instead of only the caller's.
    #[arg(long)]
    unblind: bool,
}

#[derive(Args)]
struct MergeArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long, default_value_t = 3)]
    quorum: usize,
    #[arg(long, default_value = "verified.scenarios.jsonl")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct QuestgenArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "scenes")]
    scenes: PathBuf,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    options: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "benchmark.json")]
    out: PathBuf,
    /// Also render prompts for this model family.
    #[arg(long, requires = "prompts")]
    family: Option<String>,
    /// Where rendered prompts go, one JSON line per question.
    #[arg(long, requires = "family")]
    prompts: Option<PathBuf>,
    /// Directory overriding the built-in `<family>.txt` templates.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    answers: PathBuf,
    #[arg(long, default_value = "model")]
    model: String,
    /// Full JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add the letter-bias test.
    #[arg(long)]
    bias: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, conflicts_with_all = ["suite", "list"])]
    kind: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write every kind into the `--out` directory, plus labels.jsonl.
    #[arg(long)]
    suite: bool,
    #[arg(long)]
    list: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(e) => Failure::Io(e.to_string()),
            e => Failure::Invalid(e.to_string()),
        }
    }
}

/// Counts for the summary line.
#[derive(Default)]
struct Counts {
    input: usize,
    output: usize,
}

type Outcome = Result<Counts, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), Failure> {
    let f = fs::File::create(path).map_err(|e| Failure::io(path, e))?;
    write_jsonl(BufWriter::new(f), items).map_err(|e| Failure::io(path, e))
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    parse_jsonl(&read(path)?).map_err(|e| match e {
        JsonlError::Io(e) => Failure::io(path, e),
        e => Failure::Invalid(format!("{}: {e}", path.display())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn catalog(path: Option<&Path>) -> Result<Catalog, Failure> {
    let Some(path) = path else { return Ok(default_catalog()) };
    // version is the file name without `.json`
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("catalog");
    let version = name.strip_suffix(".json").unwrap_or(name);
    load_catalog(&read(path)?, version).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn scene_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".scene.json")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_scene(path: &Path) -> Result<Scene, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    parse_scene(&bytes).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_scene_dir(dir: &Path) -> Result<HashMap<String, Scene>, Failure> {
    let scenes: Vec<Scene> = scene_files(dir)?.par_iter().map(|p| load_scene(p)).collect::<Result<_, _>>()?;
    Ok(scenes.into_iter().map(|s| (s.scene_id.clone(), s)).collect())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Failure::Io(e.to_string()))
}

fn print_report<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) {
    let out = match format {
        Format::Json => serde_json::to_string_pretty(value).expect("report serializes") + "\n",
        Format::Text => text(),
    };
    let _ = io::stdout().write_all(out.as_bytes());
}

fn validate(a: ValidateArgs) -> Outcome {
    let mut files = Vec::new();
    for p in &a.paths {
        if p.is_dir() {
            files.extend(scene_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    let mut report = Vec::new();
    let mut bad = 0;
    for f in &files {
        let bytes = fs::read(f).map_err(|e| Failure::io(f, e))?;
        let errors: Vec<String> = match parse_scene(&bytes) {
            Ok(_) => vec![],
            Err(sts_core::scene::SceneError::Validation(v)) => v.iter().map(|v| v.to_string()).collect(),
            Err(e) => vec![e.to_string()],
        };
        bad += !errors.is_empty() as usize;
        report.push(json!({"file": f, "errors": errors}));
    }
    let mut catalog_errors = Vec::new();
    if let Some(c) = &a.catalog {
        // parse only, so that every cardinality violation gets listed
        match sts_core::catalog::parse_catalog(&read(c)?, "check") {
            Ok(cat) => catalog_errors.extend(validate_catalog(&cat).iter().map(|v| format!("{v:?}"))),
            Err(e) => catalog_errors.push(e.to_string()),
        }
    }
    let doc = json!({"scenes": report, "catalog_errors": catalog_errors});
    print_report(a.format, &doc, || {
        let mut s = String::new();
        for r in &report {
            let errs = r["errors"].as_array().unwrap();
            if errs.is_empty() {
                s.push_str(&format!("ok    {}\n", r["file"].as_str().unwrap_or_default()));
            }
            for e in errs {
                s.push_str(&format!("FAIL  {}: {}\n", r["file"].as_str().unwrap_or_default(), e.as_str().unwrap_or_default()));
            }
        }
        for e in &catalog_errors {
            s.push_str(&format!("FAIL  catalog: {e}\n"));
        }
        s
    });
    if bad > 0 || !catalog_errors.is_empty() {
        return Err(Failure::Invalid(format!("{bad} of {} scenes invalid, {} catalog errors", files.len(), catalog_errors.len())));
    }
    Ok(Counts { input: files.len(), output: files.len() })
}

fn mine(a: MineArgs) -> Outcome {
    let cat = catalog(a.catalog.as_deref())?;
    let cfg: MinerConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => MinerConfig::default(),
    };
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Failure::Invalid(format!("miner config: {}", problems.join("; "))));
    }
    let files = scene_files(&a.scenes)?;
    let pool = thread_pool(a.jobs)?;
    let per_scene: Vec<Vec<ScenarioInstance>> = pool.install(|| {
        files.par_iter().map(|f| load_scene(f).map(|s| mine_scene(&s, &cat, &cfg))).collect::<Result<_, _>>()
    })?;
    let all: Vec<ScenarioInstance> = per_scene.into_iter().flatten().collect();
    write_lines(&a.out, &all)?;
    info!("mined {} instances from {} scenes", all.len(), files.len());
    Ok(Counts { input: files.len(), output: all.len() })
}

fn sample(a: SampleArgs) -> Outcome {
    let cfg: SamplingConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SamplingConfig::default(),
    };
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Failure::Invalid(format!("sampling config: {}", problems.join("; "))));
    }
    let instances: Vec<ScenarioInstance> = read_lines(&a.input)?;
    let pool = thread_pool(a.jobs)?;
    let scenes = match &a.scenes {
        Some(d) => pool.install(|| load_scene_dir(d))?,
        None => HashMap::new(),
    };
    let scores = score_all(&instances, &scenes, &cfg);
    let out = subsample(&instances, &scores, &cfg);
    write_lines(&a.out, &out.kept)?;
    if let Some(p) = &a.report {
        write_file(p, (serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n").as_bytes())?;
    }
    print_report(a.format, &out.report, || {
        let mut s = format!("{:<32} {:>6} {:>7}\n", "type", "kept", "dropped");
        for (t, c) in &out.report {
            s.push_str(&format!("{t:<32} {:>6} {:>7}\n", c.kept, c.dropped));
        }
        s
    });
    Ok(Counts { input: instances.len(), output: out.kept.len() })
}

fn serve(a: ServeArgs) -> Outcome {
    let mut store = Store::open(&a.db.db)?;
    if let Some(p) = &a.ingest {
        let n = store.ingest_jsonl(&read(p)?)?;
        info!("ingested {n} new instances from {}", p.display());
    }
    let scenes = match &a.scenes {
        Some(d) => load_scene_dir(d)?,
        None => HashMap::new(),
    };
    let n = store.instances().count();
    let state = sts_server::AppState::new(store, scenes, a.unblind);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    rt.block_on(sts_server::serve(a.listen, state)).map_err(|e| Failure::Io(format!("{}: {e}", a.listen)))?;
    Ok(Counts { input: n, output: n })
}

fn merge(a: MergeArgs) -> Outcome {
    let mut store = Store::open(&a.db.db)?;
    let policy = MergePolicy { quorum: a.quorum, ..MergePolicy::default() };
    let out = store.merge(&policy)?;
    write_lines(&a.out, &out.verified)?;
    let summary = json!({
        "verified": out.verified.len(),
        "rejected": out.rejected.len(),
        "under_quorum": out.under_quorum.len(),
        "unusable": out.unusable.len(),
        "agreement": out.stats,
    });
    print_report(a.format, &summary, || {
        format!(
            "verified {}  rejected {}  under quorum {}  unusable {}\npositive agreement {:.1}% ({} of {})  negative disagreement {:.1}%\n",
            out.verified.len(),
            out.rejected.len(),
            out.under_quorum.len(),
            out.unusable.len(),
            out.stats.positive_agreement * 100.0,
            out.stats.positive_agreements,
            out.stats.n_merged,
            out.stats.negative_disagreement * 100.0,
        )
    });
    Ok(Counts { input: store.instances().count(), output: out.verified.len() })
}

fn questgen(a: QuestgenArgs) -> Outcome {
    let cat = catalog(a.catalog.as_deref())?;
    let family: Option<PromptFamily> =
        a.family.as_deref().map(str::parse).transpose().map_err(|e: sts_core::questgen::QuestgenError| Failure::Invalid(e.to_string()))?;
    let instances: Vec<ScenarioInstance> = read_lines(&a.input)?;
    let scenes = load_scene_dir(&a.scenes)?;
    let doc = generate_questions(&instances, &scenes, &cat, a.options, a.seed).map_err(|e| Failure::Invalid(e.to_string()))?;
    write_file(&a.out, doc.to_json().as_bytes())?;
    if !doc.skipped.is_empty() {
        warn!("{} instances skipped", doc.skipped.len());
    }
    if let (Some(fam), Some(path)) = (family, &a.prompts) {
        let templates = match &a.templates {
            Some(d) => PromptTemplates::load_dir(d).map_err(|e| Failure::io(d, e))?,
            None => PromptTemplates::default(),
        };
        let mut lines = Vec::with_capacity(doc.questions.len());
        for q in &doc.questions {
            match render_prompt(q, fam, &templates) {
                Ok(p) => lines.push(json!({"question_id": q.question_id, "family": fam.as_str(), "prompt": p})),
                Err(e) => warn!("{}: {e}", q.question_id),
            }
        }
        write_lines(path, &lines)?;
    }
    Ok(Counts { input: instances.len(), output: doc.questions.len() })
}

fn score_cmd(a: ScoreArgs) -> Outcome {
    let doc: BenchmarkDoc = read_json(&a.benchmark)?;
    let answers: Vec<AnswerLine> = read_lines(&a.answers)?;
    let report = score(&doc, &answers).map_err(|e| Failure::Invalid(e.to_string()))?;
    let bias = if a.bias { Some(bias_report(&doc, &answers).map_err(|e| Failure::Invalid(e.to_string()))?) } else { None };
    if let Some(p) = &a.out {
        let full = json!({"model": a.model, "report": report, "bias": bias});
        write_file(p, (serde_json::to_string_pretty(&full).expect("report serializes") + "\n").as_bytes())?;
    }
    let mut brief = serde_json::to_value(&report).expect("report serializes");
    brief.as_object_mut().map(|o| o.remove("answers"));
    let brief = json!({"model": a.model, "report": brief, "bias": bias});
    print_report(a.format, &brief, || {
        let mut s = format_table(&report, &a.model);
        s.push_str(&format!("questions {}  micro {:.2}  unparsable {}\n", report.questions, report.overall_micro * 100.0, report.unparsable));
        if let Some(b) = &bias {
            s.push_str(&format!("letter bias: chi2 {:.2}, dof {}, p {:.4}\n", b.chi_square, b.dof, b.p_value));
        }
        s
    });
    Ok(Counts { input: answers.len(), output: report.questions })
}

fn synth(a: SynthArgs) -> Outcome {
    if a.list {
        for k in synth_kinds() {
            println!("{k}");
        }
        return Ok(Counts::default());
    }
    let Some(out) = a.out else {
        return Err(Failure::Invalid("--out is required".into()));
    };
    if a.suite {
        let suite = synth_suite(a.seed);
        fs::create_dir_all(&out).map_err(|e| Failure::io(&out, e))?;
        let mut labels = Vec::new();
        for case in &suite {
            write_file(&out.join(format!("{}.scene.json", case.scene.scene_id)), &serialize_scene(&case.scene))?;
            labels.push(json!({"scene_id": case.scene.scene_id, "kind": case.kind, "labels": case.labels, "near_misses": case.near_misses}));
        }
        write_lines(&out.join("labels.jsonl"), &labels)?;
        return Ok(Counts { input: 0, output: suite.len() });
    }
    let Some(kind) = a.kind else {
        return Err(Failure::Invalid("one of --kind, --suite or --list is required".into()));
    };
    let case = synth_scene(&kind, a.seed).map_err(|e| Failure::Invalid(e.to_string()))?;
    write_file(&out, &serialize_scene(&case.scene))?;
    Ok(Counts { input: 0, output: 1 })
}

fn stats(a: StatsArgs) -> Outcome {
    let store = Store::open(&a.db.db)?;
    let r = store.stats();
    print_report(a.format, &r, || {
        let mut s = format!("{:<16} {:>7} {:>8} {:>8} {:>7}\n", "reviewer", "reviews", "mean s", "median s", "hours");
        for x in &r.reviewers {
            s.push_str(&format!("{:<16} {:>7} {:>8.1} {:>8.1} {:>7.2}\n", x.reviewer, x.reviews, x.mean_s, x.median_s, x.total_hours));
        }
        s.push_str(&format!(
            "instances {}  reviews {}  total hours {:.2}  seconds per sample {:.1}  positive agreement {:.1}%\n",
            r.instances,
            r.reviews,
            r.total_hours,
            r.seconds_per_sample,
            r.agreement.positive_agreement * 100.0
        ));
        s
    });
    Ok(Counts { input: r.instances, output: r.reviews })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let name = match &cli.command {
        Command::Validate(_) => "validate",
        Command::Mine(_) => "mine",
        Command::Sample(_) => "sample",
        Command::Serve(_) => "serve",
        Command::Merge(_) => "merge",
        Command::Questgen(_) => "questgen",
        Command::Score(_) => "score",
        Command::Synth(_) => "synth",
        Command::Stats(_) => "stats",
    };
    let t = Instant::now();
    let res = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Mine(a) => mine(a),
        Command::Sample(a) => sample(a),
        Command::Serve(a) => serve(a),
        Command::Merge(a) => merge(a),
        Command::Questgen(a) => questgen(a),
        Command::Score(a) => score_cmd(a),
        Command::Synth(a) => synth(a),
        Command::Stats(a) => stats(a),
    };
    let ms = t.elapsed().as_secs_f64() * 1e3;
    let (code, summary) = match &res {
        Ok(c) => (0, json!({"command": name, "status": "ok", "in": c.input, "out": c.output, "duration_ms": ms})),
        Err(Failure::Invalid(m)) => (EXIT_INVALID, json!({"command": name, "status": "invalid", "error": m, "duration_ms": ms})),
        Err(Failure::Io(m)) => (EXIT_IO, json!({"command": name, "status": "io_error", "error": m, "duration_ms": ms})),
    };
    eprintln!("{summary}");
    ExitCode::from(code)
}
