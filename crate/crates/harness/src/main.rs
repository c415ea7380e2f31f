use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use servobench::batch::run_batch;
use servobench::service::{self, AppState};
use servobench::session::grasp_offset;
use servobench::settings::{Settings, ENV_PREFIX};
use servobench::{run_session, HarnessError};
use servobench_core::geometry::parse_kind_list;
use servobench_core::{MetricReport, ProbabilityMap};
use servobench_sim::{Scene, SimWorld};

#[derive(Parser)]
#[command(name = "servobench", version, about = "Language-prompted visual servoing bench")]
struct Cli {
    /// TOML settings file; `SERVOBENCH_*` variables and flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one servo attempt and print a summary.
    Run(RunArgs),
    /// Run every task in a manifest and report per-category success rates.
    Batch(BatchArgs),
    /// Score predicted probability maps against ground truth.
    EvalMask(EvalArgs),
    /// Serve the HTTP/telemetry API over one scene.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    prompt: String,
    /// Comma-separated kinds: p2p, p2l, l2l, par.
    #[arg(long, default_value = "p2p")]
    constraint: String,
    /// oracle | corrupt | remote:HOST:PORT
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the step trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV report path; a JSON report is written next to it.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction file or directory of PFM/PGM maps.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth file or directory, matched to predictions by file stem.
    #[arg(long)]
    gt: PathBuf,
    /// Print per-map rows as CSV before the summary.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    provider: Option<String>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

fn load_settings(config: Option<&Path>, flags: &[(&str, Option<String>)]) -> Result<Settings, CliError> {
    let env = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX));
    let mut s = Settings::load(config, env)?;
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v)?;
        }
    }
    s.validate()?;
    Ok(s)
}

fn load_world(scene: &Path) -> Result<SimWorld, CliError> {
    let scene = Scene::load(scene).map_err(HarnessError::from)?;
    Ok(SimWorld::new(scene).map_err(HarnessError::from)?)
}

fn run(config: Option<&Path>, a: RunArgs) -> Result<(), CliError> {
    let settings = load_settings(
        config,
        &[
            ("provider", a.provider),
            ("max_steps", a.max_steps.map(|v| v.to_string())),
            ("seed", a.seed.map(|v| v.to_string())),
        ],
    )?;
    let kinds = parse_kind_list(&a.constraint).map_err(|e| CliError::Usage(e.to_string()))?;
    if kinds.is_empty() {
        return Err(CliError::Usage("--constraint lists no kinds".into()));
    }
    let mut world = load_world(&a.scene)?;
    let provider = settings.provider_spec()?.build();
    let mut cfg = settings.session.clone();
    cfg.throttle = false;
    let report = run_session(&mut world, &a.prompt, &kinds, provider.as_ref(), &cfg, 1, &mut ());
    if let Some(path) = &a.trace {
        fs::write(path, report.trace.to_jsonl()).map_err(HarnessError::from)?;
    }
    let summary = json!({
        "outcome": report.outcome.label(),
        "detail": match &report.outcome {
            servobench::Outcome::PerceptionTimeout(m) | servobench::Outcome::Failed(m) => Some(m.clone()),
            _ => None,
        },
        "grasped": report.grasped,
        "steps": report.steps,
        "final_e_norm": report.final_e_norm,
        "grasp_offset_m": grasp_offset(&world, &a.prompt),
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn batch(config: Option<&Path>, a: BatchArgs) -> Result<(), CliError> {
    let settings = load_settings(
        config,
        &[
            ("provider", a.provider),
            ("max_steps", a.max_steps.map(|v| v.to_string())),
            ("seed", a.seed.map(|v| v.to_string())),
        ],
    )?;
    let mut cfg = settings.session.clone();
    cfg.throttle = false;
    let report = run_batch(&a.manifest, &settings.provider_spec()?, &cfg, |t| {
        eprintln!("{:<24} {:<10} attempts={} {}", t.task, t.category.as_str(), t.attempts_used, if t.success { "ok" } else { &t.outcome });
    })?;
    let csv = report.to_csv();
    fs::write(&a.out, &csv).map_err(HarnessError::from)?;
    fs::write(a.out.with_extension("json"), report.to_json()).map_err(HarnessError::from)?;
    print!("{csv}");
    Ok(())
}

fn is_map(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("pfm" | "pgm" | "PFM" | "PGM"))
}

fn maps_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(HarnessError::from)? {
        let p = entry.map_err(HarnessError::from)?.path();
        if p.is_file() && is_map(&p) {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), p.clone());
            }
        }
    }
    Ok(out)
}

fn load_map(p: &Path) -> Result<ProbabilityMap, CliError> {
    ProbabilityMap::load(p).map_err(|e| CliError::Input { path: p.into(), message: e.to_string() })
}

fn eval_mask(a: EvalArgs) -> Result<(), CliError> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = match (a.pred.is_dir(), a.gt.is_dir()) {
        (true, true) => {
            let gts = maps_by_stem(&a.gt)?;
            let mut pairs = Vec::new();
            for (stem, p) in maps_by_stem(&a.pred)? {
                match gts.get(&stem) {
                    Some(g) => pairs.push((stem, p, g.clone())),
                    None => eprintln!("warning: no ground truth for {stem}"),
                }
            }
            pairs
        }
        (false, false) => {
            let stem = a.pred.file_stem().and_then(|s| s.to_str()).unwrap_or("pred").to_string();
            vec![(stem, a.pred.clone(), a.gt.clone())]
        }
        _ => return Err(CliError::Usage("--pred and --gt must both be files or both be directories".into())),
    };
    let mut reports = Vec::with_capacity(pairs.len());
    if a.csv {
        println!("name,mae,s_measure,weighted_f,max_f");
    }
    for (name, p, g) in &pairs {
        let r = MetricReport::evaluate(&load_map(p)?, &load_map(g)?)
            .map_err(|e| CliError::Input { path: p.clone(), message: e.to_string() })?;
        if a.csv {
            println!("{name},{:.6},{:.6},{:.6},{:.6}", r.mae, r.s_measure, r.weighted_f, r.max_f);
        }
        reports.push(r);
    }
    let summary = json!({ "count": reports.len(), "mean": MetricReport::mean(&reports) });
    if a.csv {
        eprintln!("{}", serde_json::to_string(&summary).unwrap());
    } else {
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    }
    Ok(())
}

fn serve(config: Option<&Path>, a: ServeArgs) -> Result<(), CliError> {
    let settings = load_settings(config, &[("bind", a.bind), ("provider", a.provider)])?;
    let scene = Scene::load(&a.scene).map_err(HarnessError::from)?;
    let bind = settings.bind.clone();
    let app = AppState::new(scene, settings)?;
    let rt = tokio::runtime::Runtime::new().map_err(HarnessError::from)?;
    rt.block_on(async move {
        let (listener, addr) = service::bind(&bind).await?;
        eprintln!("listening on http://{addr}");
        service::serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
    .map_err(HarnessError::from)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Run(a) => run(config, a),
        Command::Batch(a) => batch(config, a),
        Command::EvalMask(a) => eval_mask(a),
        Command::Serve(a) => serve(config, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
