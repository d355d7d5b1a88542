//! `cura`: command-line driver for encoder pretraining, training,
//! evaluation, trajectory dumps and result tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cura_core::env::{KeyValues, Scenario};
use cura_core::experiment::{
    dump_trajectory, load_policy, replay_deviation, run_eval, run_pretrain, run_training, EncoderSource, EvalSettings,
    PretrainSetup, RunConfig, SummaryTable, Variant,
};
use cura_core::experiment::eval::EVAL_REPORT_FILE;
use cura_core::{CuraError, Result};

#[derive(Parser, Debug)]
#[command(name = "cura", version, about = "Occluded-LiDAR pushing: encoder pretraining, training, evaluation and reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pretrain the map encoder (VAE) on confidence-map windows from scripted pushes.
    PretrainEncoder(PretrainArgs),
    /// Train one variant with one seed.
    Train(TrainArgs),
    /// Evaluate a trained run on the scenario × object-size grid.
    Eval(EvalArgs),
    /// Dump one episode: per-step trace, confidence maps and collision quantiles.
    Dump(DumpArgs),
    /// Aggregate eval reports into a variant × condition success table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Key = value config file layered over the defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0, value_name = "N")]
    jobs: usize,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    /// Number of scripted episodes to collect map windows from.
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    /// Root seed for data collection and VAE initialisation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Variant to train (one of: push_no_occlusion, push_with_occlusion, cura_ppo, baseline_conf,
    /// cura_no_uncertainty, cura_no_risk, push_base, cura_base).
    #[arg(long)]
    variant: Variant,
    /// Root training seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training scenario: uniform, adversarial or mixed (default: mixed, or the config's value).
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Object edge length used in training (overrides the config).
    #[arg(long, value_name = "SIZE")]
    object_size: Option<f64>,
    /// Encoder: a pretrained encoder.ckpt or `average_pool` (overrides the config).
    #[arg(long, value_name = "PATH|average_pool")]
    encoder: Option<EncoderSource>,
    /// Number of PPO iterations (overrides the config).
    #[arg(long)]
    iterations: Option<usize>,
    /// Continue from the newest checkpoint in --out.
    #[arg(long)]
    resume: bool,
    /// Suppress per-iteration progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Trained run directory (as written by `train`).
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Checkpoint directory to evaluate (default: newest in the run).
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Check that the run was trained as this variant.
    #[arg(long)]
    variant: Option<Variant>,
    /// Restrict to one scenario (default: uniform and adversarial).
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Restrict to one object size (default: 0.5, 0.75 and 1.0).
    #[arg(long, value_name = "SIZE")]
    object_size: Option<f64>,
    /// Episodes per (scenario, size) cell.
    #[arg(long, default_value_t = 300)]
    episodes: usize,
    /// Evaluation seed; the same seed gives every policy identical episodes.
    #[arg(long, default_value_t = 1000)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    /// Trained run directory.
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Checkpoint directory (default: newest in the run).
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Check that the run was trained as this variant.
    #[arg(long)]
    variant: Option<Variant>,
    /// Episode scenario.
    #[arg(long, default_value = "adversarial")]
    scenario: Scenario,
    /// Object edge length.
    #[arg(long, default_value_t = 1.0, value_name = "SIZE")]
    object_size: f64,
    /// Episode seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive episodes (seeds seed, seed+1, ...); each goes to its own subdirectory when > 1.
    #[arg(long, default_value_t = 1)]
    episodes: usize,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// eval_report.csv files, or directories searched recursively for them.
    #[arg(required = true, value_name = "PATH")]
    inputs: Vec<PathBuf>,
    /// Output directory for summary.txt and summary.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        Some(p) => KeyValues::load(p),
        None => Ok(KeyValues::default()),
    }
}

fn set_jobs(jobs: usize) -> Result<()> {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CuraError::config("jobs", e.to_string()))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CuraError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CuraError::io(path, e))
}

fn check_variant(expected: Option<Variant>, found: Variant) -> Result<()> {
    match expected {
        Some(v) if v != found => Err(CuraError::config(
            "variant",
            format!("run was trained as {found}, not {v}"),
        )),
        _ => Ok(()),
    }
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    set_jobs(a.common.jobs)?;
    let kv = load_config(a.common.config.as_deref())?;
    let setup = PretrainSetup::resolve(&kv, a.episodes, a.seed)?;
    let r = run_pretrain(&setup, &kv, &a.common.out)?;
    println!(
        "encoder={} train_windows={} holdout_windows={} holdout_mse={:.6} mean_image_mse={:.6}",
        a.common.out.join("encoder.ckpt").display(),
        r.train_windows,
        r.holdout_windows,
        r.holdout_mse,
        r.mean_image_mse
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    set_jobs(a.common.jobs)?;
    let mut kv = load_config(a.common.config.as_deref())?;
    if let Some(s) = a.scenario {
        kv.insert("scenario", s);
    }
    if let Some(z) = a.object_size {
        kv.insert("object_size", z);
    }
    if let Some(e) = &a.encoder {
        kv.insert("encoder", e);
    }
    if let Some(n) = a.iterations {
        kv.insert("iterations", n);
    }
    let cfg = RunConfig::resolve(a.variant, &kv, a.seed)?;
    let quiet = a.quiet;
    let stats = run_training(&cfg, &a.common.out, a.resume, |s| {
        if !quiet {
            println!(
                "iter={} episodes={} reward={:.4} success={:.3} collision={:.3} risk={:.4} uncertainty={:.4}",
                s.iteration, s.episodes, s.mean_reward, s.success_rate, s.collision_rate, s.mean_risk, s.mean_uncertainty
            );
        }
    })?;
    println!("done variant={} seed={} iterations_run={} out={}", cfg.variant, a.seed, stats.len(), a.common.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut policy = load_policy(&a.run, a.checkpoint.as_deref())?;
    check_variant(a.variant, policy.run.variant)?;
    let kv = load_config(a.common.config.as_deref())?;
    policy.run.setup.episode.apply(&kv)?;
    let jobs = if a.common.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        a.common.jobs
    };
    let defaults = EvalSettings::default();
    let settings = EvalSettings {
        scenarios: a.scenario.map_or(defaults.scenarios, |s| vec![s]),
        sizes: a.object_size.map_or(defaults.sizes, |z| vec![z]),
        episodes: a.episodes,
        eval_seed: a.seed,
        jobs,
    };
    let report = run_eval(&policy, &settings)?;
    report.write(&a.common.out)?;
    for c in &report.cells {
        println!(
            "variant={} scenario={} object_size={} success={:.3} collision={:.3} timeout={:.3}",
            c.variant, c.scenario, c.object_size, c.success_rate, c.collision_rate, c.timeout_rate
        );
    }
    Ok(())
}

fn dump(a: DumpArgs) -> Result<()> {
    set_jobs(a.common.jobs)?;
    let mut policy = load_policy(&a.run, a.checkpoint.as_deref())?;
    check_variant(a.variant, policy.run.variant)?;
    let kv = load_config(a.common.config.as_deref())?;
    policy.run.setup.episode.apply(&kv)?;
    let mut cfg = policy.run.setup.episode.clone();
    cfg.scenario = a.scenario;
    cfg.object_size = a.object_size;
    cfg.validate()?;
    for k in 0..a.episodes.max(1) {
        let seed = a.seed + k as u64;
        let dir = if a.episodes > 1 {
            a.common.out.join(format!("episode_{seed}"))
        } else {
            a.common.out.clone()
        };
        let s = dump_trajectory(&policy, &cfg, seed, &dir)?;
        let dev = replay_deviation(&dir, cfg.dt, &cfg.limits())?;
        println!(
            "dir={} seed={} steps={} success={} collision={} timeout={} replay_max_dev={:e}",
            dir.display(),
            seed,
            s.steps,
            s.success,
            s.collision,
            s.timeout,
            dev
        );
    }
    Ok(())
}

fn collect_reports(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if p.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
            .map_err(|e| CuraError::io(p, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for e in entries {
            if e.is_dir() {
                collect_reports(&e, out)?;
            } else if e.file_name().is_some_and(|n| n == EVAL_REPORT_FILE) {
                out.push(e);
            }
        }
        Ok(())
    } else if p.exists() {
        out.push(p.to_path_buf());
        Ok(())
    } else {
        Err(CuraError::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let mut files = Vec::new();
    for p in &a.inputs {
        collect_reports(p, &mut files)?;
    }
    if files.is_empty() {
        return Err(CuraError::EmptyInput("no eval_report.csv found under the given paths"));
    }
    let table = SummaryTable::from_files(&files)?;
    let text = table.to_text();
    write_file(&a.out.join("summary.txt"), &text)?;
    write_file(&a.out.join("summary.csv"), &table.to_csv())?;
    print!("{text}");
    Ok(())
}

/// One-line, machine-parsable error: `error kind=<kind> msg="<message>"`.
fn error_line(kind: &str, msg: &str) -> String {
    let flat = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("error kind={kind} msg=\"{}\"", flat.replace('\\', "\\\\").replace('"', "\\\""))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
            }
            let detail = e.to_string();
            let body = detail.split("\n\nUsage").next().unwrap_or("").trim_start_matches("error: ");
            let msg = if body.trim().is_empty() { e.kind().to_string() } else { body.to_string() };
            eprintln!("{}", error_line("usage", &msg));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::PretrainEncoder(a) => pretrain(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Dump(a) => dump(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let t = s.to_string();
                if !msg.contains(&t) {
                    msg.push_str(": ");
                    msg.push_str(&t);
                }
                src = s.source();
            }
            eprintln!("{}", error_line(e.kind(), &msg));
            ExitCode::from(1)
        }
    }
}
