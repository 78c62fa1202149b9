//! `declutter`: generate scenes, run policies and benchmark them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use busboy_core::config::{time_model_fragment, Config, ConfigError, CONFIG_ENV};
use busboy_core::fit::{parse_reference_table, reference_table};
use busboy_core::harness::{
    fit_from_simulation, run_plan, scene_seed, summarize, trial_seed, write_outputs, HarnessError,
};
use busboy_core::metrics::{write_summary_csv, TrialReport};
use busboy_core::policy::{run_policy, PolicyKind, SimError};
use busboy_core::scene_io::{scene_file_name, scene_from_json, scene_to_json, SceneIoError};
use busboy_core::tableware::{Tier, TierConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "declutter",
    version,
    about = "Tableware decluttering simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated scenes as JSON files.
    Generate {
        #[arg(long)]
        tier: Tier,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
    },
    /// Run one policy on one scene file and print its report.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        /// Where to write the JSONL action trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-action failure probability; defaults to the config's plan.
        #[arg(long)]
        p_fail: Option<f64>,
    },
    /// Execute an experiment plan and write summaries and per-trial reports.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the time model to reference timings and write a config fragment.
    FitTime {
        /// CSV with columns tier,policy,time_s,opt,failures; defaults to the
        /// bundled reference table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Scenes simulated per tier to estimate action counts.
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Schema(String),
    Infeasible(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Schema(_) => 3,
            Failure::Infeasible(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Schema(m) | Failure::Infeasible(m) => f.write_str(m),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Other(e.into()),
            ConfigError::Parse { .. } => Failure::Schema(e.to_string()),
            ConfigError::Invalid(_) => Failure::Usage(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Plan(_) => Failure::Usage(e.to_string()),
            _ => Failure::Other(e.into()),
        }
    }
}

fn load_config(explicit: Option<&Path>) -> Result<Config, Failure> {
    let (cfg, _) = Config::resolve(explicit)?;
    Ok(cfg)
}

fn generate(tier: Tier, count: usize, seed: u64, out: &Path, cfg: &Config) -> Result<(), Failure> {
    if tier == Tier::Custom {
        return Err(Failure::Usage("generate needs a standard tier".into()));
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let generator = cfg.generator();
    for k in 0..count {
        let scene = generator
            .generate(&TierConfig::standard(tier), scene_seed(seed, tier, k))
            .map_err(|e| Failure::Other(e.into()))?;
        let path = out.join(scene_file_name(tier, seed, k));
        fs::write(&path, scene_to_json(&scene))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(
    scene: &Path,
    policy: PolicyKind,
    cfg: &Config,
    trace_out: Option<&Path>,
    p_fail: f64,
) -> Result<(), Failure> {
    let text = fs::read_to_string(scene).with_context(|| format!("reading {}", scene.display()))?;
    let state = scene_from_json(&text, &cfg.dishes).map_err(|e| match e {
        SceneIoError::Schema(_) | SceneIoError::Invalid(_) => {
            Failure::Schema(format!("{}: {e}", scene.display()))
        }
    })?;
    let seed = trial_seed(state.seed, policy);
    let trace = run_policy(
        &state,
        &cfg.policy_config(policy),
        &cfg.model(),
        seed,
        p_fail,
    )
    .map_err(|e| match e {
        SimError::BadFailureRate(_) => Failure::Usage(e.to_string()),
        _ => Failure::Infeasible(format!("{}: {e}", scene.display())),
    })?;
    if let Some(path) = trace_out {
        fs::write(path, trace.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    let name = scene
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = TrialReport::new(name, state.tier, policy, seed, &trace, &cfg.time_model)
        .map_err(|e| Failure::Other(e.into()))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).context("encoding report")?
    );
    Ok(())
}

fn bench(plan: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = Config::load(plan)?;
    let outcome = run_plan(&cfg)?;
    for f in &outcome.failures {
        let policy = f.policy.map_or("-", PolicyKind::as_str);
        eprintln!("trial failed: {} {} {policy}: {}", f.tier, f.scene, f.error);
    }
    for path in write_outputs(&outcome, &cfg, out)? {
        eprintln!("wrote {}", path.display());
    }
    let rows = summarize(&outcome, &cfg.plan, &cfg, cfg.time_model.bin_delay)
        .map_err(|e| Failure::Other(e.into()))?;
    write_summary_csv(&rows, std::io::stdout()).context("printing summary")?;
    Ok(())
}

fn fit_time(table: Option<&Path>, out: &Path, scenes: usize, cfg: &Config) -> Result<(), Failure> {
    let reference = match table {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_reference_table(&text)
                .map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?
        }
        None => reference_table(),
    };
    if scenes == 0 {
        return Err(Failure::Usage("--scenes must be at least 1".into()));
    }
    let report = fit_from_simulation(cfg, &reference, scenes)?;
    for r in &report.rows {
        println!(
            "{:<12} {:<7} observed {:>7.1} s  modeled {:>7.1} s",
            r.tier.as_str(),
            r.policy.as_str(),
            r.observed_s,
            r.predicted_s
        );
    }
    println!("relative rms residual {:.2}%", 100.0 * report.relative_rms);
    let fragment = format!(
        "# relative rms residual {:.4}\n{}",
        report.relative_rms,
        time_model_fragment(&report.model)
    );
    fs::write(out, fragment).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            tier,
            count,
            seed,
            out,
            config,
        } => generate(tier, count, seed, &out, &load_config(config.as_deref())?),
        Command::Run {
            scene,
            policy,
            config,
            trace,
            p_fail,
        } => {
            let cfg = load_config(config.as_deref())?;
            let p = p_fail.unwrap_or(cfg.plan.p_fail);
            run(&scene, policy, &cfg, trace.as_deref(), p)
        }
        Command::Bench { plan, out } => bench(&plan, &out),
        Command::FitTime {
            table,
            out,
            scenes,
            config,
        } => fit_time(
            table.as_deref(),
            &out,
            scenes,
            &load_config(config.as_deref())?,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
