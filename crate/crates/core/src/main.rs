use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cclab::agent::{evaluate, train, PolicyArtifact, TaskSource};
use cclab::config::RunConfig;
use cclab::experiments::{self, Experiment};
use cclab::oracle::max_ev_monte_carlo;
use cclab::{rng_for, Environment, Stream};

/// Contextual gamble choice lab: train, evaluate, replicate, bound.
///
/// Any config key can be overridden with a dotted flag, e.g.
/// `--env.p_error 0.2` or `--agent.n_train_samples=100000`.
#[derive(Parser)]
#[command(name = "cclab", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults are used for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for single-run commands (train, evaluate, oracle).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Seeds for experiments: `1,2,3` or `1-10`.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Output directory (default: $CCLAB_OUT_DIR, then ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Reduced training budget.
    #[arg(long, global = true)]
    fast: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy; writes policy.json and learning_curve.csv.
    Train,
    /// Evaluate a saved policy on random tasks; writes metrics.csv.
    Evaluate {
        /// Policy artifact (default: <out>/policy.json).
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Run one experiment: noise_sweep, context, wedell, effect_size, actions.
    Experiment { name: String },
    /// Monte-Carlo estimate of the best achievable mean EV.
    Oracle {
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
    },
}

/// Pulls `--a.b value` / `--a.b=value` pairs out of argv; clap sees the rest.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key = match arg.strip_prefix("--") {
            Some(k) if k.split('=').next().is_some_and(|k| k.contains('.')) => k.to_string(),
            _ => {
                rest.push(arg);
                continue;
            }
        };
        match key.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => match it.next() {
                Some(v) => overrides.push((key, v)),
                None => bail!("--{key} needs a value"),
            },
        }
    }
    Ok((rest, overrides))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    Ok(seeds)
}

fn resolve(common: &Common, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.fast {
        cfg = cfg.fast();
    }
    for (k, v) in overrides {
        cfg = cfg.with_override(k, v)?;
    }
    // Dedicated flags win over both the file and dotted overrides.
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &common.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn environment(cfg: &RunConfig) -> Result<Environment> {
    Ok(Environment::new(cfg.env.observation(), cfg.env.reward(), cfg.env.episode())?)
}

fn write_sidecar(cfg: &RunConfig, dir: &Path, stem: &str) -> Result<()> {
    let path = dir.join(format!("{stem}.config.toml"));
    fs::write(&path, cfg.to_sidecar()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let env = environment(cfg)?;
    let tasks = TaskSource::Random(cfg.tasks.distribution().sampler()?);
    let kind = cfg.agent.agent_kind;
    let out = train(
        &tasks,
        kind,
        &env,
        &cfg.agent.learner(),
        &cfg.agent.discretizer(),
        &mut rng_for(cfg.seed, Stream::Training),
    )?;
    let fingerprint = cfg.fingerprint();

    let policy_path = dir.join("policy.json");
    let file = File::create(&policy_path).with_context(|| format!("creating {}", policy_path.display()))?;
    PolicyArtifact::from_policy(&out.policy, kind, &fingerprint).write(BufWriter::new(file))?;

    let curve_path = dir.join("learning_curve.csv");
    let mut w = BufWriter::new(File::create(&curve_path)?);
    writeln!(w, "agent,seed,steps,episodes,mean_return")?;
    for p in &out.curve {
        writeln!(w, "{kind},{},{},{},{:.6}", cfg.seed, p.steps, p.episodes, p.mean_return)?;
    }
    writeln!(w, "# config_fingerprint={fingerprint}")?;
    w.flush()?;
    write_sidecar(cfg, &dir, "train")?;
    eprintln!("{} states -> {}", out.policy.len(), policy_path.display());
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, policy: Option<PathBuf>) -> Result<()> {
    let dir = cfg.output_dir();
    let path = policy.unwrap_or_else(|| dir.join("policy.json"));
    let file = File::open(&path).with_context(|| format!("opening policy {}", path.display()))?;
    let artifact = PolicyArtifact::read(BufReader::new(file))?;
    let kind = artifact.agent_kind;
    let policy_fingerprint = artifact.config_fingerprint.clone();
    let policy = artifact.into_policy()?;

    let env = environment(cfg)?;
    let tasks = TaskSource::Random(cfg.tasks.distribution().sampler()?);
    let m = evaluate(&policy, &tasks, cfg.agent.eval_episodes, &env, kind, &mut rng_for(cfg.seed, Stream::Evaluation))?;

    fs::create_dir_all(&dir)?;
    let out = dir.join("metrics.csv");
    let mut w = BufWriter::new(File::create(&out)?);
    writeln!(w, "agent,seed,episodes,mean_chosen_ev,accuracy,mean_return,mean_comparisons,mean_calculations")?;
    writeln!(
        w,
        "{kind},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
        cfg.seed, m.episodes, m.mean_chosen_ev, m.accuracy, m.mean_return, m.mean_comparisons, m.mean_calculations
    )?;
    writeln!(w, "# config_fingerprint={}", cfg.fingerprint())?;
    writeln!(w, "# policy_fingerprint={policy_fingerprint}")?;
    w.flush()?;
    write_sidecar(cfg, &dir, "evaluate")?;
    eprintln!("{}", out.display());
    Ok(())
}

fn cmd_experiment(cfg: &RunConfig, name: &str) -> Result<()> {
    let experiment: Experiment = name.parse()?;
    let table = experiments::run(experiment, cfg)?;
    for f in &table.failures {
        eprintln!("warning: cell {} seed {} failed: {}", f.cell, f.seed, f.message);
    }
    let path = experiments::write_table(&table, cfg, &cfg.output_dir())?;
    eprintln!("{}", path.display());
    Ok(())
}

fn cmd_oracle(cfg: &RunConfig, n: u64) -> Result<()> {
    let report = max_ev_monte_carlo(&cfg.tasks.distribution(), n, cfg.seed, &mut rng_for(cfg.seed, Stream::Oracle))?;
    println!("{}", report.csv_row());
    Ok(())
}

fn run() -> Result<()> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    let cfg = resolve(&cli.common, &overrides)?;
    match cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Evaluate { policy } => cmd_evaluate(&cfg, policy),
        Command::Experiment { name } => cmd_experiment(&cfg, &name),
        Command::Oracle { n } => cmd_oracle(&cfg, n),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
