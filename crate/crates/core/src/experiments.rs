//! Seed-replicated batch experiments writing CSV tables with 95% t intervals
//! across seeds.
//!
//! Every experiment is a matrix of independent (cell, seed) jobs. Each job
//! trains its own policy from `rng_for(seed, Training)` and evaluates it with
//! `rng_for(seed, Evaluation)`, so results do not depend on scheduling, and
//! cells that share a seed share random numbers. Rows come out in grid order:
//! per cell, one row per seed (ascending) and then the aggregate row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{evaluate, train, AgentError, EvalMetrics, QPolicy, TaskSource};
use crate::config::{ActionTasks, ConfigError, RunConfig};
use crate::env::{AgentKind, Environment, NoiseMode, ObservationModel, RewardModel};
use crate::stats::{ci95, Interval, StatsError};
use crate::tasks::{ContextKind, Role, TaskDistribution, TaskError};
use crate::{rng_for, Stream};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}`; valid names: noise_sweep, context, wedell, effect_size, actions")]
    Unknown(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    NoiseSweep,
    Context,
    Wedell,
    EffectSize,
    Actions,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::NoiseSweep, Experiment::Context, Experiment::Wedell, Experiment::EffectSize, Experiment::Actions];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::NoiseSweep => "noise_sweep",
            Experiment::Context => "context",
            Experiment::Wedell => "wedell",
            Experiment::EffectSize => "effect_size",
            Experiment::Actions => "actions",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Experiment::NoiseSweep => "agent,noise_axis,noise_level,seed,mean_ev,is_aggregate,ci_low,ci_high",
            Experiment::Context => "task,role,seed,share,is_aggregate,ci_low,ci_high",
            Experiment::Wedell => "task_set,role,seed,share,is_aggregate,ci_low,ci_high",
            Experiment::EffectSize => "axis,level,seed,effect_size,is_aggregate,ci_low,ci_high",
            Experiment::Actions => "axis,level,seed,mean_comparisons,mean_calculations,is_aggregate,ci_low,ci_high",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| ExperimentError::Unknown(s.to_string()))
    }
}

/// Noise-sweep axes.
pub const AXIS_CALCULATION_CV: &str = "calculation_cv";
pub const AXIS_P_ERROR: &str = "p_error";
/// Effect-size and action-analysis axes.
pub const AXIS_SIGMA_CALC: &str = "sigma_calc";
pub const AXIS_COST_SCALE: &str = "cost_scale";

/// One CSV row. `seed == None` marks the aggregate row of its cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub keys: Vec<String>,
    pub seed: Option<u64>,
    /// NaN marks a failed cell.
    pub values: Vec<f64>,
    pub ci: Option<(f64, f64)>,
}

impl Row {
    pub fn is_aggregate(&self) -> bool {
        self.seed.is_none()
    }

    pub fn interval(&self) -> Option<Interval> {
        self.ci.map(|(lo, hi)| Interval { mean: self.values[0], ci_low: lo, ci_high: hi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub seed: u64,
    pub message: String,
}

/// Rows of one experiment plus any failed jobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: Experiment,
    pub rows: Vec<Row>,
    pub failures: Vec<CellFailure>,
}

impl Table {
    pub fn aggregate(&self, keys: &[&str]) -> Option<&Row> {
        self.rows.iter().find(|r| r.is_aggregate() && r.keys == keys)
    }

    /// First value of each per-seed row of a cell, by seed.
    pub fn seed_values(&self, keys: &[&str]) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.keys == keys).filter_map(|r| r.seed.map(|s| (s, r.values[0]))).collect()
    }

    /// Distinct key tuples in row order.
    pub fn cells(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.keys) {
                out.push(r.keys.clone());
            }
        }
        out
    }

    /// CSV text: the header, the rows, and a trailing fingerprint comment.
    pub fn to_csv(&self, fingerprint: &str) -> String {
        let mut s = String::new();
        s.push_str(self.experiment.header());
        s.push('\n');
        for r in &self.rows {
            for k in &r.keys {
                s.push_str(k);
                s.push(',');
            }
            if let Some(seed) = r.seed {
                write!(s, "{seed}").unwrap();
            }
            for v in &r.values {
                write!(s, ",{}", fmt_value(*v)).unwrap();
            }
            match r.ci {
                Some((lo, hi)) => write!(s, ",true,{},{}", fmt_value(lo), fmt_value(hi)).unwrap(),
                None if r.is_aggregate() => s.push_str(",true,nan,nan"),
                None => s.push_str(",false,,"),
            }
            s.push('\n');
        }
        writeln!(s, "# config_fingerprint={fingerprint}").unwrap();
        s
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        // avoid "-0.000000"
        let s = format!("{v:.6}");
        if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

/// Grid level as a key column: shortest round-trip representation.
fn fmt_level(v: f64) -> String {
    format!("{v}")
}

/// Runs `f` over `jobs` on a pool of `threads` workers (0 = available
/// parallelism). Output order matches input order.
pub fn run_jobs<J, T, F>(jobs: &[J], threads: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))?;
        Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(jobs.iter().map(f).collect())
    }
}

/// Per-seed outcome of one cell.
type Outcome<T> = Result<T, String>;

/// Trains a policy for `kind` on random tasks and returns it.
pub fn train_on_random_tasks(
    cfg: &RunConfig,
    dist: &TaskDistribution,
    env: &Environment,
    kind: AgentKind,
    seed: u64,
) -> Result<QPolicy, ExperimentError> {
    let tasks = TaskSource::Random(dist.sampler()?);
    let out =
        train(&tasks, kind, env, &cfg.agent.learner(), &cfg.agent.discretizer(), &mut rng_for(seed, Stream::Training))?;
    Ok(out.policy)
}

fn evaluate_on(
    cfg: &RunConfig,
    policy: &QPolicy,
    tasks: &TaskSource,
    env: &Environment,
    kind: AgentKind,
    seed: u64,
) -> Result<EvalMetrics, ExperimentError> {
    Ok(evaluate(policy, tasks, cfg.agent.eval_episodes, env, kind, &mut rng_for(seed, Stream::Evaluation))?)
}

fn fixed_task(cfg: &RunConfig, kind: ContextKind) -> Result<TaskSource, ExperimentError> {
    Ok(TaskSource::Fixed { sets: vec![cfg.decoys.context_task(kind)?], shuffle: true })
}

/// Appends per-seed rows then the aggregate row for one cell. `ci_of` picks
/// the per-seed quantity whose interval the aggregate row carries.
fn push_cell(
    rows: &mut Vec<Row>,
    failures: &mut Vec<CellFailure>,
    keys: Vec<String>,
    per_seed: &[(u64, Outcome<Vec<f64>>)],
    width: usize,
    ci_of: impl Fn(&[f64]) -> f64,
) {
    let mut ok: Vec<&Vec<f64>> = Vec::new();
    for (seed, out) in per_seed {
        let values = match out {
            Ok(v) => {
                ok.push(v);
                v.clone()
            }
            Err(message) => {
                failures.push(CellFailure { cell: keys.join("/"), seed: *seed, message: message.clone() });
                vec![f64::NAN; width]
            }
        };
        rows.push(Row { keys: keys.clone(), seed: Some(*seed), values, ci: None });
    }
    let (values, ci) = match aggregate(&ok.iter().map(|v| ci_of(v)).collect::<Vec<_>>()) {
        Ok(interval) => {
            let means = (0..width).map(|k| ok.iter().map(|v| v[k]).sum::<f64>() / ok.len() as f64).collect();
            (means, Some((interval.ci_low, interval.ci_high)))
        }
        Err(_) => (vec![f64::NAN; width], None),
    };
    rows.push(Row { keys, seed: None, values, ci });
}

/// Mean and two-sided 95% t interval over seeds.
pub fn aggregate(per_seed: &[f64]) -> Result<Interval, StatsError> {
    ci95(per_seed)
}

fn noise_sweep_env(cfg: &RunConfig, axis: &str, level: f64) -> Result<Environment, ExperimentError> {
    let fixed = cfg.experiments.noise_fixed;
    let (cv, p_error) = if axis == AXIS_CALCULATION_CV { (level, fixed) } else { (fixed, level) };
    let obs = ObservationModel { noise_mode: NoiseMode::CoefficientOfVariation, cv, p_error, ..cfg.env.observation() };
    env_with(cfg, obs, cfg.env.reward())
}

fn env_with(cfg: &RunConfig, obs: ObservationModel, reward: RewardModel) -> Result<Environment, ExperimentError> {
    Environment::new(obs, reward, cfg.env.episode()).map_err(|e| ExperimentError::Agent(e.into()))
}

/// Mean chosen EV for each agent kind along the calculation-CV axis (comparison
/// error fixed) and the comparison-error axis (calculation CV fixed).
pub fn run_noise_sweep(cfg: &RunConfig) -> Result<Table, ExperimentError> {
    let dist = cfg.tasks.distribution();
    let mut cells = Vec::new();
    for kind in AgentKind::ALL {
        for axis in [AXIS_CALCULATION_CV, AXIS_P_ERROR] {
            for &level in &cfg.experiments.noise_levels {
                cells.push((kind, axis, level));
            }
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let results = run_jobs(&jobs, cfg.jobs, |&(c, seed)| -> Outcome<Vec<f64>> {
        let (kind, axis, level) = cells[c];
        let run = || -> Result<Vec<f64>, ExperimentError> {
            let env = noise_sweep_env(cfg, axis, level)?;
            let policy = train_on_random_tasks(cfg, &dist, &env, kind, seed)?;
            let m = evaluate_on(cfg, &policy, &TaskSource::Random(dist.sampler()?), &env, kind, seed)?;
            Ok(vec![m.mean_chosen_ev])
        };
        run().map_err(|e| e.to_string())
    })?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (c, &(kind, axis, level)) in cells.iter().enumerate() {
        let per_seed = seed_slice(&jobs, &results, c);
        push_cell(
            &mut rows,
            &mut failures,
            vec![kind.name().into(), axis.into(), fmt_level(level)],
            &per_seed,
            1,
            |v| v[0],
        );
    }
    Ok(Table { experiment: Experiment::NoiseSweep, rows, failures })
}

fn seed_slice<T: Clone>(jobs: &[(usize, u64)], results: &[T], cell: usize) -> Vec<(u64, T)> {
    jobs.iter().zip(results).filter(|((c, _), _)| *c == cell).map(|((_, s), r)| (*s, r.clone())).collect()
}

/// Role shares per task for one trained policy per seed.
fn share_table(
    cfg: &RunConfig,
    experiment: Experiment,
    env: &Environment,
    dist: &TaskDistribution,
    tasks: &[(String, ContextKind)],
) -> Result<Table, ExperimentError> {
    let jobs: Vec<(usize, u64)> = cfg.seeds.iter().map(|&s| (0, s)).collect();
    let results = run_jobs(&jobs, cfg.jobs, |&(_, seed)| -> Outcome<Vec<[f64; 3]>> {
        let run = || -> Result<Vec<[f64; 3]>, ExperimentError> {
            let policy = train_on_random_tasks(cfg, dist, env, AgentKind::Integrated, seed)?;
            tasks
                .iter()
                .map(|(_, kind)| {
                    let m = evaluate_on(cfg, &policy, &fixed_task(cfg, *kind)?, env, AgentKind::Integrated, seed)?;
                    Ok(m.role_shares.expect("context tasks carry roles"))
                })
                .collect()
        };
        run().map_err(|e| e.to_string())
    })?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (t, (label, _)) in tasks.iter().enumerate() {
        for role in Role::ALL {
            let per_seed: Vec<(u64, Outcome<Vec<f64>>)> = jobs
                .iter()
                .zip(&results)
                .map(|((_, s), r)| (*s, r.as_ref().map(|v| vec![v[t][role.index()]]).map_err(|e| e.clone())))
                .collect();
            // A failed seed fails every role; report it once per task.
            let mut cell_failures = Vec::new();
            push_cell(&mut rows, &mut cell_failures, vec![label.clone(), role.name().into()], &per_seed, 1, |v| v[0]);
            if role == Role::Target {
                failures.extend(cell_failures);
            }
        }
    }
    Ok(Table { experiment, rows, failures })
}

/// Choice shares of the integrated agent on the attraction, compromise and
/// similarity tasks under the `[env]` parameters.
pub fn run_context_effects(cfg: &RunConfig) -> Result<Table, ExperimentError> {
    let env = env_with(cfg, cfg.env.observation(), cfg.env.reward())?;
    let tasks: Vec<(String, ContextKind)> = ContextKind::EFFECTS.iter().map(|k| (k.name().to_string(), *k)).collect();
    share_table(cfg, Experiment::Context, &env, &cfg.tasks.distribution(), &tasks)
}

/// Choice shares on the four Wedell sets with their own calculation noise,
/// probability weighting and value scale.
pub fn run_wedell(cfg: &RunConfig) -> Result<Table, ExperimentError> {
    let x = &cfg.experiments;
    let obs = ObservationModel { sigma_calc: x.wedell_sigma_calc, alpha: x.wedell_alpha, ..cfg.env.observation() };
    let env = env_with(cfg, obs, cfg.env.reward())?;
    let dist = TaskDistribution { t_scale: x.wedell_t_scale, ..cfg.tasks.distribution() };
    let tasks: Vec<(String, ContextKind)> =
        (1..=4).map(|i| Ok((i.to_string(), ContextKind::wedell(i)?))).collect::<Result<_, TaskError>>()?;
    share_table(cfg, Experiment::Wedell, &env, &dist, &tasks)
}

/// Per-seed measurements at one sweep grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SweepPoint {
    effect_size: f64,
    comparisons: f64,
    calculations: f64,
}

fn sweep_cells(cfg: &RunConfig) -> Vec<(&'static str, f64)> {
    let x = &cfg.experiments;
    let mut cells = Vec::new();
    for (axis, grid) in
        [(AXIS_P_ERROR, &x.p_error_grid), (AXIS_SIGMA_CALC, &x.sigma_calc_grid), (AXIS_COST_SCALE, &x.cost_scale_grid)]
    {
        for &level in grid {
            cells.push((axis, level));
        }
    }
    cells
}

fn sweep_env(cfg: &RunConfig, axis: &str, level: f64) -> Result<Environment, ExperimentError> {
    let mut obs = cfg.env.observation();
    let mut reward = cfg.env.reward();
    match axis {
        AXIS_P_ERROR => obs.p_error = level,
        AXIS_SIGMA_CALC => obs.sigma_calc = level,
        _ => reward = reward.with_cost_scale(level),
    }
    env_with(cfg, obs, reward)
}

/// Trains once per (grid point, seed) and measures the attraction effect
/// size and the observation counts.
fn run_sweeps(
    cfg: &RunConfig,
) -> Result<(Vec<(&'static str, f64)>, Vec<(usize, u64)>, Vec<Outcome<SweepPoint>>), ExperimentError> {
    let dist = cfg.tasks.distribution();
    let cells = sweep_cells(cfg);
    let attraction = fixed_task(cfg, ContextKind::Attraction)?;
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let results = run_jobs(&jobs, cfg.jobs, |&(c, seed)| -> Outcome<SweepPoint> {
        let (axis, level) = cells[c];
        let run = || -> Result<SweepPoint, ExperimentError> {
            let env = sweep_env(cfg, axis, level)?;
            let kind = AgentKind::Integrated;
            let policy = train_on_random_tasks(cfg, &dist, &env, kind, seed)?;
            let m = evaluate_on(cfg, &policy, &attraction, &env, kind, seed)?;
            let shares = m.role_shares.expect("context tasks carry roles");
            let m = match cfg.experiments.action_tasks {
                ActionTasks::Attraction => m,
                ActionTasks::Random => {
                    evaluate_on(cfg, &policy, &TaskSource::Random(dist.sampler()?), &env, kind, seed)?
                }
            };
            Ok(SweepPoint {
                effect_size: shares[Role::Target.index()] - shares[Role::Competitor.index()],
                comparisons: m.mean_comparisons,
                calculations: m.mean_calculations,
            })
        };
        run().map_err(|e| e.to_string())
    })?;
    Ok((cells, jobs, results))
}

fn sweep_table(
    experiment: Experiment,
    cells: &[(&'static str, f64)],
    jobs: &[(usize, u64)],
    results: &[Outcome<SweepPoint>],
) -> Table {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (c, &(axis, level)) in cells.iter().enumerate() {
        let per_seed: Vec<(u64, Outcome<Vec<f64>>)> = seed_slice(jobs, results, c)
            .into_iter()
            .map(|(s, r)| {
                (
                    s,
                    r.map(|p| match experiment {
                        Experiment::EffectSize => vec![p.effect_size],
                        _ => vec![p.comparisons, p.calculations],
                    }),
                )
            })
            .collect();
        let keys = vec![axis.to_string(), fmt_level(level)];
        match experiment {
            Experiment::EffectSize => push_cell(&mut rows, &mut failures, keys, &per_seed, 1, |v| v[0]),
            // The interval is on the total observation count.
            _ => push_cell(&mut rows, &mut failures, keys, &per_seed, 2, |v| v[0] + v[1]),
        }
    }
    Table { experiment, rows, failures }
}

/// Attraction effect size, share(Target) - share(Competitor), along the
/// comparison-error, calculation-noise and cost-scale grids.
pub fn run_effect_size_sweeps(cfg: &RunConfig) -> Result<Table, ExperimentError> {
    let (cells, jobs, results) = run_sweeps(cfg)?;
    Ok(sweep_table(Experiment::EffectSize, &cells, &jobs, &results))
}

/// Mean comparison and calculation counts per episode along the same grids.
pub fn run_action_analysis(cfg: &RunConfig) -> Result<Table, ExperimentError> {
    let (cells, jobs, results) = run_sweeps(cfg)?;
    Ok(sweep_table(Experiment::Actions, &cells, &jobs, &results))
}

/// Both sweep tables from a single set of trained policies.
pub fn run_effect_and_actions(cfg: &RunConfig) -> Result<(Table, Table), ExperimentError> {
    let (cells, jobs, results) = run_sweeps(cfg)?;
    Ok((
        sweep_table(Experiment::EffectSize, &cells, &jobs, &results),
        sweep_table(Experiment::Actions, &cells, &jobs, &results),
    ))
}

pub fn run(experiment: Experiment, cfg: &RunConfig) -> Result<Table, ExperimentError> {
    cfg.validate()?;
    match experiment {
        Experiment::NoiseSweep => run_noise_sweep(cfg),
        Experiment::Context => run_context_effects(cfg),
        Experiment::Wedell => run_wedell(cfg),
        Experiment::EffectSize => run_effect_size_sweeps(cfg),
        Experiment::Actions => run_action_analysis(cfg),
    }
}

/// Writes `<name>.csv` and the effective-config sidecar `<name>.config.toml`
/// into `dir`; returns the CSV path.
pub fn write_table(table: &Table, cfg: &RunConfig, dir: &Path) -> Result<PathBuf, ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = dir.join(table.experiment.file_name());
    std::fs::write(&csv, table.to_csv(&cfg.fingerprint())).map_err(io(&csv))?;
    let sidecar = dir.join(format!("{}.config.toml", table.experiment.name()));
    std::fs::write(&sidecar, cfg.to_sidecar()).map_err(io(&sidecar))?;
    Ok(csv)
}
