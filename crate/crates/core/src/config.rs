//! Run configuration: one TOML file with a section per module, dotted-path
//! overrides, validation, and a stable fingerprint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{AgentError, DiscretizerConfig, LearnerConfig};
use crate::env::{AgentKind, EnvError, EpisodeConfig, NoiseMode, ObservationModel, RewardModel};
use crate::tasks::{
    make_context_task, make_wedell_set, ChoiceSet, ContextKind, ContextTaskSpec, DecoyOffset, Gamble, TaskDistribution,
    TaskError, WedellGeometry,
};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "CCLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

/// Keys that do not change results and are left out of the fingerprint.
const UNFINGERPRINTED: [&str; 2] = ["out_dir", "jobs"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: `{key}` {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("override `{key}`: {message}")]
    Override { key: String, message: String },
}

fn invalid(key: impl Into<String>, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), constraint: constraint.into() }
}

fn from_env_error(section: &str, e: EnvError) -> ConfigError {
    match e {
        EnvError::InvalidConfig { key, constraint } => invalid(format!("{section}.{key}"), constraint),
        other => invalid(section, other.to_string()),
    }
}

fn from_agent_error(e: AgentError) -> ConfigError {
    match e {
        AgentError::InvalidConfig { key, constraint } => invalid(format!("agent.{key}"), constraint),
        other => invalid("agent", other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TasksSection {
    pub beta_a: f64,
    pub beta_b: f64,
    pub t_location: f64,
    pub t_scale: f64,
    pub t_df: f64,
}

impl Default for TasksSection {
    fn default() -> Self {
        let d = TaskDistribution::default();
        TasksSection { beta_a: d.beta_a, beta_b: d.beta_b, t_location: d.t_location, t_scale: d.t_scale, t_df: d.t_df }
    }
}

impl TasksSection {
    pub fn distribution(&self) -> TaskDistribution {
        TaskDistribution {
            beta_a: self.beta_a,
            beta_b: self.beta_b,
            t_location: self.t_location,
            t_scale: self.t_scale,
            t_df: self.t_df,
        }
    }
}

/// Target, competitor and decoy offset for one context task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGeometry {
    pub target: Gamble,
    pub competitor: Gamble,
    pub offset: DecoyOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoysSection {
    pub tie_epsilon: f64,
    pub attraction: TaskGeometry,
    pub compromise: TaskGeometry,
    pub similarity: TaskGeometry,
    pub wedell: WedellGeometry,
}

const fn gamble(p: f64, v: f64) -> Gamble {
    Gamble { p, v }
}

impl Default for DecoysSection {
    fn default() -> Self {
        let high_v = gamble(0.4, 25.0);
        let high_p = gamble(0.5, 20.0);
        DecoysSection {
            tie_epsilon: crate::tasks::DEFAULT_TIE_EPSILON,
            attraction: TaskGeometry { target: high_p, competitor: high_v, offset: DecoyOffset::new(0.05, 2.0) },
            compromise: TaskGeometry { target: high_p, competitor: high_v, offset: DecoyOffset::new(0.1, 0.0) },
            similarity: TaskGeometry { target: high_v, competitor: high_p, offset: DecoyOffset::new(0.02, 0.0) },
            wedell: WedellGeometry {
                target: high_v,
                competitor: high_p,
                offsets: [
                    DecoyOffset::new(0.1, 1.0),
                    DecoyOffset::new(0.05, 3.0),
                    DecoyOffset::new(0.02, 4.0),
                    DecoyOffset::new(0.1, -8.0),
                ],
            },
        }
    }
}

impl DecoysSection {
    pub fn context_task(&self, kind: ContextKind) -> Result<ChoiceSet, TaskError> {
        if let Some(i) = kind.wedell_index() {
            return make_wedell_set(i, &self.wedell, self.tie_epsilon);
        }
        let g = match kind {
            ContextKind::Attraction => self.attraction,
            ContextKind::Compromise => self.compromise,
            _ => self.similarity,
        };
        make_context_task(&ContextTaskSpec {
            kind,
            target: g.target,
            competitor: g.competitor,
            decoy_offset: g.offset,
            tie_epsilon: self.tie_epsilon,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub sigma_calc: f64,
    pub noise_mode: NoiseMode,
    pub cv: f64,
    pub p_error: f64,
    pub alpha: f64,
    pub reward_correct: f64,
    pub reward_incorrect: f64,
    pub cost_comparison: f64,
    pub cost_calculation: f64,
    pub tie_epsilon: f64,
    pub max_steps: usize,
    pub gamma: f64,
    pub average_repeats: bool,
}

impl Default for EnvSection {
    fn default() -> Self {
        let o = ObservationModel::default();
        let r = RewardModel::default();
        let e = EpisodeConfig::default();
        EnvSection {
            sigma_calc: o.sigma_calc,
            noise_mode: o.noise_mode,
            cv: o.cv,
            p_error: o.p_error,
            alpha: o.alpha,
            reward_correct: r.reward_correct,
            reward_incorrect: r.reward_incorrect,
            cost_comparison: r.cost_comparison,
            cost_calculation: r.cost_calculation,
            tie_epsilon: r.tie_epsilon,
            max_steps: e.max_steps,
            gamma: e.gamma,
            average_repeats: e.average_repeats,
        }
    }
}

impl EnvSection {
    pub fn observation(&self) -> ObservationModel {
        ObservationModel {
            sigma_calc: self.sigma_calc,
            noise_mode: self.noise_mode,
            cv: self.cv,
            p_error: self.p_error,
            alpha: self.alpha,
        }
    }

    pub fn reward(&self) -> RewardModel {
        RewardModel {
            reward_correct: self.reward_correct,
            reward_incorrect: self.reward_incorrect,
            cost_comparison: self.cost_comparison,
            cost_calculation: self.cost_calculation,
            tie_epsilon: self.tie_epsilon,
        }
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig { max_steps: self.max_steps, gamma: self.gamma, average_repeats: self.average_repeats }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub agent_kind: AgentKind,
    pub learning_rate: f64,
    pub learning_rate_final: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub epsilon_decay_fraction: f64,
    pub n_train_samples: u64,
    pub q_init: f64,
    pub curve_window: usize,
    pub ev_bins: usize,
    pub ev_range: (f64, f64),
    /// Encode the pairwise order of EV estimates in the state.
    pub ev_order: bool,
    pub ev_order_margin: f64,
    /// Held-out episodes per evaluation (and per experiment cell and seed).
    pub eval_episodes: usize,
}

impl Default for AgentSection {
    fn default() -> Self {
        let l = LearnerConfig::default();
        let d = DiscretizerConfig::default();
        AgentSection {
            agent_kind: AgentKind::Integrated,
            learning_rate: l.learning_rate,
            learning_rate_final: l.learning_rate_final,
            epsilon_initial: l.epsilon_initial,
            epsilon_final: l.epsilon_final,
            epsilon_decay_fraction: l.epsilon_decay_fraction,
            n_train_samples: l.n_train_samples,
            q_init: l.q_init,
            curve_window: l.curve_window,
            ev_bins: d.ev_bins,
            ev_range: d.ev_range,
            ev_order: d.ev_order_margin.is_some(),
            ev_order_margin: d.ev_order_margin.unwrap_or(0.0),
            eval_episodes: 10_000,
        }
    }
}

impl AgentSection {
    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            learning_rate: self.learning_rate,
            learning_rate_final: self.learning_rate_final,
            epsilon_initial: self.epsilon_initial,
            epsilon_final: self.epsilon_final,
            epsilon_decay_fraction: self.epsilon_decay_fraction,
            n_train_samples: self.n_train_samples,
            q_init: self.q_init,
            curve_window: self.curve_window,
        }
    }

    pub fn discretizer(&self) -> DiscretizerConfig {
        DiscretizerConfig {
            ev_bins: self.ev_bins,
            ev_range: self.ev_range,
            ev_order_margin: self.ev_order.then_some(self.ev_order_margin),
        }
    }
}

/// Grids and fixed parameters of the five experiments. The context-effect
/// experiment and the sweep centres use the `[env]` section as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentsSection {
    /// Training budget substituted by `--fast`.
    pub fast_train_samples: u64,
    /// Levels for both noise sweeps (calculation CV, comparison error).
    pub noise_levels: Vec<f64>,
    /// Level of the non-swept noise source in each noise sweep.
    pub noise_fixed: f64,
    pub wedell_sigma_calc: f64,
    pub wedell_alpha: f64,
    pub wedell_t_scale: f64,
    pub p_error_grid: Vec<f64>,
    pub sigma_calc_grid: Vec<f64>,
    pub cost_scale_grid: Vec<f64>,
    /// Tasks on which the action analysis counts observations.
    pub action_tasks: ActionTasks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionTasks {
    /// Held-out draws from the task distribution.
    Random,
    /// The attraction task used for the effect size.
    Attraction,
}

impl Default for ExperimentsSection {
    fn default() -> Self {
        ExperimentsSection {
            fast_train_samples: 300_000,
            noise_levels: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            noise_fixed: 0.3,
            wedell_sigma_calc: 0.5,
            wedell_alpha: 1.5,
            wedell_t_scale: 8.08,
            p_error_grid: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            sigma_calc_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            cost_scale_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            action_tasks: ActionTasks::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for single runs (`train`, `evaluate`, `oracle`).
    pub seed: u64,
    /// Seeds replicated by experiments.
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 means available parallelism.
    pub jobs: usize,
    pub tasks: TasksSection,
    pub decoys: DecoysSection,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub experiments: ExperimentsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            seeds: (1..=10).collect(),
            out_dir: None,
            jobs: 0,
            tasks: TasksSection::default(),
            decoys: DecoysSection::default(),
            env: EnvSection::default(),
            agent: AgentSection::default(),
            experiments: ExperimentsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.into(), source: e })?;
        Self::from_toml_str(&s, &path.display().to_string())
    }

    /// File (or defaults) plus overrides, validated.
    pub fn resolve(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        for (k, v) in overrides {
            cfg = cfg.with_override(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets the value at a dotted path such as `env.p_error`. The value is
    /// read as a TOML literal, falling back to a bare string.
    pub fn with_override(&self, key: &str, raw: &str) -> Result<Self, ConfigError> {
        let mut root = toml::Value::try_from(self)
            .map_err(|e| ConfigError::Override { key: key.to_string(), message: e.to_string() })?;
        let value = parse_literal(raw);
        let unknown = || ConfigError::UnknownKey(key.to_string());
        let (parents, leaf) = match key.rsplit_once('.') {
            Some((p, l)) => (p.split('.').collect::<Vec<_>>(), l),
            None => (Vec::new(), key),
        };
        let mut table = root.as_table_mut().ok_or_else(unknown)?;
        for part in &parents {
            table = table.get_mut(*part).and_then(|v| v.as_table_mut()).ok_or_else(unknown)?;
        }
        // `out_dir` is optional and may be absent from the serialized form.
        if !table.contains_key(leaf) && !(parents.is_empty() && leaf == "out_dir") {
            return Err(unknown());
        }
        table.insert(leaf.to_string(), value);
        root.try_into().map_err(|e: toml::de::Error| ConfigError::Override {
            key: key.to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(invalid("seeds", "must not repeat a seed"));
        }
        self.tasks.distribution().validate().map_err(|e| invalid("tasks", e.to_string()))?;
        self.env.observation().validate().map_err(|e| from_env_error("env", e))?;
        self.env.reward().validate().map_err(|e| from_env_error("env", e))?;
        self.env.episode().validate().map_err(|e| from_env_error("env", e))?;
        self.agent.learner().validate().map_err(from_agent_error)?;
        self.agent.discretizer().validate().map_err(from_agent_error)?;
        if self.agent.eval_episodes == 0 {
            return Err(invalid("agent.eval_episodes", "must be >= 1"));
        }
        if !(self.decoys.tie_epsilon >= 0.0) {
            return Err(invalid("decoys.tie_epsilon", "must be >= 0"));
        }
        for kind in [
            ContextKind::Attraction,
            ContextKind::Compromise,
            ContextKind::Similarity,
            ContextKind::WedellSet1,
            ContextKind::WedellSet2,
            ContextKind::WedellSet3,
            ContextKind::WedellSet4,
        ] {
            let key = match kind.wedell_index() {
                Some(_) => "decoys.wedell".to_string(),
                None => format!("decoys.{}", kind.name()),
            };
            self.decoys.context_task(kind).map_err(|e| invalid(key, e.to_string()))?;
        }
        let x = &self.experiments;
        if x.fast_train_samples == 0 {
            return Err(invalid("experiments.fast_train_samples", "must be >= 1"));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let checks: [(&str, &[f64], &dyn Fn(f64) -> bool, &str); 4] = [
            ("experiments.noise_levels", &x.noise_levels, &|v| in_unit(v), "values must be in [0, 1]"),
            ("experiments.p_error_grid", &x.p_error_grid, &|v| in_unit(v), "values must be in [0, 1]"),
            (
                "experiments.sigma_calc_grid",
                &x.sigma_calc_grid,
                &|v: f64| v >= 0.0 && v.is_finite(),
                "values must be >= 0",
            ),
            (
                "experiments.cost_scale_grid",
                &x.cost_scale_grid,
                &|v: f64| v >= 0.0 && v.is_finite(),
                "values must be >= 0",
            ),
        ];
        for (key, grid, ok, msg) in checks {
            if grid.is_empty() {
                return Err(invalid(key, "must not be empty"));
            }
            if !grid.iter().all(|&v| ok(v)) {
                return Err(invalid(key, msg));
            }
        }
        if !in_unit(x.noise_fixed) {
            return Err(invalid("experiments.noise_fixed", "must be in [0, 1]"));
        }
        if !(x.wedell_sigma_calc >= 0.0) {
            return Err(invalid("experiments.wedell_sigma_calc", "must be >= 0"));
        }
        if !(x.wedell_alpha > 0.0) {
            return Err(invalid("experiments.wedell_alpha", "must be > 0"));
        }
        if !(x.wedell_t_scale > 0.0) {
            return Err(invalid("experiments.wedell_t_scale", "must be > 0"));
        }
        Ok(())
    }

    /// Applies the reduced training budget.
    pub fn fast(mut self) -> Self {
        self.agent.n_train_samples = self.experiments.fast_train_samples;
        self
    }

    /// SHA-256 over canonical JSON (sorted keys), excluding output location
    /// and worker count.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            for k in UNFINGERPRINTED {
                m.remove(k);
            }
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Output root: explicit setting, then `CCLAB_OUT_DIR`, then `results`.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    /// Effective config as TOML, headed by its fingerprint.
    pub fn to_sidecar(&self) -> String {
        let body = toml::to_string_pretty(self).expect("config serializes");
        format!("# config_fingerprint = \"{}\"\n{body}", self.fingerprint())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("x = {raw}")) {
        Ok(mut t) => t.remove("x").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
