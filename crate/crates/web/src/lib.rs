//! Browser bindings: play an episode by hand, train a small agent and probe
//! its context effects, and estimate the best achievable EV.
//!
//! Every exported function takes and returns JSON strings so the page needs
//! no generated type glue beyond the wasm-bindgen shim.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use cclab::agent::{evaluate, train, DiscretizerConfig, LearnerConfig, TaskSource};
use cclab::config::DecoysSection;
use cclab::env::{Action, Episode, Observation};
use cclab::oracle::{max_ev_monte_carlo, random_baseline};
use cclab::tasks::{ContextKind, TaskDistribution};
use cclab::{rng_for, AgentKind, Environment, EpisodeConfig, ObservationModel, RewardModel, Rng, Stream};

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub seed: u64,
    pub sigma_calc: f64,
    pub p_error: f64,
    pub alpha: f64,
    pub cost_scale: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        let obs = ObservationModel::default();
        NoiseParams { seed: 1, sigma_calc: obs.sigma_calc, p_error: obs.p_error, alpha: obs.alpha, cost_scale: 1.0 }
    }
}

impl NoiseParams {
    fn environment(&self) -> Result<Environment, String> {
        let obs = ObservationModel {
            sigma_calc: self.sigma_calc,
            p_error: self.p_error,
            alpha: self.alpha,
            ..ObservationModel::default()
        };
        let reward = RewardModel::default().with_cost_scale(self.cost_scale);
        Environment::new(obs, reward, EpisodeConfig::default()).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct StepView {
    action: String,
    observation: String,
    reward: f64,
    done: bool,
    total_reward: f64,
    /// Shown only once the episode ends.
    gambles: Option<Vec<(f64, f64)>>,
    chosen: Option<usize>,
    correct: Option<bool>,
}

fn action_label(a: Action) -> String {
    const NAMES: [&str; 3] = ["X", "Y", "Z"];
    const PAIRS: [&str; 3] = ["X?Y", "X?Z", "Y?Z"];
    match a {
        Action::CompareP(p) => format!("compare p {}", PAIRS[p.slot()]),
        Action::CompareV(p) => format!("compare v {}", PAIRS[p.slot()]),
        Action::Calculate(i) => format!("calculate {}", NAMES[i]),
        Action::Choose(i) => format!("choose {}", NAMES[i]),
    }
}

fn observation_label(o: &Observation) -> String {
    match o {
        Observation::Estimate(x) => format!("{x:.2}"),
        other => other.to_string(),
    }
}

/// A hand-played episode on a freshly sampled task.
#[wasm_bindgen]
pub struct Session {
    episode: Episode,
    rng: Rng,
}

#[wasm_bindgen]
impl Session {
    /// `params_json`: `{"seed", "sigma_calc", "p_error", "alpha", "cost_scale"}`, all optional.
    #[wasm_bindgen(constructor)]
    pub fn new(params_json: &str) -> Result<Session, JsError> {
        Session::create(params_json).map_err(|e| JsError::new(&e))
    }

    /// Takes canonical action `id` (0-11) and returns the step as JSON.
    pub fn step(&mut self, id: usize) -> Result<String, JsError> {
        self.step_json(id).map_err(|e| JsError::new(&e))
    }

    /// Ids of the actions legal right now.
    pub fn legal(&self) -> Vec<u32> {
        self.episode.legal_actions().ids().map(|i| i as u32).collect()
    }
}

impl Session {
    pub fn create(params_json: &str) -> Result<Session, String> {
        let params: NoiseParams = parse_or_default(params_json)?;
        let env = params.environment()?;
        let mut rng = rng_for(params.seed, Stream::Tasks);
        let cs = TaskDistribution::default()
            .sampler()
            .and_then(|s| s.sample_choice_set(&mut rng))
            .map_err(|e| e.to_string())?;
        Ok(Session { episode: env.reset(cs, AgentKind::Integrated), rng })
    }

    pub fn step_json(&mut self, id: usize) -> Result<String, String> {
        let action = Action::from_id(id).ok_or_else(|| format!("no action {id}"))?;
        let r = self.episode.step(action, &mut self.rng).map_err(|e| e.to_string())?;
        let view = StepView {
            action: action_label(action),
            observation: observation_label(&r.observation),
            reward: r.reward,
            done: r.done,
            total_reward: self.episode.total_reward(),
            gambles: r.done.then(|| self.episode.choice_set().options().iter().map(|g| (g.p, g.v)).collect()),
            chosen: r.info.map(|i| i.chosen),
            correct: r.info.map(|i| i.correct),
        };
        serde_json::to_string(&view).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    #[serde(flatten)]
    pub noise: NoiseParams,
    pub steps: u64,
    pub eval_episodes: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { noise: NoiseParams::default(), steps: 300_000, eval_episodes: 2_000 }
    }
}

#[derive(Serialize)]
struct EffectView {
    task: &'static str,
    target: f64,
    competitor: f64,
    decoy: f64,
}

#[derive(Serialize)]
struct TrainView {
    states: usize,
    curve: Vec<(u64, f64)>,
    mean_chosen_ev: f64,
    accuracy: f64,
    mean_comparisons: f64,
    mean_calculations: f64,
    effects: Vec<EffectView>,
}

/// Trains an integrated agent and reports its learning curve, random-task
/// performance and choice shares on the three context tasks.
pub fn train_agent(params_json: &str) -> Result<String, String> {
    let p: TrainParams = parse_or_default(params_json)?;
    if p.steps > 5_000_000 || p.eval_episodes == 0 {
        return Err("steps must be at most 5e6 and eval_episodes positive".into());
    }
    let env = p.noise.environment()?;
    let learner = LearnerConfig { n_train_samples: p.steps, curve_window: 2_000, ..LearnerConfig::default() };
    let tasks = TaskSource::Random(TaskDistribution::default().sampler().map_err(|e| e.to_string())?);
    let kind = AgentKind::Integrated;
    let out = train(
        &tasks,
        kind,
        &env,
        &learner,
        &DiscretizerConfig::default(),
        &mut rng_for(p.noise.seed, Stream::Training),
    )
    .map_err(|e| e.to_string())?;
    let m = evaluate(&out.policy, &tasks, p.eval_episodes, &env, kind, &mut rng_for(p.noise.seed, Stream::Evaluation))
        .map_err(|e| e.to_string())?;

    let decoys = DecoysSection::default();
    let mut effects = Vec::new();
    for task in ContextKind::EFFECTS {
        let cs = decoys.context_task(task).map_err(|e| e.to_string())?;
        let source = TaskSource::Fixed { sets: vec![cs], shuffle: true };
        let s =
            evaluate(&out.policy, &source, p.eval_episodes, &env, kind, &mut rng_for(p.noise.seed, Stream::Evaluation))
                .map_err(|e| e.to_string())?
                .role_shares
                .ok_or("context task without roles")?;
        effects.push(EffectView { task: task.name(), target: s[0], competitor: s[1], decoy: s[2] });
    }
    let view = TrainView {
        states: out.policy.len(),
        curve: out.curve.iter().map(|c| (c.steps, c.mean_return)).collect(),
        mean_chosen_ev: m.mean_chosen_ev,
        accuracy: m.accuracy,
        mean_comparisons: m.mean_comparisons,
        mean_calculations: m.mean_calculations,
        effects,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Monte-Carlo best-option and random-option mean EV as
/// `{"best": {...}, "random": {...}}`.
pub fn oracle_bounds(n: u64, seed: u64) -> Result<String, String> {
    let dist = TaskDistribution::default();
    let best = max_ev_monte_carlo(&dist, n, seed, &mut rng_for(seed, Stream::Oracle)).map_err(|e| e.to_string())?;
    let random = random_baseline(&dist, n, seed, &mut rng_for(seed, Stream::Oracle)).map_err(|e| e.to_string())?;
    serde_json::to_string(&serde_json::json!({ "best": best, "random": random })).map_err(|e| e.to_string())
}

fn parse_or_default<T: for<'de> Deserialize<'de> + Default>(json: &str) -> Result<T, String> {
    if json.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
}

/// Labels of the twelve actions, indexed by canonical id.
#[wasm_bindgen(js_name = actionLabels)]
pub fn action_labels() -> Vec<String> {
    Action::ALL.iter().map(|&a| action_label(a)).collect()
}

#[wasm_bindgen(js_name = trainAgent)]
pub fn train_agent_js(params_json: &str) -> Result<String, JsError> {
    train_agent(params_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = oracleBounds)]
pub fn oracle_bounds_js(n: u32, seed: u32) -> Result<String, JsError> {
    oracle_bounds(n as u64, seed as u64).map_err(|e| JsError::new(&e))
}
