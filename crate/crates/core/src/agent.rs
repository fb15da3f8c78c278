//! Tabular temporal-difference control over discretized evidence states.
//!
//! An [`EvidenceState`] is packed into a `u64` index: 2 bits for each of the
//! six relation slots, optionally 2 bits for each pairwise order of the EV
//! estimates, then one base-`(ev_bins + 1)` digit per EV slot (0 = absent).
//! The action-value table is a sparse map from that index to twelve values.

use std::io::{Read, Write};

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    true_relation, Action, ActionMask, AgentKind, EnvError, Environment, Episode, EvidenceState, Relation,
};
use crate::tasks::{ChoiceSet, Role, TaskError, TaskSampler};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid config: `{key}` {constraint}")]
    InvalidConfig { key: &'static str, constraint: String },
    #[error("no legal action available")]
    EmptyMask,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("policy artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(key: &'static str, constraint: impl Into<String>) -> AgentError {
    AgentError::InvalidConfig { key, constraint: constraint.into() }
}

const RELATION_BITS: u32 = 12;
const ORDER_BITS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizerConfig {
    pub ev_bins: usize,
    pub ev_range: (f64, f64),
    /// When set, the pairwise order of present EV estimates is part of the
    /// state; differences within the margin encode as equal.
    pub ev_order_margin: Option<f64>,
}

impl Default for DiscretizerConfig {
    fn default() -> Self {
        DiscretizerConfig { ev_bins: 8, ev_range: (0.0, 40.0), ev_order_margin: Some(0.25) }
    }
}

impl DiscretizerConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.ev_bins < 2 {
            return Err(invalid("ev_bins", format!("must be >= 2, got {}", self.ev_bins)));
        }
        if self.ev_bins > 4096 {
            return Err(invalid("ev_bins", "must be <= 4096"));
        }
        let (lo, hi) = self.ev_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("ev_range", format!("needs low < high, got ({lo}, {hi})")));
        }
        if let Some(m) = self.ev_order_margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(invalid("ev_order_margin", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Number of distinct indices the layout can produce.
    pub fn index_space(&self) -> u64 {
        let order = if self.ev_order_margin.is_some() { 4u64.pow(3) } else { 1 };
        4u64.pow(6) * order * (self.ev_bins as u64 + 1).pow(3)
    }

    /// Bin digit for an EV estimate, in `1..=ev_bins`; out-of-range values clamp.
    pub fn ev_bin(&self, ev: f64) -> u64 {
        let (lo, hi) = self.ev_range;
        let x = ((ev - lo) / (hi - lo) * self.ev_bins as f64).floor();
        let b = if x.is_nan() { 0.0 } else { x.clamp(0.0, self.ev_bins as f64 - 1.0) };
        b as u64 + 1
    }
}

/// Packs evidence into a state index.
pub fn discretize(evidence: &EvidenceState, cfg: &DiscretizerConfig) -> u64 {
    let mut idx = 0u64;
    for (k, r) in evidence.rel_p.iter().chain(evidence.rel_v.iter()).enumerate() {
        idx |= r.code() << (2 * k);
    }
    if let Some(margin) = cfg.ev_order_margin {
        for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            let rel = match (evidence.ev[a], evidence.ev[b]) {
                (Some(x), Some(y)) => true_relation(x, y, margin),
                _ => Relation::Unknown,
            };
            idx |= rel.code() << (RELATION_BITS + 2 * k as u32);
        }
    }
    let base = cfg.ev_bins as u64 + 1;
    let mut digits = 0u64;
    for e in evidence.ev.iter().rev() {
        digits = digits * base + e.map_or(0, |v| cfg.ev_bin(v));
    }
    idx | (digits << (RELATION_BITS + ORDER_BITS))
}

/// The slot contents an index stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedState {
    pub rel_p: [Relation; 3],
    pub rel_v: [Relation; 3],
    pub ev_order: [Relation; 3],
    pub ev_bins: [u64; 3],
}

fn relation_from_code(c: u64) -> Relation {
    match c & 3 {
        0 => Relation::Unknown,
        1 => Relation::Greater,
        2 => Relation::Equal,
        _ => Relation::Less,
    }
}

/// Inverse of [`discretize`] up to bin resolution; `None` when the index is
/// not producible from any evidence state.
pub fn decode(index: u64, cfg: &DiscretizerConfig) -> Option<DecodedState> {
    let rel = |k: u32| relation_from_code(index >> (2 * k));
    let rel_p = [rel(0), rel(1), rel(2)];
    let rel_v = [rel(3), rel(4), rel(5)];
    let ev_order = [rel(6), rel(7), rel(8)];
    let base = cfg.ev_bins as u64 + 1;
    let mut digits = index >> (RELATION_BITS + ORDER_BITS);
    let mut bins = [0u64; 3];
    for b in bins.iter_mut() {
        *b = digits % base;
        digits /= base;
    }
    if digits != 0 {
        return None;
    }
    for (k, (a, b)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
        let both = bins[a] != 0 && bins[b] != 0;
        let order = ev_order[k];
        match cfg.ev_order_margin {
            None if order != Relation::Unknown => return None,
            None => {}
            Some(_) if both == (order == Relation::Unknown) => return None,
            Some(_) => {
                // a strict order cannot contradict the bins
                let bad = match order {
                    Relation::Greater => bins[a] < bins[b],
                    Relation::Less => bins[a] > bins[b],
                    _ => false,
                };
                if bad {
                    return None;
                }
            }
        }
    }
    Some(DecodedState { rel_p, rel_v, ev_order, ev_bins: bins })
}

/// Action values and visit counts of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateValues {
    pub values: [f32; 12],
    pub visits: u32,
    #[serde(default)]
    pub action_visits: [u32; 12],
}

#[derive(Debug, Clone)]
pub struct QPolicy {
    discretizer: DiscretizerConfig,
    q_init: f32,
    table: FxHashMap<u64, StateValues>,
}

impl QPolicy {
    pub fn new(discretizer: DiscretizerConfig, q_init: f64) -> Self {
        QPolicy { discretizer, q_init: q_init as f32, table: FxHashMap::default() }
    }

    pub fn discretizer(&self) -> &DiscretizerConfig {
        &self.discretizer
    }

    pub fn q_init(&self) -> f64 {
        self.q_init as f64
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn state_index(&self, evidence: &EvidenceState) -> u64 {
        discretize(evidence, &self.discretizer)
    }

    /// Action values of `state`; unvisited states report `q_init` everywhere.
    #[inline]
    pub fn values(&self, state: u64) -> [f32; 12] {
        self.table.get(&state).map_or([self.q_init; 12], |e| e.values)
    }

    pub fn value(&self, state: u64, action: usize) -> f64 {
        self.values(state)[action] as f64
    }

    pub fn visits(&self, state: u64) -> u32 {
        self.table.get(&state).map_or(0, |e| e.visits)
    }

    /// Number of updates `action` has received in `state`.
    pub fn action_visits(&self, state: u64, action: usize) -> u32 {
        self.table.get(&state).map_or(0, |e| e.action_visits[action])
    }

    pub fn set_value(&mut self, state: u64, action: usize, value: f64) {
        self.entry(state).values[action] = value as f32;
    }

    fn entry(&mut self, state: u64) -> &mut StateValues {
        let init = self.q_init;
        self.table.entry(state).or_insert(StateValues { values: [init; 12], visits: 0, action_visits: [0; 12] })
    }

    pub fn states(&self) -> impl Iterator<Item = (u64, &StateValues)> {
        self.table.iter().map(|(k, v)| (*k, v))
    }

    /// Largest value over the legal actions of `state`.
    pub fn max_value(&self, state: u64, mask: ActionMask) -> f64 {
        let vals = self.values(state);
        mask.ids().map(|i| vals[i] as f64).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Epsilon-greedy choice over the legal actions; greedy ties break uniformly.
pub fn select_action<R: Rng + ?Sized>(
    policy: &QPolicy,
    state: u64,
    epsilon: f64,
    mask: ActionMask,
    rng: &mut R,
) -> Result<Action, AgentError> {
    let n = mask.count();
    if n == 0 {
        return Err(AgentError::EmptyMask);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        let k = rng.random_range(0..n);
        return Ok(Action::ALL[mask.nth_id(k).expect("k < count")]);
    }
    let vals = policy.values(state);
    let mut best = f32::NEG_INFINITY;
    let mut best_id = usize::MAX;
    let mut ties = 0u32;
    for id in mask.ids() {
        let v = vals[id];
        if v > best {
            best = v;
            best_id = id;
            ties = 1;
        } else if v == best {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best_id = id;
            }
        }
    }
    Ok(Action::ALL[best_id])
}

/// One observed transition for a TD update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: u64,
    pub action: usize,
    pub reward: f64,
    pub next_state: u64,
    pub next_mask: ActionMask,
    pub done: bool,
}

/// One-step Q-learning:
/// `Q(s,a) += lr * (r + gamma * max_{a' legal} Q(s',a') * [not done] - Q(s,a))`.
pub fn td_update(policy: &mut QPolicy, t: &Transition, learning_rate: f64, gamma: f64) {
    let bootstrap =
        if t.done || t.next_mask.is_empty() { 0.0 } else { gamma * policy.max_value(t.next_state, t.next_mask) };
    let e = policy.entry(t.state);
    e.visits = e.visits.saturating_add(1);
    e.action_visits[t.action] = e.action_visits[t.action].saturating_add(1);
    let q = e.values[t.action] as f64;
    e.values[t.action] = (q + learning_rate * (t.reward + bootstrap - q)) as f32;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    /// Floor of the per-pair step size `clamp(1/(n+1), learning_rate_final,
    /// learning_rate)`, `n` being the pair's update count. Equal to
    /// `learning_rate` for a constant step size.
    pub learning_rate_final: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Fraction of the training budget over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub n_train_samples: u64,
    pub q_init: f64,
    /// Episodes per learning-curve point.
    pub curve_window: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            learning_rate: 0.1,
            learning_rate_final: 0.05,
            epsilon_initial: 1.0,
            epsilon_final: 0.05,
            epsilon_decay_fraction: 0.5,
            n_train_samples: 3_000_000,
            q_init: 5.0,
            curve_window: 10_000,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("learning_rate", format!("must be in (0, 1], got {}", self.learning_rate)));
        }
        if !(self.learning_rate_final > 0.0 && self.learning_rate_final <= self.learning_rate) {
            return Err(invalid(
                "learning_rate_final",
                format!("must be in (0, learning_rate], got {}", self.learning_rate_final),
            ));
        }
        for (key, v) in [("epsilon_initial", self.epsilon_initial), ("epsilon_final", self.epsilon_final)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(key, format!("must be in [0, 1], got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return Err(invalid("epsilon_decay_fraction", "must be in [0, 1]"));
        }
        if !self.q_init.is_finite() {
            return Err(invalid("q_init", "must be finite"));
        }
        if self.curve_window == 0 {
            return Err(invalid("curve_window", "must be >= 1"));
        }
        Ok(())
    }

    /// Step size for a state-action pair already updated `n` times.
    pub fn step_size(&self, n: u32) -> f64 {
        (1.0 / (n as f64 + 1.0)).clamp(self.learning_rate_final, self.learning_rate)
    }

    /// Exploration rate after `step` of `n_train_samples` environment steps.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        let horizon = self.epsilon_decay_fraction * self.n_train_samples as f64;
        if horizon <= 0.0 {
            return self.epsilon_final;
        }
        let frac = (step as f64 / horizon).min(1.0);
        self.epsilon_initial + (self.epsilon_final - self.epsilon_initial) * frac
    }
}

/// Where training and evaluation episodes come from.
#[derive(Debug, Clone)]
pub enum TaskSource {
    /// Fresh draws from the ecological distribution.
    Random(TaskSampler),
    /// Cycle through fixed sets; with `shuffle` each episode places the
    /// options at uniformly random positions.
    Fixed { sets: Vec<ChoiceSet>, shuffle: bool },
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl TaskSource {
    pub fn next<R: Rng + ?Sized>(&self, episode: usize, rng: &mut R) -> Result<ChoiceSet, TaskError> {
        match self {
            TaskSource::Random(s) => s.sample_choice_set(rng),
            TaskSource::Fixed { sets, shuffle } => {
                if sets.is_empty() {
                    return Err(TaskError::InvalidSpec("empty task list".into()));
                }
                let cs = sets[episode % sets.len()];
                Ok(if *shuffle { cs.permuted(PERMUTATIONS[rng.random_range(0..6)]) } else { cs })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub steps: u64,
    pub episodes: u64,
    pub mean_return: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: QPolicy,
    pub curve: Vec<CurvePoint>,
}

/// Q-learning on episodes drawn from `tasks` until `n_train_samples`
/// environment steps are consumed. Exploration respects the agent's mask.
pub fn train<R: Rng + ?Sized>(
    tasks: &TaskSource,
    kind: AgentKind,
    env: &Environment,
    learner: &LearnerConfig,
    discretizer: &DiscretizerConfig,
    rng: &mut R,
) -> Result<TrainOutput, AgentError> {
    learner.validate()?;
    discretizer.validate()?;
    let gamma = env.episode_config().gamma;
    let mut policy = QPolicy::new(*discretizer, learner.q_init);
    let mut curve = Vec::new();
    let mut steps = 0u64;
    let mut episodes = 0u64;
    let mut window_sum = 0.0;
    let mut window_n = 0usize;

    'outer: while steps < learner.n_train_samples {
        let cs = tasks.next(episodes as usize, rng)?;
        let mut ep = env.reset(cs, kind);
        let mut state = discretize(ep.evidence(), discretizer);
        loop {
            let mask = ep.legal_actions();
            let eps = learner.epsilon_at(steps);
            let action = select_action(&policy, state, eps, mask, rng)?;
            let res = ep.step(action, rng)?;
            let next_state = discretize(&res.evidence, discretizer);
            let next_mask = if res.done { ActionMask::NONE } else { ep.legal_actions() };
            let lr = learner.step_size(policy.action_visits(state, action.id()));
            td_update(
                &mut policy,
                &Transition { state, action: action.id(), reward: res.reward, next_state, next_mask, done: res.done },
                lr,
                gamma,
            );
            steps += 1;
            state = next_state;
            if res.done {
                break;
            }
            if steps >= learner.n_train_samples {
                break 'outer;
            }
        }
        episodes += 1;
        window_sum += ep.total_reward();
        window_n += 1;
        if window_n == learner.curve_window {
            curve.push(CurvePoint { steps, episodes, mean_return: window_sum / window_n as f64 });
            window_sum = 0.0;
            window_n = 0;
        }
    }
    if window_n > 0 {
        curve.push(CurvePoint { steps, episodes, mean_return: window_sum / window_n as f64 });
    }
    Ok(TrainOutput { policy, curve })
}

/// Anything that can act in an episode. Oracle policies may read the latent
/// choice set; learned policies only read the evidence.
pub trait Policy {
    fn act<R: Rng + ?Sized>(&self, episode: &Episode, rng: &mut R) -> Result<Action, AgentError>;
}

impl Policy for QPolicy {
    fn act<R: Rng + ?Sized>(&self, episode: &Episode, rng: &mut R) -> Result<Action, AgentError> {
        let s = discretize(episode.evidence(), &self.discretizer);
        select_action(self, s, 0.0, episode.legal_actions(), rng)
    }
}

/// Aggregate behaviour of a policy over a batch of evaluation episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    /// Mean objective EV of the chosen option.
    pub mean_chosen_ev: f64,
    /// Fraction of choices that earned the correct-choice reward.
    pub accuracy: f64,
    pub mean_return: f64,
    pub mean_comparisons: f64,
    pub mean_calculations: f64,
    /// Target, competitor, decoy shares over role-labelled episodes.
    pub role_shares: Option<[f64; 3]>,
}

impl EvalMetrics {
    pub fn share(&self, role: Role) -> Option<f64> {
        self.role_shares.map(|s| s[role.index()])
    }

    pub fn mean_of(items: &[EvalMetrics]) -> Option<EvalMetrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: &dyn Fn(&EvalMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        let role_shares = if items.iter().all(|m| m.role_shares.is_some()) {
            let mut s = [0.0; 3];
            for m in items {
                let r = m.role_shares.expect("checked");
                for k in 0..3 {
                    s[k] += r[k] / n;
                }
            }
            Some(s)
        } else {
            None
        };
        Some(EvalMetrics {
            episodes: items.iter().map(|m| m.episodes).sum(),
            mean_chosen_ev: avg(&|m| m.mean_chosen_ev),
            accuracy: avg(&|m| m.accuracy),
            mean_return: avg(&|m| m.mean_return),
            mean_comparisons: avg(&|m| m.mean_comparisons),
            mean_calculations: avg(&|m| m.mean_calculations),
            role_shares,
        })
    }
}

/// Runs `n_episodes` greedy episodes of `policy` and summarises them.
pub fn evaluate<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    tasks: &TaskSource,
    n_episodes: usize,
    env: &Environment,
    kind: AgentKind,
    rng: &mut R,
) -> Result<EvalMetrics, AgentError> {
    let mut ev_sum = 0.0;
    let mut correct = 0usize;
    let mut ret = 0.0;
    let mut comps = 0u64;
    let mut calcs = 0u64;
    let mut role_counts = [0usize; 3];
    let mut labelled = 0usize;
    for i in 0..n_episodes {
        let cs = tasks.next(i, rng)?;
        let mut ep = env.reset(cs, kind);
        while !ep.is_done() {
            let a = policy.act(&ep, rng)?;
            ep.step(a, rng)?;
        }
        let info = ep.outcome().expect("finished episode has an outcome");
        ev_sum += cs.option(info.chosen).expected_value();
        correct += info.correct as usize;
        ret += ep.total_reward();
        comps += ep.comparisons() as u64;
        calcs += ep.calculations() as u64;
        if let Some(role) = cs.role_of(info.chosen) {
            role_counts[role.index()] += 1;
            labelled += 1;
        }
    }
    let n = n_episodes.max(1) as f64;
    let role_shares = (labelled > 0).then(|| role_counts.map(|c| c as f64 / labelled as f64));
    Ok(EvalMetrics {
        episodes: n_episodes,
        mean_chosen_ev: ev_sum / n,
        accuracy: correct as f64 / n,
        mean_return: ret / n,
        mean_comparisons: comps as f64 / n,
        mean_calculations: calcs as f64 / n,
        role_shares,
    })
}

/// Per-seed metrics plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBreakdown {
    pub per_seed: Vec<(u64, EvalMetrics)>,
    pub mean: EvalMetrics,
}

pub fn evaluate_seeds<P: Policy>(
    policy: &P,
    tasks: &TaskSource,
    n_episodes: usize,
    env: &Environment,
    kind: AgentKind,
    seeds: &[u64],
) -> Result<SeedBreakdown, AgentError> {
    let per_seed = seeds
        .iter()
        .map(|&s| {
            let mut rng = crate::rng_for(s, crate::Stream::Evaluation);
            evaluate(policy, tasks, n_episodes, env, kind, &mut rng).map(|m| (s, m))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = EvalMetrics::mean_of(&per_seed.iter().map(|(_, m)| *m).collect::<Vec<_>>())
        .ok_or_else(|| invalid("seeds", "must not be empty"))?;
    Ok(SeedBreakdown { per_seed, mean })
}

pub const ARTIFACT_FORMAT: &str = "cclab-policy";
pub const ARTIFACT_VERSION: u32 = 1;

/// Serialized form of a trained policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyArtifact {
    pub format: String,
    pub version: u32,
    pub config_fingerprint: String,
    pub agent_kind: AgentKind,
    pub discretizer: DiscretizerConfig,
    pub q_init: f64,
    /// `(state index, 12 action values, visits)`, sorted by index.
    pub states: Vec<(u64, [f32; 12], u32)>,
}

impl PolicyArtifact {
    pub fn from_policy(policy: &QPolicy, kind: AgentKind, fingerprint: &str) -> Self {
        let mut states: Vec<_> = policy.states().map(|(k, v)| (k, v.values, v.visits)).collect();
        states.sort_unstable_by_key(|s| s.0);
        PolicyArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            config_fingerprint: fingerprint.to_string(),
            agent_kind: kind,
            discretizer: policy.discretizer,
            q_init: policy.q_init(),
            states,
        }
    }

    pub fn into_policy(self) -> Result<QPolicy, AgentError> {
        if self.format != ARTIFACT_FORMAT {
            return Err(AgentError::Artifact(format!("unexpected format `{}`", self.format)));
        }
        if self.version != ARTIFACT_VERSION {
            return Err(AgentError::Artifact(format!("unsupported version {}", self.version)));
        }
        self.discretizer.validate()?;
        let mut policy = QPolicy::new(self.discretizer, self.q_init);
        for (k, values, visits) in self.states {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(AgentError::Artifact(format!("non-finite value in state {k}")));
            }
            policy.table.insert(k, StateValues { values, visits, action_visits: [0; 12] });
        }
        Ok(policy)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), AgentError> {
        serde_json::to_writer(out, self).map_err(|e| AgentError::Artifact(e.to_string()))
    }

    pub fn read<Rd: Read>(input: Rd) -> Result<Self, AgentError> {
        serde_json::from_reader(input).map_err(|e| AgentError::Artifact(e.to_string()))
    }
}
