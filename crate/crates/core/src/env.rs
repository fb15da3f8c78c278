//! The contextual-choice POMDP: latent gambles, twelve actions, noisy
//! comparison and calculation observations, and episode bookkeeping.
//!
//! The agent never sees the gambles. Each observation action writes one slot of
//! an [`EvidenceState`]: six pairwise order relations (probabilities and
//! values) and three noisy expected-value estimates. A repeated observation
//! overwrites its slot. Choosing terminates the episode with `reward_correct`
//! when the chosen option's objective EV is within `tie_epsilon` of the best
//! option, `reward_incorrect` otherwise.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tasks::{ChoiceSet, Gamble};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid config: `{key}` {constraint}")]
    InvalidConfig { key: &'static str, constraint: String },
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("action {action} is not legal for a {kind} agent at step {step}")]
    IllegalAction { action: Action, kind: AgentKind, step: usize },
}

fn invalid(key: &'static str, constraint: impl Into<String>) -> EnvError {
    EnvError::InvalidConfig { key, constraint: constraint.into() }
}

/// Unordered option pair, in canonical order XY, XZ, YZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    XY,
    XZ,
    YZ,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::XY, Pair::XZ, Pair::YZ];

    pub fn indices(self) -> (usize, usize) {
        match self {
            Pair::XY => (0, 1),
            Pair::XZ => (0, 2),
            Pair::YZ => (1, 2),
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }
}

pub const OPTION_NAMES: [&str; 3] = ["X", "Y", "Z"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    CompareP(Pair),
    CompareV(Pair),
    Calculate(usize),
    Choose(usize),
}

impl Action {
    pub const COUNT: usize = 12;

    /// All actions in canonical id order: six comparisons, three
    /// calculations, three choices.
    pub const ALL: [Action; 12] = [
        Action::CompareP(Pair::XY),
        Action::CompareP(Pair::XZ),
        Action::CompareP(Pair::YZ),
        Action::CompareV(Pair::XY),
        Action::CompareV(Pair::XZ),
        Action::CompareV(Pair::YZ),
        Action::Calculate(0),
        Action::Calculate(1),
        Action::Calculate(2),
        Action::Choose(0),
        Action::Choose(1),
        Action::Choose(2),
    ];

    pub fn id(self) -> usize {
        match self {
            Action::CompareP(p) => p.slot(),
            Action::CompareV(p) => 3 + p.slot(),
            Action::Calculate(i) => 6 + i,
            Action::Choose(i) => 9 + i,
        }
    }

    pub fn from_id(id: usize) -> Option<Action> {
        Action::ALL.get(id).copied()
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Action::CompareP(_) | Action::CompareV(_))
    }

    pub fn is_calculation(self) -> bool {
        matches!(self, Action::Calculate(_))
    }

    pub fn is_choice(self) -> bool {
        matches!(self, Action::Choose(_))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pair = |p: &Pair| {
            let (a, b) = p.indices();
            format!("{}{}", OPTION_NAMES[a], OPTION_NAMES[b])
        };
        match self {
            Action::CompareP(p) => write!(f, "compare_p({})", pair(p)),
            Action::CompareV(p) => write!(f, "compare_v({})", pair(p)),
            Action::Calculate(i) => write!(f, "calculate({})", OPTION_NAMES[*i]),
            Action::Choose(i) => write!(f, "choose({})", OPTION_NAMES[*i]),
        }
    }
}

/// Set of legal actions, one bit per canonical action id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionMask(u16);

impl ActionMask {
    pub const ALL: ActionMask = ActionMask(0x0fff);
    pub const NONE: ActionMask = ActionMask(0);
    pub const COMPARISONS: ActionMask = ActionMask(0x003f);
    pub const CALCULATIONS: ActionMask = ActionMask(0x01c0);
    pub const CHOICES: ActionMask = ActionMask(0x0e00);

    pub fn from_bits(bits: u16) -> Self {
        ActionMask(bits & Self::ALL.0)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, a: Action) -> bool {
        self.contains_id(a.id())
    }

    #[inline]
    pub fn contains_id(self, id: usize) -> bool {
        id < Action::COUNT && self.0 & (1 << id) != 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn without(self, other: ActionMask) -> Self {
        ActionMask(self.0 & !other.0)
    }

    pub fn ids(self) -> impl Iterator<Item = usize> {
        (0..Action::COUNT).filter(move |&i| self.contains_id(i))
    }

    pub fn actions(self) -> impl Iterator<Item = Action> {
        self.ids().map(|i| Action::ALL[i])
    }

    /// The `n`-th legal action id (0-based), if any.
    pub fn nth_id(self, n: usize) -> Option<usize> {
        self.ids().nth(n)
    }
}

/// Which observation types an agent may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Integrated,
    ComparisonOnly,
    CalculationOnly,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Integrated, AgentKind::ComparisonOnly, AgentKind::CalculationOnly];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Integrated => "integrated",
            AgentKind::ComparisonOnly => "comparison_only",
            AgentKind::CalculationOnly => "calculation_only",
        }
    }

    pub fn mask(self) -> ActionMask {
        match self {
            AgentKind::Integrated => ActionMask::ALL,
            AgentKind::ComparisonOnly => ActionMask::ALL.without(ActionMask::CALCULATIONS),
            AgentKind::CalculationOnly => ActionMask::ALL.without(ActionMask::COMPARISONS),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown agent kind `{s}`"))
    }
}

/// Legal actions for `kind` at `step_index`; the final step allows only choices.
pub fn legal_actions(kind: AgentKind, step_index: usize, cfg: &EpisodeConfig) -> ActionMask {
    if step_index + 1 >= cfg.max_steps {
        ActionMask::CHOICES
    } else {
        kind.mask()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum Relation {
    #[default]
    Unknown = 0,
    Greater = 1,
    Equal = 2,
    Less = 3,
}

impl Relation {
    pub const OUTCOMES: [Relation; 3] = [Relation::Greater, Relation::Equal, Relation::Less];

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Unknown => "?",
            Relation::Greater => ">",
            Relation::Equal => "=",
            Relation::Less => "<",
        }
    }
}

pub fn true_relation(a: f64, b: f64, tie_epsilon: f64) -> Relation {
    if a - b > tie_epsilon {
        Relation::Greater
    } else if b - a > tie_epsilon {
        Relation::Less
    } else {
        Relation::Equal
    }
}

/// Reports `true_rel` with probability `1 - p_error`, otherwise a uniform draw
/// from {>, =, <}.
pub fn observe_comparison<R: Rng + ?Sized>(true_rel: Relation, p_error: f64, rng: &mut R) -> Relation {
    debug_assert!(true_rel != Relation::Unknown);
    if p_error > 0.0 && rng.random::<f64>() < p_error {
        Relation::OUTCOMES[rng.random_range(0..3)]
    } else {
        true_rel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Absolute,
    CoefficientOfVariation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub sigma_calc: f64,
    pub noise_mode: NoiseMode,
    pub cv: f64,
    pub p_error: f64,
    pub alpha: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        ObservationModel { sigma_calc: 4.0, noise_mode: NoiseMode::Absolute, cv: 0.0, p_error: 0.1, alpha: 1.0 }
    }
}

impl ObservationModel {
    pub fn noiseless() -> Self {
        ObservationModel { sigma_calc: 0.0, cv: 0.0, p_error: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.sigma_calc >= 0.0 && self.sigma_calc.is_finite()) {
            return Err(invalid("sigma_calc", format!("must be >= 0, got {}", self.sigma_calc)));
        }
        if !(self.cv >= 0.0 && self.cv.is_finite()) {
            return Err(invalid("cv", format!("must be >= 0, got {}", self.cv)));
        }
        if !(0.0..=1.0).contains(&self.p_error) {
            return Err(invalid("p_error", format!("must be in [0, 1], got {}", self.p_error)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Noise-free subjective value `p^alpha * v`.
    pub fn subjective_value(&self, g: &Gamble) -> f64 {
        if self.alpha == 1.0 {
            g.p * g.v
        } else {
            g.p.powf(self.alpha) * g.v
        }
    }

    pub fn calculation_sd(&self, g: &Gamble) -> f64 {
        match self.noise_mode {
            NoiseMode::Absolute => self.sigma_calc,
            NoiseMode::CoefficientOfVariation => self.cv * self.subjective_value(g).abs(),
        }
    }
}

/// Noisy subjective expected value `p^alpha * v + eps`.
pub fn observe_calculation<R: Rng + ?Sized>(g: &Gamble, model: &ObservationModel, rng: &mut R) -> f64 {
    let mean = model.subjective_value(g);
    let sd = model.calculation_sd(g);
    if sd > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        mean + sd * z
    } else {
        mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub reward_correct: f64,
    pub reward_incorrect: f64,
    pub cost_comparison: f64,
    pub cost_calculation: f64,
    pub tie_epsilon: f64,
}

impl Default for RewardModel {
    fn default() -> Self {
        RewardModel {
            reward_correct: 10.0,
            reward_incorrect: -10.0,
            cost_comparison: -0.01,
            cost_calculation: -0.1,
            tie_epsilon: crate::tasks::DEFAULT_TIE_EPSILON,
        }
    }
}

impl RewardModel {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.reward_correct > 0.0) {
            return Err(invalid("reward_correct", "must be > 0"));
        }
        if !(self.reward_incorrect < 0.0) {
            return Err(invalid("reward_incorrect", "must be < 0"));
        }
        if !(self.cost_comparison <= 0.0) {
            return Err(invalid("cost_comparison", format!("must be <= 0, got {}", self.cost_comparison)));
        }
        if !(self.cost_calculation <= 0.0) {
            return Err(invalid("cost_calculation", format!("must be <= 0, got {}", self.cost_calculation)));
        }
        if !(self.tie_epsilon >= 0.0) {
            return Err(invalid("tie_epsilon", "must be >= 0"));
        }
        Ok(())
    }

    /// Scales both observation costs by `factor`.
    pub fn with_cost_scale(mut self, factor: f64) -> Self {
        self.cost_comparison *= factor;
        self.cost_calculation *= factor;
        self
    }

    pub fn is_correct(&self, cs: &ChoiceSet, chosen: usize) -> bool {
        cs.option(chosen).expected_value() >= cs.max_expected_value() - self.tie_epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub gamma: f64,
    /// Pool repeated observations of a slot instead of keeping only the
    /// latest: calculations are averaged, comparisons report the most
    /// frequent relation seen (ties go to the latest).
    #[serde(default)]
    pub average_repeats: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { max_steps: 30, gamma: 0.99, average_repeats: false }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.max_steps < 1 {
            return Err(invalid("max_steps", "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", format!("must be in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// The agent-visible observation history: six relation slots and three
/// optional EV estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvidenceState {
    pub rel_p: [Relation; 3],
    pub rel_v: [Relation; 3],
    pub ev: [Option<f64>; 3],
}

impl EvidenceState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Relation(Relation),
    Estimate(f64),
    Chosen(usize),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Relation(r) => f.write_str(r.symbol()),
            Observation::Estimate(e) => write!(f, "{e:.6}"),
            Observation::Chosen(i) => f.write_str(OPTION_NAMES[*i]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceInfo {
    pub chosen: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub evidence: EvidenceState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: Option<ChoiceInfo>,
}

/// One line of an exported episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub action_id: usize,
    pub observation: String,
    pub reward: f64,
    pub done: bool,
}

/// Writes records as line-delimited JSON.
pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Immutable environment parameters; episodes are spawned from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    obs: ObservationModel,
    reward: RewardModel,
    episode: EpisodeConfig,
}

impl Environment {
    pub fn new(obs: ObservationModel, reward: RewardModel, episode: EpisodeConfig) -> Result<Self, EnvError> {
        obs.validate()?;
        reward.validate()?;
        episode.validate()?;
        Ok(Environment { obs, reward, episode })
    }

    pub fn observation_model(&self) -> &ObservationModel {
        &self.obs
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.reward
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.episode
    }

    /// Starts an episode on `cs` with empty evidence.
    pub fn reset(&self, cs: ChoiceSet, kind: AgentKind) -> Episode {
        Episode {
            env: *self,
            cs,
            kind,
            evidence: EvidenceState::empty(),
            ev_counts: [0; 3],
            rel_counts: [[0; 3]; 6],
            step_index: 0,
            done: false,
            comparisons: 0,
            calculations: 0,
            total_reward: 0.0,
            chosen: None,
            trace: None,
        }
    }
}

/// A single-owner episode in flight.
#[derive(Debug, Clone)]
pub struct Episode {
    env: Environment,
    cs: ChoiceSet,
    kind: AgentKind,
    evidence: EvidenceState,
    ev_counts: [u32; 3],
    /// Per relation slot (p then v), tallies of observed >, =, <.
    rel_counts: [[u32; 3]; 6],
    step_index: usize,
    done: bool,
    comparisons: u32,
    calculations: u32,
    total_reward: f64,
    chosen: Option<ChoiceInfo>,
    trace: Option<Vec<TraceRecord>>,
}

impl Episode {
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn evidence(&self) -> &EvidenceState {
        &self.evidence
    }

    pub fn choice_set(&self) -> &ChoiceSet {
        &self.cs
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn comparisons(&self) -> u32 {
        self.comparisons
    }

    pub fn calculations(&self) -> u32 {
        self.calculations
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn outcome(&self) -> Option<ChoiceInfo> {
        self.chosen
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn legal_actions(&self) -> ActionMask {
        legal_actions(self.kind, self.step_index, &self.env.episode)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: Action, rng: &mut R) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if !self.legal_actions().contains(action) {
            return Err(EnvError::IllegalAction { action, kind: self.kind, step: self.step_index });
        }
        let tie = self.env.reward.tie_epsilon;
        let options = *self.cs.options();
        let mut info = None;
        let (observation, reward) = match action {
            Action::CompareP(pair) | Action::CompareV(pair) => {
                let (a, b) = pair.indices();
                let (slot, tally, truth) = if let Action::CompareP(_) = action {
                    let truth = true_relation(options[a].p, options[b].p, tie);
                    (&mut self.evidence.rel_p[pair.slot()], &mut self.rel_counts[pair.slot()], truth)
                } else {
                    let truth = true_relation(options[a].v, options[b].v, tie);
                    (&mut self.evidence.rel_v[pair.slot()], &mut self.rel_counts[3 + pair.slot()], truth)
                };
                let seen = observe_comparison(truth, self.env.obs.p_error, rng);
                let k = Relation::OUTCOMES.iter().position(|&r| r == seen).expect("observed relation");
                tally[k] += 1;
                *slot = if self.env.episode.average_repeats {
                    let top = *tally.iter().max().expect("three outcomes");
                    if tally[k] == top {
                        seen
                    } else {
                        Relation::OUTCOMES[tally.iter().position(|&c| c == top).expect("max exists")]
                    }
                } else {
                    seen
                };
                self.comparisons += 1;
                (Observation::Relation(seen), self.env.reward.cost_comparison)
            }
            Action::Calculate(i) => {
                let e = observe_calculation(&options[i], &self.env.obs, rng);
                let n = self.ev_counts[i];
                let stored = match self.evidence.ev[i] {
                    Some(prev) if self.env.episode.average_repeats => prev + (e - prev) / (n as f64 + 1.0),
                    _ => e,
                };
                self.evidence.ev[i] = Some(stored);
                self.ev_counts[i] = n + 1;
                self.calculations += 1;
                (Observation::Estimate(e), self.env.reward.cost_calculation)
            }
            Action::Choose(i) => {
                let correct = self.env.reward.is_correct(&self.cs, i);
                self.done = true;
                let choice = ChoiceInfo { chosen: i, correct };
                self.chosen = Some(choice);
                info = Some(choice);
                let r = if correct { self.env.reward.reward_correct } else { self.env.reward.reward_incorrect };
                (Observation::Chosen(i), r)
            }
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                step: self.step_index,
                action_id: action.id(),
                observation: observation.to_string(),
                reward,
                done: self.done,
            });
        }
        self.step_index += 1;
        self.total_reward += reward;
        Ok(StepResult { evidence: self.evidence, observation, reward, done: self.done, info })
    }
}
