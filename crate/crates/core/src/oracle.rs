//! Ground-truth references: the Monte-Carlo bound on achievable EV, the
//! argmax-EV and random-choice reference policies, and value iteration on
//! small finite MDPs for checking the TD learner.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, Policy};
use crate::env::{Action, Episode};
use crate::tasks::{ChoiceSet, TaskDistribution, TaskError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("n_samples must be >= 1")]
    NoSamples,
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("value iteration did not converge within {iterations} sweeps (last delta {delta:e})")]
    NoConvergence { iterations: usize, delta: f64 },
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub estimate: f64,
    /// Sample sd / sqrt(n); reported as 0 when `n == 1`.
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// False when the standard error is undefined (a single sample).
    pub stderr_defined: bool,
}

impl OracleReport {
    fn from_samples(sum: f64, sum_sq: f64, n: u64, seed: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        if n < 2 {
            return OracleReport { estimate: mean, stderr: 0.0, n_samples: n, seed, stderr_defined: false };
        }
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        OracleReport { estimate: mean, stderr: (var / nf).sqrt(), n_samples: n, seed, stderr_defined: true }
    }

    /// `estimate,stderr,n,seed`
    pub fn csv_row(&self) -> String {
        format!("{:.6},{:.6},{},{}", self.estimate, self.stderr, self.n_samples, self.seed)
    }
}

fn monte_carlo<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    n_samples: u64,
    seed: u64,
    rng: &mut R,
    mut score: impl FnMut(&ChoiceSet, &mut R) -> f64,
) -> Result<OracleReport, OracleError> {
    if n_samples == 0 {
        return Err(OracleError::NoSamples);
    }
    let sampler = dist.sampler()?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let cs = sampler.sample_choice_set(rng)?;
        let x = score(&cs, rng);
        sum += x;
        sum_sq += x * x;
    }
    Ok(OracleReport::from_samples(sum, sum_sq, n_samples, seed))
}

/// Mean over sampled choice sets of the best option's EV.
pub fn max_ev_monte_carlo<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    n_samples: u64,
    seed: u64,
    rng: &mut R,
) -> Result<OracleReport, OracleError> {
    monte_carlo(dist, n_samples, seed, rng, |cs, _| cs.max_expected_value())
}

/// Mean over sampled choice sets of a uniformly chosen option's EV.
pub fn random_baseline<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    n_samples: u64,
    seed: u64,
    rng: &mut R,
) -> Result<OracleReport, OracleError> {
    monte_carlo(dist, n_samples, seed, rng, |cs, r| cs.option(r.random_range(0..3)).expected_value())
}

/// Index of the highest objective EV; ties go to the lowest index.
pub fn argmax_ev_policy(cs: &ChoiceSet) -> usize {
    let ev = cs.expected_values();
    let mut best = 0;
    for i in 1..3 {
        if ev[i] > ev[best] {
            best = i;
        }
    }
    best
}

/// Chooses the argmax-EV option immediately, reading the latent state.
#[derive(Debug, Clone, Copy, Default)]
pub struct ArgmaxOracle;

impl Policy for ArgmaxOracle {
    fn act<R: Rng + ?Sized>(&self, episode: &Episode, _rng: &mut R) -> Result<Action, AgentError> {
        Ok(Action::Choose(argmax_ev_policy(episode.choice_set())))
    }
}

/// Chooses uniformly at random without observing.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomChooser;

impl Policy for RandomChooser {
    fn act<R: Rng + ?Sized>(&self, _episode: &Episode, rng: &mut R) -> Result<Action, AgentError> {
        Ok(Action::Choose(rng.random_range(0..3)))
    }
}

/// Outcome of taking an action in a [`ToyMdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyOutcome {
    pub probability: f64,
    /// `None` for termination.
    pub next: Option<usize>,
    pub reward: f64,
}

/// A small finite MDP with explicit outcome tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// `outcomes[s][a]` lists the possible results of action `a` in state `s`.
    pub outcomes: Vec<Vec<Vec<ToyOutcome>>>,
}

impl ToyMdp {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: String| Err(OracleError::InvalidMdp(m));
        if self.outcomes.len() != self.n_states {
            return bad("outcome table does not match n_states".into());
        }
        for (s, row) in self.outcomes.iter().enumerate() {
            if row.len() != self.n_actions {
                return bad(format!("state {s} lists {} actions", row.len()));
            }
            for (a, outs) in row.iter().enumerate() {
                let total: f64 = outs.iter().map(|o| o.probability).sum();
                if outs.is_empty() || (total - 1.0).abs() > 1e-9 {
                    return bad(format!("outcomes of ({s},{a}) sum to {total}"));
                }
                if outs.iter().any(|o| o.next.is_some_and(|n| n >= self.n_states)) {
                    return bad(format!("({s},{a}) leads outside the state space"));
                }
            }
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        Ok(())
    }

    /// Samples one outcome of `(state, action)`.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> &ToyOutcome {
        let outs = &self.outcomes[state][action];
        let mut u = rng.random::<f64>();
        for o in outs {
            if u < o.probability {
                return o;
            }
            u -= o.probability;
        }
        outs.last().expect("validated non-empty")
    }
}

pub const VI_TOLERANCE: f64 = 1e-9;
pub const VI_MAX_SWEEPS: usize = 1_000_000;

/// Optimal action values by synchronous value iteration, to sup-norm change
/// below [`VI_TOLERANCE`].
pub fn toy_mdp_value_iteration(mdp: &ToyMdp) -> Result<Vec<Vec<f64>>, OracleError> {
    toy_mdp_value_iteration_with(mdp, VI_TOLERANCE, VI_MAX_SWEEPS)
}

pub fn toy_mdp_value_iteration_with(
    mdp: &ToyMdp,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<Vec<Vec<f64>>, OracleError> {
    mdp.validate()?;
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let mut delta = f64::INFINITY;
    for _ in 0..max_sweeps {
        let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        delta = 0.0;
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let new: f64 = mdp.outcomes[s][a]
                    .iter()
                    .map(|o| o.probability * (o.reward + o.next.map_or(0.0, |n| mdp.gamma * v[n])))
                    .sum();
                delta = delta.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if delta < tolerance {
            return Ok(q);
        }
    }
    Err(OracleError::NoConvergence { iterations: max_sweeps, delta })
}

/// Random MDP with deterministic transitions: every `(s, a)` pair moves to a
/// uniformly drawn successor (or terminates with probability `p_terminal`)
/// with a reward uniform in `[-1, 1]`.
pub fn random_toy_mdp<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    p_terminal: f64,
    rng: &mut R,
) -> ToyMdp {
    let outcomes = (0..n_states)
        .map(|_| {
            (0..n_actions)
                .map(|_| {
                    let next =
                        if rng.random::<f64>() < p_terminal { None } else { Some(rng.random_range(0..n_states)) };
                    vec![ToyOutcome { probability: 1.0, next, reward: rng.random_range(-1.0..=1.0) }]
                })
                .collect()
        })
        .collect();
    ToyMdp { n_states, n_actions, gamma, outcomes }
}
