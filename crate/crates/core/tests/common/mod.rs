#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use cclab::agent::{td_update, DiscretizerConfig, QPolicy, Transition};
use cclab::config::RunConfig;
use cclab::env::ActionMask;
use cclab::oracle::ToyMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A config small enough to run every experiment in seconds.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seeds = vec![1, 2, 3];
    cfg.jobs = 2;
    cfg.agent.n_train_samples = 20_000;
    cfg.agent.eval_episodes = 200;
    cfg.experiments.noise_levels = vec![0.0, 0.3];
    cfg.experiments.p_error_grid = vec![0.1, 0.3];
    cfg.experiments.sigma_calc_grid = vec![2.0, 6.0];
    cfg.experiments.cost_scale_grid = vec![1.0, 3.0];
    cfg
}

pub fn cclab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cclab")).args(args).env("CCLAB_OUT_DIR", out).output().expect("binary runs")
}

/// Tiny-budget overrides as CLI flags.
pub const TINY_FLAGS: &[&str] = &[
    "--seeds",
    "1,2",
    "--jobs",
    "2",
    "--agent.n_train_samples",
    "5000",
    "--agent.eval_episodes",
    "100",
    "--experiments.noise_levels",
    "[0.0, 0.3]",
    "--experiments.p_error_grid",
    "[0.1, 0.3]",
    "--experiments.sigma_calc_grid",
    "[2.0, 6.0]",
    "--experiments.cost_scale_grid",
    "[1.0, 3.0]",
];

/// Data lines of a CSV: header first, comment lines dropped.
pub fn csv_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

/// Runs Q-learning on uniformly random (state, action) pairs, following each
/// sampled transition with one TD update.
pub fn q_learn(mdp: &ToyMdp, updates: usize, learning_rate: f64, seed: u64) -> QPolicy {
    let mut policy = QPolicy::new(DiscretizerConfig::default(), 0.0);
    let mask = ActionMask::from_bits((1u16 << mdp.n_actions) - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = 0;
    for _ in 0..updates {
        let action = rng.random_range(0..mdp.n_actions);
        let out = mdp.sample(state, action, &mut rng);
        let t = Transition {
            state: state as u64,
            action,
            reward: out.reward,
            next_state: out.next.unwrap_or(0) as u64,
            next_mask: mask,
            done: out.next.is_none(),
        };
        td_update(&mut policy, &t, learning_rate, mdp.gamma);
        state = match out.next {
            Some(n) if rng.random::<f64>() > 0.05 => n,
            _ => rng.random_range(0..mdp.n_states),
        };
    }
    policy
}

pub fn sup_norm(mdp: &ToyMdp, policy: &QPolicy, q: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            worst = worst.max((policy.value(s as u64, a) - q[s][a]).abs());
        }
    }
    worst
}
