//! Tabular Q-learning against value iteration on random finite MDPs.

mod common;

use cclab::agent::{td_update, DiscretizerConfig, QPolicy, Transition};
use cclab::env::ActionMask;
use cclab::oracle::{random_toy_mdp, toy_mdp_value_iteration, ToyMdp, ToyOutcome};
use common::{q_learn, sup_norm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn q_learning_matches_value_iteration_on_random_mdps() {
    let mut gen = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let mdp = random_toy_mdp(20, 4, 0.9, 0.1, &mut gen);
        let q = toy_mdp_value_iteration(&mdp).unwrap();
        let policy = q_learn(&mdp, 200_000, 0.5, k);
        let err = sup_norm(&mdp, &policy, &q);
        worst = worst.max(err);
        assert!(err < 1e-3, "mdp {k}: sup-norm {err}");
    }
    eprintln!("worst sup-norm over 100 MDPs: {worst:.2e}");
}

#[test]
fn two_state_chain() {
    // s0 --a0 (-0.1)--> s1 --a0 (+10)--> end; a1 terminates with 0 everywhere
    let step = |next, reward| vec![ToyOutcome { probability: 1.0, next, reward }];
    let mdp = ToyMdp {
        n_states: 2,
        n_actions: 2,
        gamma: 0.9,
        outcomes: vec![vec![step(Some(1), -0.1), step(None, 0.0)], vec![step(None, 10.0), step(None, 0.0)]],
    };
    let q = toy_mdp_value_iteration(&mdp).unwrap();
    assert!((q[0][0] - 8.9).abs() < 1e-9);
    let policy = q_learn(&mdp, 100_000, 0.5, 7);
    assert!(sup_norm(&mdp, &policy, &q) < 1e-3);
}

#[test]
fn stochastic_outcomes_converge_with_decaying_steps() {
    // one state, one action: reward 1 or 3 with equal odds, then stop
    let mdp = ToyMdp {
        n_states: 1,
        n_actions: 1,
        gamma: 0.5,
        outcomes: vec![vec![vec![
            ToyOutcome { probability: 0.5, next: None, reward: 1.0 },
            ToyOutcome { probability: 0.5, next: None, reward: 3.0 },
        ]]],
    };
    let q = toy_mdp_value_iteration(&mdp).unwrap();
    assert!((q[0][0] - 2.0).abs() < 1e-9);
    let mut policy = QPolicy::new(DiscretizerConfig::default(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 0..1_000_000u32 {
        let out = mdp.sample(0, 0, &mut rng);
        let t = Transition {
            state: 0,
            action: 0,
            reward: out.reward,
            next_state: 0,
            next_mask: ActionMask::from_bits(1),
            done: true,
        };
        td_update(&mut policy, &t, 1.0 / (n as f64 + 1.0), mdp.gamma);
    }
    assert!((policy.value(0, 0) - 2.0).abs() < 1e-2);
}
