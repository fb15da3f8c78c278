//! Invariants over randomly generated inputs.

use cclab::agent::{decode, discretize, select_action, DiscretizerConfig, QPolicy};
use cclab::config::RunConfig;
use cclab::env::{legal_actions, Action, ActionMask, AgentKind, EpisodeConfig, EvidenceState, Observation, Relation};
use cclab::oracle::argmax_ev_policy;
use cclab::stats::{ci95, spearman};
use cclab::tasks::{
    dominates, make_context_task, ChoiceSet, ContextKind, ContextTaskSpec, DecoyOffset, Gamble, Role, TaskDistribution,
};
use cclab::{Environment, ObservationModel, RewardModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gamble() -> impl Strategy<Value = Gamble> {
    (0.0..=1.0f64, 0.1..60.0f64).prop_map(|(p, v)| Gamble::new(p, v).unwrap())
}

fn choice_set() -> impl Strategy<Value = ChoiceSet> {
    [gamble(), gamble(), gamble()].prop_map(ChoiceSet::new)
}

fn kind() -> impl Strategy<Value = AgentKind> {
    prop::sample::select(AgentKind::ALL.to_vec())
}

fn relation() -> impl Strategy<Value = Relation> {
    prop::sample::select(vec![Relation::Unknown, Relation::Greater, Relation::Equal, Relation::Less])
}

fn evidence() -> impl Strategy<Value = EvidenceState> {
    (
        [relation(), relation(), relation()],
        [relation(), relation(), relation()],
        [prop::option::of(-10.0..60.0f64), prop::option::of(-10.0..60.0f64), prop::option::of(-10.0..60.0f64)],
    )
        .prop_map(|(rel_p, rel_v, ev)| EvidenceState { rel_p, rel_v, ev })
}

fn noisy_env() -> impl Strategy<Value = Environment> {
    (0.0..8.0f64, 0.0..=1.0f64, 0.5..2.0f64, 0.0..0.5f64).prop_map(|(sigma, p_error, alpha, cost)| {
        let obs = ObservationModel { sigma_calc: sigma, p_error, alpha, ..ObservationModel::default() };
        let reward = RewardModel { cost_comparison: -cost / 10.0, cost_calculation: -cost, ..RewardModel::default() };
        Environment::new(obs, reward, EpisodeConfig::default()).unwrap()
    })
}

/// Plays a uniformly random legal policy to termination.
fn random_episode(env: &Environment, cs: ChoiceSet, kind: AgentKind, seed: u64) -> cclab::env::Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ep = env.reset(cs, kind).with_trace();
    while !ep.is_done() {
        let legal = ep.legal_actions();
        let a = Action::ALL[legal.nth_id(rng.random_range(0..legal.count())).unwrap()];
        ep.step(a, &mut rng).unwrap();
    }
    ep
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sampled_sets_are_valid_and_deterministic(seed in any::<u64>(), scale in 1.0..10.0f64) {
        let sampler = TaskDistribution::with_scale(scale).sampler().unwrap();
        let a = sampler.sample_choice_set(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = sampler.sample_choice_set(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
        for g in a.options() {
            prop_assert!((0.0..=1.0).contains(&g.p) && g.v > 0.0);
        }
    }

    #[test]
    fn attraction_decoy_dominated_by_target_only(p_t in 0.2..0.8f64, ev in 5.0..15.0f64, gap in 0.05..0.3f64, dp in 0.005..0.1f64, dv in 0.1..4.0f64) {
        let p_c = (p_t + gap).min(1.0);
        let target = Gamble::new(p_t, ev / p_t).unwrap();
        let competitor = Gamble::new(p_c, ev / p_c).unwrap();
        let spec = ContextTaskSpec { kind: ContextKind::Attraction, target, competitor, decoy_offset: DecoyOffset::new(dp, dv), tie_epsilon: 1e-6 };
        if let Ok(cs) = make_context_task(&spec) {
            let (t, c, d) = (cs.option(0), cs.option(1), cs.option(2));
            prop_assert!((t.expected_value() - c.expected_value()).abs() < 1e-6);
            prop_assert!(dominates(t, d) && !dominates(c, d));
            prop_assert!(!dominates(t, c) && !dominates(c, t));
        }
    }

    #[test]
    fn default_context_tasks_keep_equal_ev(kind in prop::sample::select(vec![ContextKind::Attraction, ContextKind::Compromise, ContextKind::Similarity])) {
        let cs = RunConfig::default().decoys.context_task(kind).unwrap();
        let t = cs.position_of(Role::Target).unwrap();
        let c = cs.position_of(Role::Competitor).unwrap();
        prop_assert!((cs.option(t).expected_value() - cs.option(c).expected_value()).abs() < 1e-6);
    }

    #[test]
    fn episodes_terminate_with_one_choice(env in noisy_env(), cs in choice_set(), kind in kind(), seed in any::<u64>()) {
        let ep = random_episode(&env, cs, kind, seed);
        let trace = ep.trace().unwrap();
        prop_assert!(trace.len() <= env.episode_config().max_steps);
        let choices = trace.iter().filter(|r| Action::from_id(r.action_id).unwrap().is_choice()).count();
        prop_assert_eq!(choices, 1);
        prop_assert!(trace.last().unwrap().done);
        // the latent task never changes
        prop_assert_eq!(*ep.choice_set(), cs);
    }

    #[test]
    fn reward_decomposes_into_choice_and_costs(env in noisy_env(), cs in choice_set(), kind in kind(), seed in any::<u64>()) {
        let ep = random_episode(&env, cs, kind, seed);
        let r = env.reward_model();
        let info = ep.outcome().unwrap();
        let choice = if info.correct { r.reward_correct } else { r.reward_incorrect };
        let expected = choice + ep.comparisons() as f64 * r.cost_comparison + ep.calculations() as f64 * r.cost_calculation;
        prop_assert!((ep.total_reward() - expected).abs() < 1e-9);
        prop_assert_eq!(info.correct, r.is_correct(&cs, info.chosen));
    }

    #[test]
    fn masks_are_respected(env in noisy_env(), cs in choice_set(), kind in kind(), seed in any::<u64>()) {
        let ep = random_episode(&env, cs, kind, seed);
        for rec in ep.trace().unwrap() {
            let a = Action::from_id(rec.action_id).unwrap();
            prop_assert!(kind.mask().contains(a));
        }
        match kind {
            AgentKind::ComparisonOnly => prop_assert_eq!(ep.calculations(), 0),
            AgentKind::CalculationOnly => prop_assert_eq!(ep.comparisons(), 0),
            AgentKind::Integrated => {}
        }
    }

    #[test]
    fn observations_never_report_unknown(env in noisy_env(), cs in choice_set(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for a in Action::ALL.into_iter().filter(|a| a.is_comparison()) {
            let mut ep = env.reset(cs, AgentKind::Integrated);
            let step = ep.step(a, &mut rng).unwrap();
            prop_assert!(!matches!(step.observation, Observation::Relation(Relation::Unknown)));
        }
    }

    #[test]
    fn same_seed_same_trace(env in noisy_env(), cs in choice_set(), kind in kind(), seed in any::<u64>()) {
        let a = random_episode(&env, cs, kind, seed);
        let b = random_episode(&env, cs, kind, seed);
        prop_assert_eq!(a.trace(), b.trace());
    }

    #[test]
    fn last_step_forces_a_choice(kind in kind(), max_steps in 1usize..40) {
        let cfg = EpisodeConfig { max_steps, ..EpisodeConfig::default() };
        let mask = legal_actions(kind, max_steps - 1, &cfg);
        prop_assert_eq!(mask.count(), 3);
        prop_assert!(mask.actions().all(Action::is_choice));
    }

    #[test]
    fn discretize_is_in_range_and_decodes(ev in evidence()) {
        let cfg = DiscretizerConfig::default();
        let idx = discretize(&ev, &cfg);
        prop_assert!(idx < cfg.index_space());
        let d = decode(idx, &cfg).unwrap();
        prop_assert_eq!(d.rel_p, ev.rel_p);
        prop_assert_eq!(d.rel_v, ev.rel_v);
    }

    #[test]
    fn discretize_separates_relation_changes(ev in evidence(), slot in 0usize..6, r in relation()) {
        let cfg = DiscretizerConfig::default();
        let mut other = ev;
        if slot < 3 { other.rel_p[slot] = r } else { other.rel_v[slot - 3] = r }
        prop_assert_eq!(discretize(&ev, &cfg) == discretize(&other, &cfg), ev == other);
    }

    #[test]
    fn ev_estimates_clamp_at_range_edges(x in 40.0..1e6f64) {
        let cfg = DiscretizerConfig::default();
        let at = |v: f64| discretize(&EvidenceState { ev: [Some(v), None, None], ..EvidenceState::empty() }, &cfg);
        prop_assert_eq!(at(x), at(40.0));
        prop_assert_eq!(at(-x), at(0.0));
    }

    #[test]
    fn greedy_choice_ignores_constant_shifts(values in prop::array::uniform12(-20.0..20.0f32), shift in -50.0..50.0f32, bits in 1u16..0x1000, seed in any::<u64>()) {
        let mask = ActionMask::from_bits(bits);
        let mut a = QPolicy::new(DiscretizerConfig::default(), 0.0);
        let mut b = QPolicy::new(DiscretizerConfig::default(), 0.0);
        for (i, v) in values.iter().enumerate() {
            a.set_value(7, i, *v as f64);
            b.set_value(7, i, (*v + shift) as f64);
        }
        let best = mask.ids().map(|i| values[i]).fold(f32::NEG_INFINITY, f32::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = select_action(&a, 7, 0.0, mask, &mut rng).unwrap();
        prop_assert!(mask.contains(pick));
        prop_assert_eq!(values[pick.id()], best);
        let shifted = select_action(&b, 7, 0.0, mask, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        // rounding may merge or split near-ties; only compare clear winners
        let runner_up = mask.ids().filter(|&i| i != pick.id()).map(|i| values[i]).fold(f32::NEG_INFINITY, f32::max);
        if best - runner_up > 1e-3 {
            prop_assert_eq!(pick, shifted);
        }
    }

    #[test]
    fn argmax_invariant_under_value_rescaling(cs in choice_set(), k in 0.01..100.0f64) {
        let scaled = ChoiceSet::new(cs.options().map(|g| Gamble::new(g.p, g.v * k).unwrap()));
        let evs = cs.expected_values();
        let best = argmax_ev_policy(&cs);
        prop_assert_eq!(evs[best], cs.max_expected_value());
        // exact ties can be reordered by rounding; compare only clear argmaxes
        let clear = evs.iter().enumerate().all(|(i, e)| i == best || evs[best] - e > 1e-9 * evs[best].abs().max(1.0));
        if clear {
            prop_assert_eq!(argmax_ev_policy(&scaled), best);
        }
    }

    #[test]
    fn intervals_and_rank_correlations_are_well_formed(xs in prop::collection::vec(-100.0..100.0f64, 2..30), ys in prop::collection::vec(-100.0..100.0f64, 2..30)) {
        let ci = ci95(&xs).unwrap();
        prop_assert!(ci.ci_low <= ci.mean && ci.mean <= ci.ci_high);
        let n = xs.len().min(ys.len());
        if let Ok(rho) = spearman(&xs[..n], &ys[..n]) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        }
    }

    #[test]
    fn fingerprint_tracks_content_not_layout(p_error in 0.0..=1.0f64, seed in any::<u32>()) {
        let mut cfg = RunConfig::default();
        cfg.env.p_error = p_error;
        cfg.seed = seed as u64;
        let text = toml::to_string(&cfg).unwrap();
        let round = RunConfig::from_toml_str(&text, "mem").unwrap();
        prop_assert_eq!(round.fingerprint(), cfg.fingerprint());
        // reversing the order of top-level tables leaves the fingerprint alone
        let value: toml::Table = toml::from_str(&text).unwrap();
        let mut reversed = toml::Table::new();
        for (k, v) in value.into_iter().rev() {
            reversed.insert(k, v);
        }
        let reordered = RunConfig::from_toml_str(&toml::to_string(&reversed).unwrap(), "mem").unwrap();
        prop_assert_eq!(reordered.fingerprint(), cfg.fingerprint());
        let mut moved = cfg.clone();
        moved.out_dir = Some("elsewhere".into());
        moved.jobs = 3;
        prop_assert_eq!(moved.fingerprint(), cfg.fingerprint());
    }
}
