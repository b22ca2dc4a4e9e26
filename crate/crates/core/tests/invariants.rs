use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhmb::agent::{optimistic_expectation, recover_state, OptimisticBox};
use rhmb::env::EnvState;
use rhmb::geometry::Polytope;
use rhmb::harness::{child_seed, realize, ExperimentConfig, PRESET_NAMES};
use rhmb::oracle::{fixed_point_residual, stationary_distribution};
use rhmb::selfcheck::brute_force_optimistic;
use rhmb::{ArmId, CountTables, InitialState, TransitionMatrix};

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn stochastic_matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(simplex(n), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimistic_maximizer_is_feasible_and_optimal(
        (center, values) in (2usize..6).prop_flat_map(|n| (simplex(n), prop::collection::vec(-5.0f64..5.0, n))),
        width in 0.0f64..1.0,
    ) {
        let bx = OptimisticBox::new(&center, width, &values);
        let (p, value) = optimistic_expectation(&bx);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (i, &pi) in p.iter().enumerate() {
            prop_assert!(pi >= bx.lower(i) - 1e-12 && pi <= bx.upper(i) + 1e-12);
        }
        let plain: f64 = center.iter().zip(&values).map(|(c, v)| c * v).sum();
        prop_assert!(value >= plain - 1e-12);
        let reference = brute_force_optimistic(&center, width, &values);
        prop_assert!((value - reference).abs() < 1e-10);
    }

    #[test]
    fn stationary_law_is_a_fixed_point(rows in (2usize..6).prop_flat_map(stochastic_matrix)) {
        let p = TransitionMatrix::new(rows).unwrap();
        let mu = stationary_distribution(&p).unwrap();
        prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(mu.iter().all(|&m| m > 0.0));
        prop_assert!(fixed_point_residual(&p, &mu) < 1e-12);
    }

    #[test]
    fn perturbed_actions_stay_in_ball_and_polytope(
        (a_star, radius, seed) in (prop::collection::vec(prop::bool::ANY, 2..6), 1e-9f64..2.0, any::<u64>()),
    ) {
        let dim = a_star.len();
        let cube = Polytope::hypercube(vec![0.0; dim], vec![1.0; dim]).unwrap();
        let vertex: Vec<f64> = a_star.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cube.sample_perturbed_action(&vertex, radius, &mut rng);
        prop_assert!(cube.contains(&x, 0.0));
        let dist: f64 = x.iter().zip(&vertex).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dist <= radius * (1.0 + 1e-12));
        prop_assert!(x != vertex);
    }

    #[test]
    fn counters_stay_consistent(seed in any::<u64>(), preset in 0usize..4, steps in 1usize..400) {
        let mut cfg = ExperimentConfig::preset(PRESET_NAMES[preset]);
        cfg.seed = seed;
        let source = cfg.validate().unwrap();
        let real = realize(&cfg, &source, 0).unwrap();
        let spec = &real.spec;
        let sizes: Vec<Vec<usize>> = spec.thetas().sets().iter()
            .map(|arm| arm.iter().map(|s| s.len()).collect())
            .collect();
        let mut counts = CountTables::new(spec.num_states(), &sizes);
        let mut env = EnvState::init(spec, seed, InitialState::Stationary).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let center = spec.actions().argmax_linear(&vec![0.0; spec.dim()]).0;
        counts.tick();
        for k in 0..steps {
            let prev = env.current_state();
            let arm = ArmId(k % spec.num_arms());
            let action = spec.actions().sample_perturbed_action(&center, 0.5, &mut rng);
            let out = env.step(spec, arm, &action).unwrap();
            counts.record_transition(prev, out.state, arm, out.theta_index).unwrap();
        }
        prop_assert!(counts.is_consistent());
        prop_assert_eq!(counts.t(), steps as u64 + 1);
    }

    #[test]
    fn perturbed_play_recovers_the_hidden_state(seed in any::<u64>(), preset in 0usize..4) {
        let mut cfg = ExperimentConfig::preset(PRESET_NAMES[preset]);
        cfg.seed = seed;
        let source = cfg.validate().unwrap();
        let real = realize(&cfg, &source, 0).unwrap();
        let spec = &real.spec;
        let mut env = EnvState::init(spec, seed, InitialState::Stationary).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for k in 0..200 {
            let arm = ArmId(k % spec.num_arms());
            let dir: Vec<f64> = (0..spec.dim()).map(|i| if (k >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let vertex = spec.actions().argmax_linear(&dir).0;
            let action = spec.actions().sample_perturbed_action(&vertex, 1e-3, &mut rng);
            let out = env.step(spec, arm, &action).unwrap();
            let sets: Vec<Vec<Vec<f64>>> = spec.thetas().arm(arm).iter().map(|s| s.vectors.clone()).collect();
            let r = recover_state(&sets, &action, out.reward);
            prop_assert_eq!(r.state, out.state);
            prop_assert_eq!(r.theta_index, out.theta_index);
            prop_assert!(r.diagnostic.is_none());
        }
    }

    #[test]
    fn child_seeds_differ_across_streams(master in any::<u64>(), r in 0u32..1000, j in 0u32..1000) {
        let a = child_seed(master, r, j, 1);
        prop_assert_ne!(a, child_seed(master, r, j, 2));
        prop_assert_ne!(a, child_seed(master, r + 1, j, 1));
        prop_assert_ne!(a, child_seed(master, r, j + 1, 1));
    }
}

#[test]
fn preset_configs_round_trip_through_toml() {
    for name in PRESET_NAMES {
        let cfg = ExperimentConfig::preset(name);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let mut text = ExperimentConfig::preset("1a").to_toml_string().unwrap();
    text.insert_str(0, "horizn = 10\n");
    assert!(ExperimentConfig::from_toml_str(&text).is_err());
}
