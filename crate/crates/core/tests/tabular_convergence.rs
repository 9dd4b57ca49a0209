use drlc_core::tabular::{q_learning, value_iteration, FiniteMdp, QLearningConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn q_learning_matches_value_iteration_on_random_mdps() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = FiniteMdp::random_deterministic(5, 3, 0.9, &mut rng).unwrap();
        let oracle = value_iteration(&mdp, 1e-12).unwrap();
        let run = q_learning(&mdp, &QLearningConfig::default(), &mut rng).unwrap();
        let gap = run.q.sup_distance(&oracle);
        assert!(run.steps <= 100_000);
        assert!(gap <= 1e-3, "seed {seed}: sup gap {gap}");
    }
}

/// Sampled transitions leave a noise floor well above the deterministic case.
#[test]
fn stochastic_transitions_approach_value_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mdp = FiniteMdp::random_stochastic(5, 3, 0.9, &mut rng).unwrap();
    let oracle = value_iteration(&mdp, 1e-12).unwrap();
    let config = QLearningConfig {
        max_total_steps: 400_000,
        alpha0: 0.2,
        ..QLearningConfig::default()
    };
    let run = q_learning(&mdp, &config, &mut rng).unwrap();
    let gap = run.q.sup_distance(&oracle);
    assert!(gap <= 0.2, "sup gap {gap}");
}
