//! Finite-MDP Q-learning checked against exact value iteration.

mod text;

pub use text::{parse_mdp, write_mdp};

use rand::Rng;

use crate::error::{Error, Result};

/// Finite MDP with tabular transitions and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `P[s][a][s']`, flattened state-major.
    pub transition: Vec<f64>,
    /// `R[s][a]`, flattened state-major.
    pub reward: Vec<f64>,
    pub gamma: f64,
    pub terminal: Vec<bool>,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let mdp = FiniteMdp {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            terminal,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::InvalidShape(
                "MDP needs at least one state and one action".into(),
            ));
        }
        if self.transition.len() != ns * na * ns
            || self.reward.len() != ns * na
            || self.terminal.len() != ns
        {
            return Err(Error::InvalidShape(
                "MDP tables do not match the state and action counts".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        for s in 0..ns {
            for a in 0..na {
                let row = self.next_distribution(s, a);
                if row.iter().any(|p| !(0.0..=1.0).contains(p))
                    || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(Error::InvalidParameter(format!(
                        "transition row ({s}, {a}) is not a distribution"
                    )));
                }
                if self.terminal[s] && (row[s] != 1.0 || self.reward(s, a) != 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "terminal state {s} must self-loop with zero reward"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn next_distribution(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Draws `s'` from `P[s][a]`.
    pub fn sample_next<R: Rng>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.next_distribution(s, a);
        for (next, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        // Round-off: fall back to the last reachable state.
        row.iter().rposition(|p| *p > 0.0).unwrap_or(s)
    }

    /// Random MDP with one-hot transitions, rewards uniform in `[-1, 1]` and
    /// the last state terminal.
    pub fn random_deterministic<R: Rng>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::random(n_states, n_actions, gamma, false, rng)
    }

    /// Random MDP with dense transition rows, rewards uniform in `[-1, 1]`
    /// and the last state terminal.
    pub fn random_stochastic<R: Rng>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::random(n_states, n_actions, gamma, true, rng)
    }

    fn random<R: Rng>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        dense: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut transition = vec![0.0; n_states * n_actions * n_states];
        let mut reward = vec![0.0; n_states * n_actions];
        let mut terminal = vec![false; n_states];
        let last = n_states - 1;
        terminal[last] = n_states > 1;
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &mut transition[(s * n_actions + a) * n_states..][..n_states];
                if terminal[s] {
                    row[s] = 1.0;
                    continue;
                }
                reward[s * n_actions + a] = rng.random_range(-1.0..=1.0);
                if dense {
                    let w: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let total: f64 = w.iter().sum();
                    for (p, w) in row.iter_mut().zip(&w) {
                        *p = w / total;
                    }
                } else {
                    row[rng.random_range(0..n_states)] = 1.0;
                }
            }
        }
        Self::new(n_states, n_actions, transition, reward, gamma, terminal)
    }
}

/// `Q[s][a]`; terminal rows stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// With probability `1 - epsilon` the greedy action, else uniform.
pub fn greedy_policy<R: Rng>(q: &QTable, s: usize, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.n_actions)
    } else {
        argmax(q.row(s))
    }
}

/// One application of the Bellman optimality operator.
pub fn bellman_backup(mdp: &FiniteMdp, q: &QTable) -> QTable {
    let mut next = QTable::zeros(mdp.n_states, mdp.n_actions);
    let v: Vec<f64> = (0..mdp.n_states)
        .map(|s| if mdp.terminal[s] { 0.0 } else { q.max(s) })
        .collect();
    for s in 0..mdp.n_states {
        if mdp.terminal[s] {
            continue;
        }
        for a in 0..mdp.n_actions {
            let future: f64 = mdp
                .next_distribution(s, a)
                .iter()
                .zip(&v)
                .map(|(p, v)| p * v)
                .sum();
            next.set(s, a, mdp.reward(s, a) + mdp.gamma * future);
        }
    }
    next
}

pub const VALUE_ITERATION_LIMIT: usize = 1_000_000;

/// Iterates the Bellman backup until successive tables differ by at most
/// `tolerance` in sup norm.
pub fn value_iteration(mdp: &FiniteMdp, tolerance: f64) -> Result<QTable> {
    mdp.validate()?;
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..VALUE_ITERATION_LIMIT {
        let next = bellman_backup(mdp, &q);
        let gap = next.sup_distance(&q);
        q = next;
        if !gap.is_finite() {
            break;
        }
        if gap <= tolerance {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence(format!(
        "value iteration did not reach tolerance {tolerance} (gamma = {})",
        mdp.gamma
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearningConfig {
    pub episodes: usize,
    /// Budget over all episodes.
    pub max_total_steps: usize,
    pub max_episode_steps: usize,
    pub alpha0: f64,
    /// `alpha_k = alpha0 / (1 + k / decay_scale)` over the global step `k`;
    /// infinity keeps the rate constant.
    pub decay_scale: f64,
    pub epsilon: f64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            episodes: usize::MAX,
            max_total_steps: 100_000,
            max_episode_steps: 5,
            alpha0: 0.5,
            decay_scale: 1e4,
            epsilon: 0.1,
        }
    }
}

impl QLearningConfig {
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha0 / (1.0 + k as f64 / self.decay_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningRun {
    pub q: QTable,
    pub steps: usize,
    pub episodes: usize,
}

/// Epsilon-greedy TD control. Episodes start in a uniformly drawn
/// non-terminal state and end at a terminal state or after
/// `max_episode_steps`.
pub fn q_learning<R: Rng>(
    mdp: &FiniteMdp,
    config: &QLearningConfig,
    rng: &mut R,
) -> Result<QLearningRun> {
    mdp.validate()?;
    if !(config.alpha0 > 0.0 && config.alpha0 <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1], got {}",
            config.alpha0
        )));
    }
    if !(0.0..=1.0).contains(&config.epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be in [0, 1], got {}",
            config.epsilon
        )));
    }
    let starts: Vec<usize> = (0..mdp.n_states).filter(|s| !mdp.terminal[*s]).collect();
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    let mut k = 0;
    let mut episodes = 0;
    if starts.is_empty() {
        return Ok(QLearningRun {
            q,
            steps: 0,
            episodes: 0,
        });
    }
    while episodes < config.episodes && k < config.max_total_steps {
        episodes += 1;
        let mut s = starts[rng.random_range(0..starts.len())];
        for _ in 0..config.max_episode_steps {
            if mdp.terminal[s] || k >= config.max_total_steps {
                break;
            }
            let a = greedy_policy(&q, s, config.epsilon, rng);
            let next = mdp.sample_next(s, a, rng);
            let target =
                mdp.reward(s, a) + mdp.gamma * if mdp.terminal[next] { 0.0 } else { q.max(next) };
            let delta = target - q.get(s, a);
            q.set(s, a, q.get(s, a) + config.alpha(k) * delta);
            k += 1;
            s = next;
        }
    }
    Ok(QLearningRun {
        q,
        steps: k,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(r: f64, gamma: f64) -> FiniteMdp {
        FiniteMdp::new(1, 1, vec![1.0], vec![r], gamma, vec![false]).unwrap()
    }

    fn chain() -> FiniteMdp {
        // s0 -> s1 -> s2 (terminal), reward 1 per move.
        let mut p = vec![0.0; 9];
        p[1] = 1.0;
        p[3 + 2] = 1.0;
        p[6 + 2] = 1.0;
        FiniteMdp::new(3, 1, p, vec![1.0, 1.0, 0.0], 0.9, vec![false, false, true]).unwrap()
    }

    #[test]
    fn geometric_series() {
        let q = value_iteration(&single(1.0, 0.5), 1e-12).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-11);
    }

    #[test]
    fn zero_discount_is_immediate_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mdp = FiniteMdp::random_stochastic(4, 2, 0.0, &mut rng).unwrap();
        let q = value_iteration(&mdp, 1e-12).unwrap();
        assert_eq!(q.values, mdp.reward);
    }

    #[test]
    fn two_step_chain() {
        let q = value_iteration(&chain(), 1e-12).unwrap();
        assert!((q.get(0, 0) - 1.9).abs() < 1e-12);
        assert!((q.get(1, 0) - 1.0).abs() < 1e-12);
        assert_eq!(q.get(2, 0), 0.0);
    }

    #[test]
    fn undiscounted_loop_does_not_converge() {
        assert!(matches!(
            value_iteration(&single(1.0, 1.0), 1e-9),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn one_td_update() {
        let mdp = single(1.0, 0.0);
        let config = QLearningConfig {
            episodes: 1,
            max_total_steps: 1,
            alpha0: 0.5,
            decay_scale: f64::INFINITY,
            ..QLearningConfig::default()
        };
        let run = q_learning(&mdp, &config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(run.q.get(0, 0), 0.5);
        assert_eq!(run.steps, 1);
    }

    #[test]
    fn terminal_rows_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mdp = FiniteMdp::random_stochastic(5, 3, 0.9, &mut rng).unwrap();
        let run = q_learning(
            &mdp,
            &QLearningConfig {
                max_total_steps: 20_000,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        assert!(run.q.row(4).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic_mdp_unit_rate_reaches_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mdp = FiniteMdp::random_deterministic(5, 3, 0.9, &mut rng).unwrap();
        let vi = value_iteration(&mdp, 1e-13).unwrap();
        let config = QLearningConfig {
            max_total_steps: 50_000,
            alpha0: 1.0,
            decay_scale: f64::INFINITY,
            epsilon: 1.0,
            ..QLearningConfig::default()
        };
        let run = q_learning(&mdp, &config, &mut rng).unwrap();
        assert!(run.q.sup_distance(&vi) < 1e-10);
    }

    #[test]
    fn epsilon_zero_is_greedy_and_ties_break_low() {
        let mut q = QTable::zeros(1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(greedy_policy(&q, 0, 0.0, &mut rng), 0);
        q.values = vec![1.0, 3.0, 3.0, 2.0];
        for _ in 0..20 {
            assert_eq!(greedy_policy(&q, 0, 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut q = QTable::zeros(1, 4);
        q.values = vec![0.0, 10.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            counts[greedy_policy(&q, 0, 1.0, &mut rng)] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() <= 0.05 * 0.25, "frequency {f}");
        }
    }

    #[test]
    fn argmax_invariant_under_positive_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let row: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let scale = rng.random_range(0.01..100.0);
            let shift = rng.random_range(-50.0..50.0);
            let mapped: Vec<f64> = row.iter().map(|v| scale * v + shift).collect();
            assert_eq!(argmax(&row), argmax(&mapped));
        }
    }

    #[test]
    fn backup_is_a_gamma_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mdp = FiniteMdp::random_stochastic(6, 3, 0.8, &mut rng).unwrap();
        let mut q = QTable::zeros(6, 3);
        let mut prev_gap = f64::INFINITY;
        for _ in 0..50 {
            let next = bellman_backup(&mdp, &q);
            let gap = next.sup_distance(&q);
            assert!(gap <= mdp.gamma * prev_gap + 1e-12);
            prev_gap = gap;
            q = next;
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(FiniteMdp::new(1, 1, vec![0.5], vec![0.0], 0.9, vec![false]).is_err());
        assert!(FiniteMdp::new(1, 1, vec![1.0], vec![1.0], 0.9, vec![true]).is_err());
        assert!(FiniteMdp::new(2, 1, vec![1.0], vec![1.0], 0.9, vec![false]).is_err());
    }
}
