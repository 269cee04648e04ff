use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{Decision, DiscreteAction, DISCRETE_ACTIONS};
use crate::features::{feature_vector, FEATURE_VECTOR_LEN};
use crate::sim::{episode_seed, Observation, StepOutcome};

use super::Strategy;

/// Feature vector plus a constant bias input.
pub const LINEAR_Q_INPUTS: usize = FEATURE_VECTOR_LEN + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQParams {
    /// Row-major `[action][input]`.
    pub weights: Vec<f64>,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: f64,
    /// Rewards are multiplied by this before the update.
    pub reward_scale: f64,
    /// Weight norm above which an update is rolled back and the learning
    /// rate halved.
    pub max_weight_norm: f64,
}

impl Default for LinearQParams {
    fn default() -> Self {
        Self {
            weights: vec![0.0; DISCRETE_ACTIONS * LINEAR_Q_INPUTS],
            learning_rate: 0.01,
            discount: 0.99,
            epsilon: 0.1,
            reward_scale: 0.01,
            max_weight_norm: 1e6,
        }
    }
}

impl LinearQParams {
    pub fn q_value(&self, phi: &[f64], action: usize) -> f64 {
        let w = &self.weights[action * LINEAR_Q_INPUTS..(action + 1) * LINEAR_Q_INPUTS];
        w.iter().zip(phi).map(|(a, b)| a * b).sum()
    }

    /// Lowest-index maximizer.
    pub fn greedy(&self, phi: &[f64]) -> usize {
        let mut best = 0;
        let mut best_q = self.q_value(phi, 0);
        for a in 1..DISCRETE_ACTIONS {
            let q = self.q_value(phi, a);
            if q > best_q {
                best = a;
                best_q = q;
            }
        }
        best
    }

    fn max_q(&self, phi: &[f64]) -> f64 {
        (0..DISCRETE_ACTIONS).map(|a| self.q_value(phi, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// One TD(0) update. Returns `false` if the update diverged and was
    /// rolled back (the learning rate is halved in that case).
    pub fn td_update(&mut self, phi: &[f64], action: usize, reward: f64, next_phi: Option<&[f64]>) -> bool {
        let bootstrap = next_phi.map_or(0.0, |p| self.discount * self.max_q(p));
        let target = reward * self.reward_scale + bootstrap;
        let error = target - self.q_value(phi, action);
        let row = action * LINEAR_Q_INPUTS;
        let saved: Vec<f64> = self.weights[row..row + LINEAR_Q_INPUTS].to_vec();
        for (w, x) in self.weights[row..row + LINEAR_Q_INPUTS].iter_mut().zip(phi) {
            *w += self.learning_rate * error * x;
        }
        let norm = self.weight_norm();
        if norm.is_finite() && norm <= self.max_weight_norm {
            return true;
        }
        self.weights[row..row + LINEAR_Q_INPUTS].copy_from_slice(&saved);
        self.learning_rate /= 2.0;
        log::warn!("linear-q weights diverged (norm {norm:e}); learning rate now {}", self.learning_rate);
        false
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let p: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if p.weights.len() != DISCRETE_ACTIONS * LINEAR_Q_INPUTS || p.weights.iter().any(|w| !w.is_finite()) {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "bad weight vector"));
        }
        Ok(p)
    }
}

/// Linear action-value learner over the feature vector, ε-greedy over the
/// discrete action space.
#[derive(Debug, Clone)]
pub struct LinearQ {
    pub params: LinearQParams,
    /// Apply TD updates from `learn`.
    pub training: bool,
    seed: u64,
    rng: ChaCha8Rng,
}

pub fn features(obs: &Observation) -> Vec<f64> {
    let mut phi = feature_vector(&obs.dynamic, &obs.agent);
    phi.push(1.0);
    phi
}

impl LinearQ {
    pub fn new(params: LinearQParams, seed: u64, training: bool) -> Self {
        Self {
            params,
            training,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Strategy for LinearQ {
    fn name(&self) -> String {
        "linearq".into()
    }

    fn begin_episode(&mut self, episode: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed(self.seed, episode));
    }

    fn decide(&mut self, obs: &Observation) -> Decision {
        let a = if self.params.epsilon > 0.0 && self.rng.gen::<f64>() < self.params.epsilon {
            self.rng.gen_range(0..DISCRETE_ACTIONS)
        } else {
            self.params.greedy(&features(obs))
        };
        Decision::Discrete(DiscreteAction::new(a as u8).expect("in range"))
    }

    fn learn(&mut self, prev: &Observation, decision: &Decision, outcome: &StepOutcome) {
        if !self.training {
            return;
        }
        let Decision::Discrete(a) = decision else { return };
        let phi = features(prev);
        let next = (!outcome.done).then(|| features(&outcome.observation));
        self.params.td_update(&phi, a.index() as usize, outcome.reward.total, next.as_deref());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi() -> Vec<f64> {
        (0..LINEAR_Q_INPUTS).map(|i| ((i * 7 % 5) as f64 - 2.0) / 4.0).collect()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut p = LinearQParams { learning_rate: 0.0, ..Default::default() };
        let before = p.clone();
        p.td_update(&phi(), 3, 5.0, Some(&phi()));
        assert_eq!(p, before);
    }

    #[test]
    fn repeated_transition_converges_to_reward() {
        let mut p = LinearQParams {
            discount: 0.0,
            reward_scale: 1.0,
            learning_rate: 0.05,
            ..Default::default()
        };
        let x = phi();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let mut prev_gap = 1.0;
        for _ in 0..200 {
            p.td_update(&x, 2, 1.0, None);
            let gap = 1.0 - p.q_value(&x, 2);
            // each update shrinks the gap by the factor (1 − lr·|x|²)
            assert!((gap - prev_gap * (1.0 - 0.05 * xx)).abs() < 1e-12);
            prev_gap = gap;
        }
        assert!((p.q_value(&x, 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_invariant_under_positive_scaling() {
        let mut p = LinearQParams::default();
        for (i, w) in p.weights.iter_mut().enumerate() {
            *w = ((i * 31 % 17) as f64 - 8.0) / 3.0;
        }
        let a = p.greedy(&phi());
        for w in p.weights.iter_mut() {
            *w *= 7.5;
        }
        assert_eq!(p.greedy(&phi()), a);
    }

    #[test]
    fn divergence_rolls_back_and_halves() {
        let mut p = LinearQParams {
            max_weight_norm: 1.0,
            learning_rate: 1.0,
            reward_scale: 1.0,
            ..Default::default()
        };
        assert!(!p.td_update(&phi(), 0, 1e6, None));
        assert_eq!(p.learning_rate, 0.5);
        assert!(p.weights.iter().all(|w| *w == 0.0));
    }
}
