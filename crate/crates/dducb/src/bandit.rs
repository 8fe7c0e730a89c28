//! Stochastic bandit instances and deterministic reward sampling.
//!
//! An instance is a vector of arm means plus a noise model: Gaussian with a
//! shared standard deviation `sigma`, or Bernoulli in {0, 1} (whose
//! subgaussian proxy is `sigma = 1/2`). Rewards are drawn through a
//! counter-based scheme: the key `(master_seed, rep, agent, round)` is packed
//! into a ChaCha seed and the arm index selects the stream, so any draw can
//! be regenerated in isolation and no ordering of agents, rounds, or worker
//! threads can change it.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("instance needs at least one arm")]
    NoArms,
    #[error("sigma must be nonnegative and finite, got {sigma}")]
    InvalidSigma { sigma: f64 },
    #[error("bernoulli means must lie in [0, 1], got {mean}")]
    MeanOutOfRange { mean: f64 },
    #[error("arm means file line {line} is malformed: {reason}")]
    MeansParse { line: usize, reason: String },
    #[error("failed to read arm means: {0}")]
    Io(#[from] std::io::Error),
}

/// Noise model of the reward distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardDistribution {
    Gaussian,
    Bernoulli,
}

/// Arm means plus the shared noise model.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    means: Vec<f64>,
    sigma: f64,
    distribution: RewardDistribution,
}

impl BanditInstance {
    /// Gaussian rewards `N(mean_k, sigma^2)`.
    pub fn gaussian(means: Vec<f64>, sigma: f64) -> Result<Self, BanditError> {
        if means.is_empty() {
            return Err(BanditError::NoArms);
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(BanditError::InvalidSigma { sigma });
        }
        Ok(BanditInstance { means, sigma, distribution: RewardDistribution::Gaussian })
    }

    /// Bernoulli rewards in {0, 1}; means must lie in [0, 1] and the
    /// subgaussian proxy `sigma = 1/2` is set automatically.
    pub fn bernoulli(means: Vec<f64>) -> Result<Self, BanditError> {
        if means.is_empty() {
            return Err(BanditError::NoArms);
        }
        if let Some(&bad) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(BanditError::MeanOutOfRange { mean: bad });
        }
        Ok(BanditInstance { means, sigma: 0.5, distribution: RewardDistribution::Bernoulli })
    }

    /// Parses arm means from one-column CSV text: one mean per line, blank
    /// lines ignored.
    pub fn means_from_csv_str(text: &str) -> Result<Vec<f64>, BanditError> {
        let mut means = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let value = line.parse::<f64>().map_err(|e| BanditError::MeansParse {
                line: idx + 1,
                reason: e.to_string(),
            })?;
            means.push(value);
        }
        if means.is_empty() {
            return Err(BanditError::NoArms);
        }
        Ok(means)
    }

    /// Reads arm means from a one-column CSV file.
    pub fn means_from_csv_file(path: impl AsRef<Path>) -> Result<Vec<f64>, BanditError> {
        Self::means_from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn arm_count(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn distribution(&self) -> RewardDistribution {
        self.distribution
    }

    pub fn optimal_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Identifies one reward draw: every distinct key/arm pair yields an
/// independent, reproducible value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardKey {
    pub master_seed: u64,
    pub rep: u64,
    pub agent: u64,
    pub round: u64,
}

impl RewardKey {
    fn rng(&self, arm: usize) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.rep.to_le_bytes());
        seed[16..24].copy_from_slice(&self.agent.to_le_bytes());
        seed[24..32].copy_from_slice(&self.round.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(arm as u64);
        rng
    }
}

/// Draws the reward for `arm` under `key`. Pure in its arguments: the same
/// `(key, arm)` always returns the same value.
pub fn sample_reward(
    instance: &BanditInstance,
    arm: usize,
    key: RewardKey,
) -> Result<f64, BanditError> {
    if arm >= instance.arm_count() {
        return Err(BanditError::ArmOutOfRange { arm, arms: instance.arm_count() });
    }
    let mut rng = key.rng(arm);
    let mean = instance.means[arm];
    Ok(match instance.distribution {
        RewardDistribution::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            mean + instance.sigma * z
        }
        RewardDistribution::Bernoulli => {
            if rng.gen::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Suboptimality gaps `max_k mean_k - mean_j` and the set of optimal arms.
#[derive(Debug, Clone)]
pub struct GapProfile {
    pub gaps: Vec<f64>,
    pub optimal_arms: Vec<usize>,
}

impl GapProfile {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of gaps over suboptimal arms.
    pub fn gap_sum(&self) -> f64 {
        self.gaps.iter().sum()
    }
}

/// Computes the gap profile of `instance`.
pub fn gaps(instance: &BanditInstance) -> GapProfile {
    let best = instance.optimal_mean();
    let gaps: Vec<f64> = instance.means().iter().map(|m| best - m).collect();
    let optimal_arms = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| **g == 0.0)
        .map(|(k, _)| k)
        .collect();
    GapProfile { gaps, optimal_arms }
}
