//! Squashed diagonal Gaussians, softmax and categorical sampling.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::check_dim;
use crate::{Error, Result, Rng};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian over pre-squash actions; `log_std` is kept inside
/// `[LOG_STD_MIN, LOG_STD_MAX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    mean: Vec<f64>,
    log_std: Vec<f64>,
}

impl PolicyDistribution {
    /// Builds the distribution, clamping `log_std` into range.
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        check_dim("policy log_std", mean.len(), log_std.len())?;
        if mean.iter().chain(&log_std).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy distribution parameters"));
        }
        let log_std = log_std.into_iter().map(clamp_log_std).collect();
        Ok(PolicyDistribution { mean, log_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    /// The deterministic evaluation action `tanh(mean)`.
    pub fn mode_action(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m.tanh()).collect()
    }

    /// Reparameterized sample: returns `(tanh(u), u)` with
    /// `u = mean + exp(log_std) * noise`.
    pub fn sample_squashed(&self, noise: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("policy noise", self.dim(), noise.len())?;
        let presquash: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(noise)
            .map(|((m, s), e)| m + s.exp() * e)
            .collect();
        let action = presquash.iter().map(|u| u.tanh()).collect();
        Ok((action, presquash))
    }

    /// Draws standard-normal noise from `rng` and samples.
    pub fn sample(&self, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        let noise = standard_normal_vec(rng, self.dim());
        self.sample_squashed(&noise).expect("noise has policy dimension")
    }

    /// Log-density of the squashed action `tanh(presquash)`.
    pub fn log_prob_squashed(&self, presquash: &[f64]) -> Result<f64> {
        check_dim("presquash", self.dim(), presquash.len())?;
        let lp = self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(presquash)
            .map(|((&m, &s), &u)| gaussian_log_density(u, m, s) - log_one_minus_tanh_sq(u))
            .sum::<f64>();
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(Error::NonFinite("squashed log-probability"))
        }
    }
}

#[inline]
pub fn clamp_log_std(s: f64) -> f64 {
    s.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// `log N(u; mean, exp(log_std)^2)` for one coordinate.
#[inline]
pub fn gaussian_log_density(u: f64, mean: f64, log_std: f64) -> f64 {
    let z = (u - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - HALF_LN_2PI
}

/// `log(1 - tanh(u)^2)` as `2 (ln 2 - u - softplus(-2u))`, which stays finite
/// where the direct form underflows.
#[inline]
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn standard_normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A finite categorical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates `probs`: non-empty, non-negative, summing to one within 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("empty categorical distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("categorical probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("categorical probabilities sum to {total}")));
        }
        Ok(DiscreteDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF draw over the stored order.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let r: f64 = rng.random();
        let mut cumulative = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            cumulative += p;
            if r < cumulative {
                return i;
            }
        }
        // Rounding left r above the final partial sum: fall back to the last
        // index with positive mass.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(self.probs.len() - 1)
    }
}

/// `p_i = exp(s_i) / sum_j exp(s_j)`, evaluated after subtracting the max.
pub fn softmax(scores: &[f64]) -> Result<DiscreteDistribution> {
    if scores.is_empty() {
        return Err(Error::Config("softmax of an empty score vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("softmax scores"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut probs: Vec<f64> = exps.into_iter().map(|e| e / total).collect();
    // One more normalisation pass pulls the sum to within an ulp or two.
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    DiscreteDistribution::new(probs)
}
