//! The AML baseline: a single weighted sum of the three feature scores whose
//! weights are learned per query by regularized logistic regression, trained
//! with stochastic gradient steps over class-balanced samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::integrator::logistic;
use crate::NUM_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmlConfig {
    /// Ridge strength.
    pub lambda: f64,
    /// Learning rate.
    pub eta: f64,
    /// Epochs; each draws as many samples as there are training instances.
    pub t_max: usize,
}

impl Default for AmlConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            eta: 0.1,
            t_max: 30,
        }
    }
}

impl AmlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("aml lambda must be positive and finite".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config("aml eta must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmlParams {
    pub theta: FeatureVector,
    pub lambda: f64,
    pub eta: f64,
    pub t_max: usize,
}

pub fn aml_score(x: &FeatureVector, theta: &FeatureVector) -> f64 {
    (0..NUM_FEATURES).map(|j| theta[j] * x[j]).sum()
}

/// Regularized log loss of one instance.
pub fn instance_loss(x: &FeatureVector, y: bool, theta: &FeatureVector, lambda: f64) -> f64 {
    let s = logistic(aml_score(x, theta)).clamp(crate::integrator::LOG_CLAMP, 1.0 - crate::integrator::LOG_CLAMP);
    let ce = if y { -s.ln() } else { -(1.0 - s).ln() };
    ce + 0.5 * lambda * theta.iter().map(|t| t * t).sum::<f64>()
}

pub fn instance_gradient(x: &FeatureVector, y: bool, theta: &FeatureVector, lambda: f64) -> FeatureVector {
    let r = logistic(aml_score(x, theta)) - if y { 1.0 } else { 0.0 };
    let mut g = [0.0; NUM_FEATURES];
    for j in 0..NUM_FEATURES {
        g[j] = r * x[j] + lambda * theta[j];
    }
    g
}

/// Indices drawn in one epoch: even draws come from `positives`, odd draws
/// from `negatives`, each uniformly with replacement.
pub fn balanced_epoch(
    rng: &mut ChaCha8Rng,
    positives: &[usize],
    negatives: &[usize],
    draws: usize,
) -> Vec<usize> {
    (0..draws)
        .map(|n| {
            let pool = if n % 2 == 0 { positives } else { negatives };
            *pool.choose(rng).expect("pools are nonempty")
        })
        .collect()
}

pub fn aml_fit(xs: &[FeatureVector], ys: &[bool], config: &AmlConfig, seed: u64) -> Result<AmlParams> {
    config.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::Data("features and labels differ in length".into()));
    }
    let positives: Vec<usize> = (0..ys.len()).filter(|&i| ys[i]).collect();
    let negatives: Vec<usize> = (0..ys.len()).filter(|&i| !ys[i]).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::DegenerateLabels(format!(
            "{} faulty out of {} instances; both classes are required",
            positives.len(),
            ys.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = [0.0; NUM_FEATURES];
    for _ in 0..config.t_max {
        for i in balanced_epoch(&mut rng, &positives, &negatives, xs.len()) {
            let g = instance_gradient(&xs[i], ys[i], &theta, config.lambda);
            for j in 0..NUM_FEATURES {
                theta[j] -= config.eta * g[j];
            }
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteState("aml weights diverged".into()));
        }
    }
    Ok(AmlParams {
        theta,
        lambda: config.lambda,
        eta: config.eta,
        t_max: config.t_max,
    })
}
