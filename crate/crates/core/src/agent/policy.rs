use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Squared, sign-flipped distance to the threshold, scaled by `scale`:
/// positive below the threshold, negative at or above it.
pub fn compute_reward(mean_beta: f64, beta_threshold: f64, scale: f64) -> f64 {
    let d = (mean_beta - beta_threshold) * scale;
    if mean_beta < beta_threshold {
        d * d
    } else if d == 0.0 {
        0.0
    } else {
        -(d * d)
    }
}

const U_CLAMP: f64 = 1e-12;

/// Standard Gumbel variate from a uniform draw, clamped away from 0 and 1.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(U_CLAMP, 1.0 - U_CLAMP);
    -(-u.ln()).ln()
}

pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    gumbel_from_uniform(rng.random::<f64>())
}

pub fn sample_gumbel_pair<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [sample_gumbel(rng), sample_gumbel(rng)]
}

/// `softmax((logits + noise) / tau)`.
pub fn relaxed_softmax<T: Scalar>(logits: &[T], noise: &[T], tau: T) -> Vec<T> {
    let z: Vec<T> = logits.iter().zip(noise).map(|(l, g)| (*l + *g) / tau).collect();
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|v| (*v - max).exp()).collect();
    let sum: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Gumbel-Softmax sample; the noise is returned so the sample can be replayed.
pub fn gumbel_softmax<R: Rng + ?Sized>(logits: &[f64], tau: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let noise: Vec<f64> = (0..logits.len()).map(|_| sample_gumbel(rng)).collect();
    (relaxed_softmax(logits, &noise, tau), noise)
}

/// Pulls `dL/dy` back through `y = softmax(z / tau)` to `dL/dz`.
pub fn softmax_backward<T: Scalar>(y: &[T], dy: &[T], tau: T) -> Vec<T> {
    let dot: T = y.iter().zip(dy).map(|(a, b)| *a * *b).sum();
    y.iter().zip(dy).map(|(yi, di)| *yi * (*di - dot) / tau).collect()
}

/// Index of the largest component; the first one wins ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| if i == index { 1.0 } else { 0.0 }).collect()
}

/// Exponential decay with a floor: `max(floor, start · e^{−λt})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub start: f64,
    pub floor: f64,
    pub lambda: f64,
}

impl AnnealSchedule {
    pub fn temperature() -> Self {
        Self {
            start: 1.0,
            floor: 0.1,
            lambda: 0.001,
        }
    }

    pub fn epsilon() -> Self {
        Self {
            start: 0.9,
            floor: 0.05,
            lambda: 0.001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.start >= self.floor && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "anneal schedule needs start >= floor > 0 and lambda >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn at(&self, t: u64) -> f64 {
        (self.start * (-self.lambda * t as f64).exp()).max(self.floor)
    }
}

pub fn anneal_temperature(t: u64, sched: &AnnealSchedule) -> f64 {
    sched.at(t)
}
