//! Diagonal-covariance Gaussian mixtures, one per hidden state.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, safe_ln};

pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl Gmm {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self, dim: usize, state: usize) -> Result<()> {
        let m = self.weights.len();
        if m == 0 || self.means.len() != m || self.variances.len() != m {
            return Err(Error::InvalidConfig(format!("state {state}: inconsistent mixture sizes")));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidConfig(format!("state {state}: negative mixture weight")));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("state {state}: weights sum to {sum}")));
        }
        for (mu, var) in self.means.iter().zip(&self.variances) {
            if mu.len() != dim || var.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: mu.len().min(var.len()) });
            }
            if mu.iter().any(|v| !v.is_finite()) || var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(format!("state {state}: non-finite or non-positive parameters")));
            }
        }
        Ok(())
    }
}

/// Emission densities for every state of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmEmission {
    pub dim: usize,
    pub states: Vec<Gmm>,
}

impl GmmEmission {
    /// Standard-normal means, unit variances, uniform weights.
    pub fn random<R: Rng>(n_states: usize, dim: usize, m: usize, rng: &mut R) -> Self {
        let states = (0..n_states)
            .map(|_| Gmm {
                weights: vec![1.0 / m as f64; m],
                means: (0..m)
                    .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                    .collect(),
                variances: vec![vec![1.0; dim]; m],
            })
            .collect();
        Self { dim, states }
    }

    /// Same draw as [`GmmEmission::random`] but expressed in the coordinates of
    /// the data: means at `mean + sd * z`, variances at the pooled variance.
    pub fn from_data<'a, R: Rng>(
        n_states: usize,
        m: usize,
        frames: impl Iterator<Item = &'a [f64]>,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut count = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for f in frames {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: f.len() });
            }
            count += 1;
            for d in 0..dim {
                sum[d] += f[d];
                sq[d] += f[d] * f[d];
            }
        }
        if count == 0 {
            return Err(Error::EmptyInput("no frames to initialise emissions"));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let var: Vec<f64> = (0..dim)
            .map(|d| (sq[d] / n - mean[d] * mean[d]).max(VARIANCE_FLOOR))
            .collect();
        let mut out = Self::random(n_states, dim, m, rng);
        for g in &mut out.states {
            for (mu, v) in g.means.iter_mut().zip(&mut g.variances) {
                for d in 0..dim {
                    mu[d] = mean[d] + var[d].sqrt() * mu[d];
                }
                v.clone_from(&var);
            }
        }
        Ok(out)
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.states.iter().enumerate().try_for_each(|(j, g)| g.validate(self.dim, j))
    }

    pub fn scorer(&self) -> EmissionScorer {
        EmissionScorer::new(self)
    }
}

struct Component {
    log_norm: f64,
    mean: Vec<f64>,
    inv_var: Vec<f64>,
}

/// Precomputed normalizers for repeated density evaluation.
pub struct EmissionScorer {
    states: Vec<Vec<Component>>,
}

impl EmissionScorer {
    fn new(e: &GmmEmission) -> Self {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let states = e
            .states
            .iter()
            .map(|g| {
                g.weights
                    .iter()
                    .zip(g.means.iter().zip(&g.variances))
                    .map(|(&w, (mu, var))| Component {
                        log_norm: safe_ln(w)
                            - var.iter().map(|v| half_log_2pi + 0.5 * v.ln()).sum::<f64>(),
                        mean: mu.clone(),
                        inv_var: var.iter().map(|v| 1.0 / v).collect(),
                    })
                    .collect()
            })
            .collect();
        Self { states }
    }

    /// Per-component `log w_m + log N(x; mu_m, var_m)` for one state.
    pub fn component_logs(&self, state: usize, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.states[state].iter().map(|c| {
            if c.log_norm == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let q: f64 = x
                .iter()
                .zip(&c.mean)
                .zip(&c.inv_var)
                .map(|((x, m), iv)| (x - m) * (x - m) * iv)
                .sum();
            c.log_norm - 0.5 * q
        }));
    }

    pub fn log_density(&self, state: usize, x: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(self.states[state].len());
        self.component_logs(state, x, &mut buf);
        log_sum_exp(&buf)
    }
}
