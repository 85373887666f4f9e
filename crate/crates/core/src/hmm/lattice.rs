//! Forward, backward and Viterbi recursions in log space.
//!
//! Second-order models run over state pairs. Frame 0 is a single-state layer
//! (`v(j) b_j(o_0)`), frame 1 uses the start-up matrix, and every later frame
//! uses the transition tensor:
//!
//! `alpha_t(j, k) = [sum_i alpha_{t-1}(i, j) a(i, j, k)] b_k(o_t)`.

use super::model::{Hmm2Model, LogParams};
use super::topology::Order;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::math::log_sum_exp;

/// Log-probability lattice. Layer 0 holds one entry per state; for
/// second-order models every later layer holds `N * N` entries indexed
/// `prev * N + cur`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub order: Order,
    pub n_states: usize,
    pub layers: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// `log sum alpha_t * beta_t` over the entries of layer `t`.
    pub fn combine(alpha: &Lattice, beta: &Lattice, t: usize) -> f64 {
        let terms: Vec<f64> = alpha.layers[t].iter().zip(&beta.layers[t]).map(|(a, b)| a + b).collect();
        log_sum_exp(&terms)
    }
}

pub fn forward(model: &Hmm2Model, obs: &FeatureSequence) -> Result<(Lattice, f64)> {
    let em = model.log_emissions(obs)?;
    Ok(forward_table(&model.log_params(), &em, obs.len()))
}

pub fn backward(model: &Hmm2Model, obs: &FeatureSequence) -> Result<Lattice> {
    let em = model.log_emissions(obs)?;
    Ok(backward_table(&model.log_params(), &em, obs.len()))
}

/// Forward log-likelihood only.
pub fn log_likelihood(model: &Hmm2Model, obs: &FeatureSequence) -> Result<f64> {
    forward(model, obs).map(|(_, ll)| ll)
}

pub(crate) fn forward_table(lp: &LogParams, em: &[f64], t_len: usize) -> (Lattice, f64) {
    let n = lp.n;
    let e = |t: usize, j: usize| em[t * n + j];
    let mut layers = Vec::with_capacity(t_len);
    layers.push((0..n).map(|j| lp.initial[j] + e(0, j)).collect::<Vec<_>>());
    let mut buf = Vec::with_capacity(n);
    match &lp.tensor {
        None => {
            for t in 1..t_len {
                let prev = &layers[t - 1];
                let cur: Vec<f64> = (0..n)
                    .map(|k| {
                        buf.clear();
                        buf.extend((0..n).map(|j| prev[j] + lp.matrix[j * n + k]));
                        log_sum_exp(&buf) + e(t, k)
                    })
                    .collect();
                layers.push(cur);
            }
        }
        Some(tensor) => {
            if t_len > 1 {
                let first = &layers[0];
                let pairs: Vec<f64> = (0..n * n)
                    .map(|ij| {
                        let (i, j) = (ij / n, ij % n);
                        first[i] + lp.matrix[ij] + e(1, j)
                    })
                    .collect();
                layers.push(pairs);
            }
            for t in 2..t_len {
                let prev = &layers[t - 1];
                let cur: Vec<f64> = (0..n * n)
                    .map(|jk| {
                        let (j, k) = (jk / n, jk % n);
                        buf.clear();
                        buf.extend((0..n).map(|i| prev[i * n + j] + tensor[(i * n + j) * n + k]));
                        log_sum_exp(&buf) + e(t, k)
                    })
                    .collect();
                layers.push(cur);
            }
        }
    }
    let ll = log_sum_exp(layers.last().expect("at least one frame"));
    (Lattice { order: order_of(lp), n_states: n, layers }, ll)
}

pub(crate) fn backward_table(lp: &LogParams, em: &[f64], t_len: usize) -> Lattice {
    let n = lp.n;
    let e = |t: usize, j: usize| em[t * n + j];
    let width = |t: usize| if lp.tensor.is_some() && t > 0 { n * n } else { n };
    let mut layers: Vec<Vec<f64>> = (0..t_len).map(|t| vec![0.0; width(t)]).collect();
    let mut buf = Vec::with_capacity(n);
    match &lp.tensor {
        None => {
            for t in (0..t_len.saturating_sub(1)).rev() {
                let cur: Vec<f64> = (0..n)
                    .map(|j| {
                        buf.clear();
                        buf.extend((0..n).map(|k| lp.matrix[j * n + k] + e(t + 1, k) + layers[t + 1][k]));
                        log_sum_exp(&buf)
                    })
                    .collect();
                layers[t] = cur;
            }
        }
        Some(tensor) => {
            for t in (1..t_len.saturating_sub(1)).rev() {
                let cur: Vec<f64> = (0..n * n)
                    .map(|ij| {
                        let j = ij % n;
                        buf.clear();
                        buf.extend(
                            (0..n).map(|k| tensor[ij * n + k] + e(t + 1, k) + layers[t + 1][j * n + k]),
                        );
                        log_sum_exp(&buf)
                    })
                    .collect();
                layers[t] = cur;
            }
            if t_len > 1 {
                let cur: Vec<f64> = (0..n)
                    .map(|i| {
                        buf.clear();
                        buf.extend((0..n).map(|j| lp.matrix[i * n + j] + e(1, j) + layers[1][i * n + j]));
                        log_sum_exp(&buf)
                    })
                    .collect();
                layers[0] = cur;
            }
        }
    }
    Lattice { order: order_of(lp), n_states: n, layers }
}

fn order_of(lp: &LogParams) -> Order {
    if lp.tensor.is_some() {
        Order::Second
    } else {
        Order::First
    }
}

/// Most likely state path and its joint log-probability.
///
/// Ties resolve toward the lowest state index at every step.
pub fn viterbi_align(model: &Hmm2Model, obs: &FeatureSequence) -> Result<(Vec<usize>, f64)> {
    let em = model.log_emissions(obs)?;
    let lp = model.log_params();
    viterbi_table(&lp, &em, obs.len())
}

pub(crate) fn viterbi_table(lp: &LogParams, em: &[f64], t_len: usize) -> Result<(Vec<usize>, f64)> {
    let n = lp.n;
    let e = |t: usize, j: usize| em[t * n + j];
    let best = |it: &mut dyn Iterator<Item = (usize, f64)>| {
        it.fold((0usize, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    };
    let first: Vec<f64> = (0..n).map(|j| lp.initial[j] + e(0, j)).collect();
    let (path, score) = match &lp.tensor {
        None => {
            let mut delta = first;
            let mut back: Vec<Vec<usize>> = Vec::with_capacity(t_len);
            for t in 1..t_len {
                let mut next = vec![0.0; n];
                let mut ptr = vec![0usize; n];
                for k in 0..n {
                    let (arg, v) = best(&mut (0..n).map(|j| (j, delta[j] + lp.matrix[j * n + k])));
                    next[k] = v + e(t, k);
                    ptr[k] = arg;
                }
                delta = next;
                back.push(ptr);
            }
            let (mut s, score) = best(&mut delta.iter().copied().enumerate());
            let mut path = vec![s; t_len];
            for t in (1..t_len).rev() {
                s = back[t - 1][s];
                path[t - 1] = s;
            }
            (path, score)
        }
        Some(tensor) => {
            if t_len == 1 {
                let (s, score) = best(&mut first.iter().copied().enumerate());
                (vec![s], score)
            } else {
                let mut delta: Vec<f64> =
                    (0..n * n).map(|ij| first[ij / n] + lp.matrix[ij] + e(1, ij % n)).collect();
                let mut back: Vec<Vec<usize>> = Vec::with_capacity(t_len);
                for t in 2..t_len {
                    let mut next = vec![0.0; n * n];
                    let mut ptr = vec![0usize; n * n];
                    for jk in 0..n * n {
                        let (j, k) = (jk / n, jk % n);
                        let (arg, v) = best(
                            &mut (0..n).map(|i| (i, delta[i * n + j] + tensor[(i * n + j) * n + k])),
                        );
                        next[jk] = v + e(t, k);
                        ptr[jk] = arg;
                    }
                    delta = next;
                    back.push(ptr);
                }
                let (pair, score) = best(&mut delta.iter().copied().enumerate());
                let mut path = vec![0usize; t_len];
                path[t_len - 1] = pair % n;
                path[t_len - 2] = pair / n;
                for t in (2..t_len).rev() {
                    let (j, k) = (path[t - 1], path[t]);
                    path[t - 2] = back[t - 2][j * n + k];
                }
                (path, score)
            }
        }
    };
    if score == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("observation sequence has zero probability".into()));
    }
    Ok((path, score))
}
