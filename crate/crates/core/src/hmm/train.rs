//! Expectation-maximization over pair-state posteriors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{EmissionScorer, VARIANCE_FLOOR};
use super::lattice::{backward_table, forward_table};
use super::model::{emission_table, Hmm2Model, LogParams};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::math::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Stop once the relative likelihood improvement falls below this.
    pub tol: f64,
    pub var_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { max_iters: 20, tol: 1e-4, var_floor: VARIANCE_FLOOR }
    }
}

/// Occupancy-weighted moments for one mixture component, taken about the
/// component's current mean.
#[derive(Debug, Clone)]
struct MomentStats {
    occ: f64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Stats {
    ll: f64,
    initial: Vec<f64>,
    matrix: Vec<f64>,
    tensor: Vec<f64>,
    moments: Vec<Vec<MomentStats>>,
}

impl Stats {
    fn zeros(model: &Hmm2Model) -> Self {
        let n = model.n_states();
        let dim = model.dim();
        Self {
            ll: 0.0,
            initial: vec![0.0; n],
            matrix: vec![0.0; n * n],
            tensor: if model.transitions.tensor.is_some() { vec![0.0; n * n * n] } else { Vec::new() },
            moments: model
                .emissions
                .states
                .iter()
                .map(|g| {
                    (0..g.n_components())
                        .map(|_| MomentStats { occ: 0.0, sum: vec![0.0; dim], sq: vec![0.0; dim] })
                        .collect()
                })
                .collect(),
        }
    }

    fn merge(&mut self, other: &Stats) {
        self.ll += other.ll;
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.initial, &other.initial);
        add(&mut self.matrix, &other.matrix);
        add(&mut self.tensor, &other.tensor);
        for (sa, sb) in self.moments.iter_mut().zip(&other.moments) {
            for (a, b) in sa.iter_mut().zip(sb) {
                a.occ += b.occ;
                add(&mut a.sum, &b.sum);
                add(&mut a.sq, &b.sq);
            }
        }
    }
}

fn sequence_stats(
    model: &Hmm2Model,
    lp: &LogParams,
    scorer: &EmissionScorer,
    obs: &FeatureSequence,
) -> Result<Stats> {
    let n = lp.n;
    let t_len = obs.len();
    let em = emission_table(scorer, n, obs);
    let (alpha, ll) = forward_table(lp, &em, t_len);
    if !ll.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sequence {:?} has zero likelihood under the current model",
            obs.id
        )));
    }
    let beta = backward_table(lp, &em, t_len);
    let e = |t: usize, j: usize| em[t * n + j];
    let mut st = Stats::zeros(model);
    st.ll = ll;

    let mut gamma = vec![0.0; t_len * n];
    for j in 0..n {
        gamma[j] = (alpha.layers[0][j] + beta.layers[0][j] - ll).exp();
    }
    for t in 1..t_len {
        let (a, b) = (&alpha.layers[t], &beta.layers[t]);
        if lp.tensor.is_some() {
            for ij in 0..n * n {
                gamma[t * n + ij % n] += (a[ij] + b[ij] - ll).exp();
            }
        } else {
            for j in 0..n {
                gamma[t * n + j] = (a[j] + b[j] - ll).exp();
            }
        }
    }
    st.initial.copy_from_slice(&gamma[..n]);

    match &lp.tensor {
        None => {
            for t in 1..t_len {
                let prev = &alpha.layers[t - 1];
                for j in 0..n {
                    for k in 0..n {
                        let a = lp.matrix[j * n + k];
                        if a > f64::NEG_INFINITY {
                            st.matrix[j * n + k] +=
                                (prev[j] + a + e(t, k) + beta.layers[t][k] - ll).exp();
                        }
                    }
                }
            }
        }
        Some(tensor) => {
            if t_len > 1 {
                for ij in 0..n * n {
                    st.matrix[ij] += (alpha.layers[1][ij] + beta.layers[1][ij] - ll).exp();
                }
            }
            for t in 2..t_len {
                let prev = &alpha.layers[t - 1];
                let next = &beta.layers[t];
                for ij in 0..n * n {
                    let j = ij % n;
                    for k in 0..n {
                        let a = tensor[ij * n + k];
                        if a > f64::NEG_INFINITY {
                            st.tensor[ij * n + k] +=
                                (prev[ij] + a + e(t, k) + next[j * n + k] - ll).exp();
                        }
                    }
                }
            }
        }
    }

    let mut comp = Vec::new();
    for (t, x) in obs.frames().enumerate() {
        for j in 0..n {
            let g = gamma[t * n + j];
            if g <= 0.0 {
                continue;
            }
            scorer.component_logs(j, x, &mut comp);
            let total = log_sum_exp(&comp);
            let means = &model.emissions.states[j].means;
            for (m, &c) in comp.iter().enumerate() {
                let r = g * (c - total).exp();
                if r == 0.0 {
                    continue;
                }
                let acc = &mut st.moments[j][m];
                acc.occ += r;
                for (d, (&xv, &mu)) in x.iter().zip(&means[m]).enumerate() {
                    let dx = xv - mu;
                    acc.sum[d] += r * dx;
                    acc.sq[d] += r * dx * dx;
                }
            }
        }
    }
    Ok(st)
}

/// Runs the E-step over the corpus. Per-sequence statistics are computed in
/// parallel and summed in corpus order so results do not depend on threading.
fn corpus_stats(model: &Hmm2Model, corpus: &[FeatureSequence]) -> Result<Stats> {
    let lp = model.log_params();
    let scorer = model.emissions.scorer();
    let per_seq: Vec<Stats> = corpus
        .par_iter()
        .map(|obs| sequence_stats(model, &lp, &scorer, obs))
        .collect::<Result<_>>()?;
    let mut total = Stats::zeros(model);
    for s in &per_seq {
        total.merge(s);
    }
    Ok(total)
}

/// Total corpus log-likelihood under `model`.
pub fn corpus_log_likelihood(model: &Hmm2Model, corpus: &[FeatureSequence]) -> Result<f64> {
    for obs in corpus {
        model.check_observations(obs)?;
    }
    let lp = model.log_params();
    let scorer = model.emissions.scorer();
    let lls: Vec<f64> = corpus
        .par_iter()
        .map(|obs| forward_table(&lp, &emission_table(&scorer, lp.n, obs), obs.len()).1)
        .collect();
    Ok(lls.iter().sum())
}

fn renormalize_rows(target: &mut [f64], counts: &[f64], width: usize) {
    for (row, c) in target.chunks_mut(width).zip(counts.chunks(width)) {
        let s: f64 = c.iter().sum();
        if s > 0.0 {
            for (p, &v) in row.iter_mut().zip(c) {
                *p = v / s;
            }
        }
    }
}

/// Applies the re-estimation formulas. Returns true if any variance hit the floor.
fn maximize(model: &mut Hmm2Model, st: &Stats, var_floor: f64) -> bool {
    let n = model.n_states();
    renormalize_rows(&mut model.initial, &st.initial, n);
    renormalize_rows(&mut model.transitions.matrix, &st.matrix, n);
    if let Some(t) = model.transitions.tensor.as_mut() {
        renormalize_rows(t, &st.tensor, n);
    }
    let mut floored = false;
    for (g, moments) in model.emissions.states.iter_mut().zip(&st.moments) {
        let occ: f64 = moments.iter().map(|m| m.occ).sum();
        if !(occ > 0.0) {
            continue;
        }
        for (m, acc) in moments.iter().enumerate() {
            g.weights[m] = acc.occ / occ;
            if !(acc.occ > 0.0) {
                continue;
            }
            for d in 0..acc.sum.len() {
                let shift = acc.sum[d] / acc.occ;
                let var = acc.sq[d] / acc.occ - shift * shift;
                g.means[m][d] += shift;
                if var < var_floor {
                    floored = true;
                    g.variances[m][d] = var_floor;
                } else {
                    g.variances[m][d] = var;
                }
            }
        }
    }
    floored
}

/// Baum-Welch re-estimation of every parameter table.
///
/// Transitions that start at zero stay at zero, so the topology survives
/// training. Rows with no expected visits keep their previous values.
pub fn train(model: &Hmm2Model, corpus: &[FeatureSequence], cfg: &TrainConfig) -> Result<Hmm2Model> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    for obs in corpus {
        model.check_observations(obs)?;
    }
    let mut current = model.clone();
    let mut history = Vec::new();
    let mut floored = false;
    let mut iterations = 0;
    let mut prev_ll: Option<f64> = None;
    let mut last_ll = None;
    for _ in 0..cfg.max_iters {
        let st = corpus_stats(&current, corpus)?;
        history.push(st.ll);
        last_ll = Some(st.ll);
        if let Some(p) = prev_ll {
            if (st.ll - p) / p.abs().max(f64::MIN_POSITIVE) < cfg.tol {
                break;
            }
        }
        floored |= maximize(&mut current, &st, cfg.var_floor);
        iterations += 1;
        prev_ll = Some(st.ll);
        last_ll = None;
    }
    let final_ll = match last_ll {
        Some(ll) => ll,
        None => {
            let ll = corpus_log_likelihood(&current, corpus)?;
            history.push(ll);
            ll
        }
    };
    current.meta.iterations = model.meta.iterations + iterations;
    current.meta.log_likelihood = Some(final_ll);
    current.meta.history = history;
    current.meta.variance_floored = floored;
    Ok(current)
}
