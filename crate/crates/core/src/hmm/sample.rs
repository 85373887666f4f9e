use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use super::model::Hmm2Model;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::math::rng_from_seed;

fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(probs)
        .map_err(|e| Error::InvalidConfig(format!("cannot sample from {probs:?}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Draws a state path and its observations; deterministic per seed.
pub fn sample_sequence(model: &Hmm2Model, t: usize, seed: u64) -> Result<(FeatureSequence, Vec<usize>)> {
    sample_with(model, t, &mut rng_from_seed(seed))
}

pub fn sample_with<R: Rng>(model: &Hmm2Model, t: usize, rng: &mut R) -> Result<(FeatureSequence, Vec<usize>)> {
    if t == 0 {
        return Err(Error::InvalidArgument("cannot sample an empty sequence".into()));
    }
    let n = model.n_states();
    let tr = &model.transitions;
    let mut path = Vec::with_capacity(t);
    path.push(draw(&model.initial, rng)?);
    for step in 1..t {
        let cur = path[step - 1];
        let next = match (&tr.tensor, step) {
            (Some(tensor), s) if s >= 2 => {
                let prev = path[step - 2];
                let base = (prev * n + cur) * n;
                draw(&tensor[base..base + n], rng)?
            }
            _ => draw(&tr.matrix[cur * n..(cur + 1) * n], rng)?,
        };
        path.push(next);
    }
    let dim = model.dim();
    let mut data = Vec::with_capacity(t * dim);
    for &s in &path {
        let g = &model.emissions.states[s];
        let m = draw(&g.weights, rng)?;
        for d in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            data.push(g.means[m][d] + g.variances[m][d].sqrt() * z);
        }
    }
    Ok((FeatureSequence::new("sample", dim, data)?, path))
}
