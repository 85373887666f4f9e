//! Vector-quantization baseline: one k-means codebook per condition, decided
//! by the lowest average quantization distance.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::LabeledUtterance;
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, MfccConfig};
use crate::math::{argmin, derive_seed, rng_from_seed};

pub const DEFAULT_CODEBOOK_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub label: String,
    pub centroids: Vec<Vec<f64>>,
    /// Mean squared distance to the nearest centroid after each assignment pass.
    pub distortion_history: Vec<f64>,
}

impl Codebook {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.centroids.is_empty() || dim == 0 {
            return Err(Error::InvalidConfig(format!("codebook {:?} is empty", self.label)));
        }
        for c in &self.centroids {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: c.len() });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("codebook {:?} has non-finite centroids", self.label)));
            }
        }
        Ok(())
    }

    /// Average over frames of the Euclidean distance to the closest centroid.
    pub fn average_distortion(&self, obs: &FeatureSequence) -> Result<f64> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: obs.dim() });
        }
        if obs.is_empty() {
            return Err(Error::EmptyInput("observation sequence"));
        }
        let total: f64 = obs.frames().map(|x| nearest(&self.centroids, x).1.sqrt()).sum();
        Ok(total / obs.len() as f64)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties to the lowest index.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(centroids: &[Vec<f64>], frames: &[&[f64]]) -> (Vec<usize>, Vec<f64>) {
    frames.iter().map(|x| nearest(centroids, x)).unzip()
}

/// Seeded k-means. Initial centroids are `k` distinct frames drawn at random;
/// iteration stops when assignments stop changing or after `max_iters` updates.
pub fn train_codebook(frames: &[&[f64]], k: usize, seed: u64, max_iters: usize) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::InvalidConfig("codebook size must be positive".into()));
    }
    if frames.len() < k {
        return Err(Error::InvalidArgument(format!("{} frames cannot seed {k} centroids", frames.len())));
    }
    let dim = frames[0].len();
    if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.len() });
    }
    let mut rng = rng_from_seed(seed);
    let mut centroids: Vec<Vec<f64>> =
        index::sample(&mut rng, frames.len(), k).iter().map(|i| frames[i].to_vec()).collect();

    let (mut labels, mut dists) = assign(&centroids, frames);
    let mut history = vec![mean(&dists)];
    for _ in 0..max_iters {
        update(&mut centroids, frames, &labels, &dists);
        let (next, next_dists) = assign(&centroids, frames);
        history.push(mean(&next_dists));
        let stable = next == labels;
        labels = next;
        dists = next_dists;
        if stable {
            break;
        }
    }
    Ok(Codebook { label: String::new(), centroids, distortion_history: history })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Recomputes cluster means; each empty cluster takes the frame currently
/// farthest from its centroid.
fn update(centroids: &mut [Vec<f64>], frames: &[&[f64]], labels: &[usize], dists: &[f64]) {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (x, &c) in frames.iter().zip(labels) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x.iter()) {
            *s += v;
        }
    }
    let mut taken = vec![false; frames.len()];
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            centroids[c] = sums[c].iter().map(|s| s / n).collect();
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..frames.len() {
            if !taken[i] && far.is_none_or(|f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        if let Some(f) = far {
            taken[f] = true;
            centroids[c] = frames[f].to_vec();
        }
    }
}

/// Index of the codebook with the lowest average distortion; ties to the first.
pub fn vq_classify(codebooks: &[Codebook], obs: &FeatureSequence) -> Result<usize> {
    let scores = distortions(codebooks, obs)?;
    Ok(argmin(&scores).unwrap_or(0))
}

pub fn distortions(codebooks: &[Codebook], obs: &FeatureSequence) -> Result<Vec<f64>> {
    if codebooks.is_empty() {
        return Err(Error::EmptyInput("codebook list"));
    }
    codebooks.iter().map(|c| c.average_distortion(obs)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqBank {
    pub codebooks: Vec<Codebook>,
    pub features: MfccConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqConfig {
    pub codebook_size: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for VqConfig {
    fn default() -> Self {
        Self { codebook_size: DEFAULT_CODEBOOK_SIZE, max_iters: 100, seed: 0 }
    }
}

/// Pools every training frame of a condition into that condition's codebook.
pub fn train_vq_bank(labels: &[String], corpus: &[LabeledUtterance], cfg: &VqConfig) -> Result<VqBank> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("condition labels"));
    }
    let codebooks = labels
        .par_iter()
        .enumerate()
        .map(|(c, label)| {
            let frames: Vec<&[f64]> = corpus
                .iter()
                .filter(|u| u.label == c)
                .flat_map(|u| u.utterance.features.frames())
                .collect();
            if frames.is_empty() {
                return Err(Error::InvalidCorpus(format!("condition {label:?} has no training frames")));
            }
            let seed = derive_seed(cfg.seed, &format!("vq/{label}"));
            let mut book = train_codebook(&frames, cfg.codebook_size, seed, cfg.max_iters)?;
            book.label.clone_from(label);
            Ok(book)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VqBank { codebooks, features: MfccConfig::default() })
}
