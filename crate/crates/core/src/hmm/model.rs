use serde::{Deserialize, Serialize};

use super::gmm::{EmissionScorer, GmmEmission};
use super::topology::{Order, Topology};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::math::{rng_from_seed, safe_ln};

const SUM_TOLERANCE: f64 = 1e-9;

/// State-transition probabilities.
///
/// `matrix[i * N + j]` is `P(j | i)`. For second-order models it only drives
/// the step from the first to the second frame, and
/// `tensor[(i * N + j) * N + k]` is `P(k | i, j)` for every later step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub n_states: usize,
    pub matrix: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<Vec<f64>>,
}

impl Transitions {
    /// Uniform over each state's successor set.
    pub fn uniform(topology: &Topology) -> Self {
        let n = topology.n_states;
        let row = |j: usize| {
            let adj = topology.adjacency(j);
            let p = 1.0 / adj.len() as f64;
            let mut r = vec![0.0; n];
            for k in adj {
                r[k] = p;
            }
            r
        };
        let matrix: Vec<f64> = (0..n).flat_map(row).collect();
        let tensor = match topology.order {
            Order::First => None,
            Order::Second => Some((0..n * n).flat_map(|ij| row(ij % n)).collect()),
        };
        Self { n_states: n, matrix, tensor }
    }

    pub fn order(&self) -> Order {
        if self.tensor.is_some() {
            Order::Second
        } else {
            Order::First
        }
    }

    pub fn first(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n_states + j]
    }

    pub fn second(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        let n = self.n_states;
        self.tensor.as_ref().map(|t| t[(i * n + j) * n + k])
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        let n = topology.n_states;
        if self.n_states != n || self.matrix.len() != n * n {
            return Err(Error::InvalidConfig("transition matrix has wrong size".into()));
        }
        if self.order() != topology.order {
            return Err(Error::InvalidConfig("transition order does not match topology".into()));
        }
        let check_row = |row: &[f64], from: usize, what: &str| -> Result<()> {
            for (k, &p) in row.iter().enumerate() {
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{what}: invalid probability {p}")));
                }
                if p != 0.0 && !topology.allows(from, k) {
                    return Err(Error::InvalidConfig(format!(
                        "{what}: transition {from}->{k} outside topology"
                    )));
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidConfig(format!("{what}: row sums to {s}")));
            }
            Ok(())
        };
        for i in 0..n {
            check_row(&self.matrix[i * n..(i + 1) * n], i, "matrix")?;
        }
        if let Some(t) = &self.tensor {
            if t.len() != n * n * n {
                return Err(Error::InvalidConfig("transition tensor has wrong size".into()));
            }
            for ij in 0..n * n {
                check_row(&t[ij * n..(ij + 1) * n], ij % n, "tensor")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub log_likelihood: Option<f64>,
    /// Corpus log-likelihood of each successive parameter set.
    #[serde(default)]
    pub history: Vec<f64>,
    /// Set when some variance was clamped to the floor during re-estimation.
    #[serde(default)]
    pub variance_floored: bool,
}

/// An HMM of first or second order with Gaussian-mixture emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hmm2Model {
    pub topology: Topology,
    pub initial: Vec<f64>,
    pub transitions: Transitions,
    pub emissions: GmmEmission,
    #[serde(default)]
    pub meta: TrainingMeta,
}

/// Log-space copies of the probability tables.
pub(crate) struct LogParams {
    pub n: usize,
    pub initial: Vec<f64>,
    pub matrix: Vec<f64>,
    pub tensor: Option<Vec<f64>>,
}

impl Hmm2Model {
    pub fn new(
        topology: Topology,
        initial: Vec<f64>,
        transitions: Transitions,
        emissions: GmmEmission,
    ) -> Result<Self> {
        let model = Self { topology, initial, transitions, emissions, meta: TrainingMeta::default() };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.n_states;
        if self.initial.len() != n {
            return Err(Error::InvalidConfig("initial distribution has wrong size".into()));
        }
        if self.initial.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidConfig("negative initial probability".into()));
        }
        let s: f64 = self.initial.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidConfig(format!("initial distribution sums to {s}")));
        }
        self.transitions.validate(&self.topology)?;
        if self.emissions.n_states() != n {
            return Err(Error::InvalidConfig("emission count does not match state count".into()));
        }
        if self.emissions.dim == 0 {
            return Err(Error::InvalidConfig("emission dimension must be positive".into()));
        }
        self.emissions.validate()
    }

    pub fn n_states(&self) -> usize {
        self.topology.n_states
    }

    pub fn dim(&self) -> usize {
        self.emissions.dim
    }

    pub fn n_mixtures(&self) -> usize {
        self.emissions.states.first().map_or(0, |g| g.n_components())
    }

    pub(crate) fn log_params(&self) -> LogParams {
        LogParams {
            n: self.n_states(),
            initial: self.initial.iter().map(|&p| safe_ln(p)).collect(),
            matrix: self.transitions.matrix.iter().map(|&p| safe_ln(p)).collect(),
            tensor: self
                .transitions
                .tensor
                .as_ref()
                .map(|t| t.iter().map(|&p| safe_ln(p)).collect()),
        }
    }

    pub(crate) fn check_observations(&self, obs: &FeatureSequence) -> Result<()> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: obs.dim() });
        }
        if let Some(frame) = obs.first_non_finite() {
            return Err(Error::NonFinite { frame });
        }
        Ok(())
    }

    /// `T x N` table of `log b_j(o_t)`.
    pub fn log_emissions(&self, obs: &FeatureSequence) -> Result<Vec<f64>> {
        self.check_observations(obs)?;
        Ok(emission_table(&self.emissions.scorer(), self.n_states(), obs))
    }

    /// First-order view of the transitions: the matrix itself for order-1
    /// models and the start-up matrix for order-2 models.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        self.transitions.matrix.chunks(n).map(<[f64]>::to_vec).collect()
    }
}

pub(crate) fn emission_table(scorer: &EmissionScorer, n: usize, obs: &FeatureSequence) -> Vec<f64> {
    let mut out = Vec::with_capacity(obs.len() * n);
    for x in obs.frames() {
        for j in 0..n {
            out.push(scorer.log_density(j, x));
        }
    }
    out
}

/// Builds the starting point for training: uniform initial distribution,
/// transitions uniform over each successor set, seeded standard-normal means,
/// unit variances and uniform mixture weights.
pub fn init_model(topology: Topology, dim: usize, m: usize, seed: u64) -> Result<Hmm2Model> {
    if topology.n_states < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 states, got {}",
            topology.n_states
        )));
    }
    init_any(topology, dim, m, seed)
}

/// [`init_model`] without the two-state minimum; single-state models appear
/// as degenerate suprasegmental layers.
pub(crate) fn init_any(topology: Topology, dim: usize, m: usize, seed: u64) -> Result<Hmm2Model> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one mixture component".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("observation dimension must be positive".into()));
    }
    let n = topology.n_states;
    let mut rng = rng_from_seed(seed);
    Hmm2Model::new(
        topology,
        vec![1.0 / n as f64; n],
        Transitions::uniform(&topology),
        GmmEmission::random(n, dim, m, &mut rng),
    )
}
