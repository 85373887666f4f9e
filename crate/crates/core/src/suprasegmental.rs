//! The suprasegmental layer.
//!
//! Blocks of acoustic states are summarized into suprasegmental states. An
//! utterance is aligned with its acoustic model, the aligned path is mapped
//! through the block assignment, runs of equal labels become segments, and
//! each segment contributes one prosodic observation to a small HMM over
//! suprasegmental states.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSequence, PROSODIC_DIM};
use crate::hmm::{
    forward, init_any, train, viterbi_align, GmmEmission, Hmm2Model, Order, Shape, Topology,
    TrainConfig,
};
use crate::math::{derive_seed, rng_from_seed};
use crate::utterance::Utterance;

/// Assignment of every acoustic state to a suprasegmental state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMapping {
    pub assignment: Vec<usize>,
    pub n_supra: usize,
}

impl StateMapping {
    /// Contiguous equal blocks: with 6 acoustic and 2 suprasegmental states,
    /// states 0-2 map to 0 and 3-5 map to 1.
    pub fn blocks(n_acoustic: usize, n_supra: usize) -> Result<Self> {
        if n_supra == 0 || n_acoustic == 0 || n_acoustic % n_supra != 0 {
            return Err(Error::InvalidConfig(format!(
                "{n_acoustic} acoustic states cannot be split into {n_supra} equal blocks"
            )));
        }
        let width = n_acoustic / n_supra;
        Self::new((0..n_acoustic).map(|q| q / width).collect(), n_supra)
    }

    pub fn new(assignment: Vec<usize>, n_supra: usize) -> Result<Self> {
        let mapping = Self { assignment, n_supra };
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n_supra];
        for &p in &self.assignment {
            if p >= self.n_supra {
                return Err(Error::InvalidConfig(format!("suprasegmental state {p} out of range")));
            }
            seen[p] = true;
        }
        if self.assignment.is_empty() || !seen.iter().all(|&s| s) {
            return Err(Error::InvalidConfig("state mapping must be surjective".into()));
        }
        Ok(())
    }

    pub fn n_acoustic(&self) -> usize {
        self.assignment.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub label: usize,
    pub frames: Range<usize>,
}

/// Suprasegmental labels with the frame runs they cover. Adjacent segments
/// always carry different labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSequence {
    pub segments: Vec<Segment>,
    pub frame_count: usize,
}

impl SegmentSequence {
    /// Run-length encodes a label sequence.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        for (t, &label) in labels.iter().enumerate() {
            match segments.last_mut() {
                Some(last) if last.label == label => last.frames.end = t + 1,
                _ => segments.push(Segment { label, frames: t..t + 1 }),
            }
        }
        Self { segments, frame_count: labels.len() }
    }

    /// Re-merges adjacent segments that share a label.
    pub fn merged(&self) -> Self {
        let labels: Vec<usize> = self
            .segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.label, s.frames.len()))
            .collect();
        Self::from_labels(&labels)
    }

    pub fn frame_ranges(&self) -> Vec<Range<usize>> {
        self.segments.iter().map(|s| s.frames.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Aligns `obs` with the acoustic model and maps the path to segments.
pub fn segment_by_alignment(
    acoustic: &Hmm2Model,
    mapping: &StateMapping,
    obs: &FeatureSequence,
) -> Result<SegmentSequence> {
    if mapping.n_acoustic() != acoustic.n_states() {
        return Err(Error::InvalidConfig(format!(
            "mapping covers {} states, acoustic model has {}",
            mapping.n_acoustic(),
            acoustic.n_states()
        )));
    }
    let (path, _) = viterbi_align(acoustic, obs)?;
    let labels: Vec<usize> = path.iter().map(|&q| mapping.assignment[q]).collect();
    Ok(SegmentSequence::from_labels(&labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupraConfig {
    pub order: Order,
    pub shape: Shape,
    pub n_supra: usize,
    pub mixtures: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SupraConfig {
    fn default() -> Self {
        Self {
            order: Order::Second,
            shape: Shape::Circular,
            n_supra: 2,
            mixtures: 3,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuprasegmentalModel {
    pub mapping: StateMapping,
    pub hmm: Hmm2Model,
}

impl SuprasegmentalModel {
    pub fn new(mapping: StateMapping, hmm: Hmm2Model) -> Result<Self> {
        mapping.validate()?;
        if hmm.n_states() != mapping.n_supra {
            return Err(Error::InvalidConfig(format!(
                "suprasegmental HMM has {} states, mapping declares {}",
                hmm.n_states(),
                mapping.n_supra
            )));
        }
        hmm.validate()?;
        Ok(Self { mapping, hmm })
    }

    /// The S x S matrix between suprasegmental states (the start-up matrix
    /// for second-order layers).
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        self.hmm.transition_matrix()
    }
}

/// Segments an utterance with `acoustic` and measures one prosodic vector per segment.
pub fn prosodic_observations(
    acoustic: &Hmm2Model,
    mapping: &StateMapping,
    utt: &Utterance,
) -> Result<FeatureSequence> {
    let segs = segment_by_alignment(acoustic, mapping, &utt.features)?;
    Ok(utt.prosodic_sequence(&segs.frame_ranges())?.0)
}

/// Trains one condition's suprasegmental layer on top of its trained acoustic model.
pub fn train_suprasegmental(
    acoustic: &Hmm2Model,
    utterances: &[&Utterance],
    cfg: &SupraConfig,
) -> Result<SuprasegmentalModel> {
    if utterances.is_empty() {
        return Err(Error::EmptyInput("suprasegmental training corpus"));
    }
    let mapping = StateMapping::blocks(acoustic.n_states(), cfg.n_supra)?;
    let sequences: Vec<FeatureSequence> = utterances
        .par_iter()
        .map(|u| prosodic_observations(acoustic, &mapping, u))
        .collect::<Result<_>>()?;
    train_prosodic_layer(mapping, &sequences, cfg)
}

/// EM on already-extracted prosodic sequences.
pub fn train_prosodic_layer(
    mapping: StateMapping,
    sequences: &[FeatureSequence],
    cfg: &SupraConfig,
) -> Result<SuprasegmentalModel> {
    let topo = Topology::new(cfg.order, cfg.shape, cfg.n_supra)?;
    let dim = sequences.first().map_or(PROSODIC_DIM, FeatureSequence::dim);
    let mut start = init_any(topo, dim, cfg.mixtures, cfg.seed)?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "suprasegmental-emissions"));
    start.emissions = GmmEmission::from_data(
        cfg.n_supra,
        cfg.mixtures,
        sequences.iter().flat_map(|s| s.frames()),
        dim,
        &mut rng,
    )?;
    let hmm = train(&start, sequences, &cfg.train)?;
    SuprasegmentalModel::new(mapping, hmm)
}

/// `log P(prosodic observations | layer)`, with segments taken from this
/// condition's own acoustic alignment.
pub fn score_suprasegmental(
    model: &SuprasegmentalModel,
    acoustic: &Hmm2Model,
    utt: &Utterance,
) -> Result<f64> {
    let obs = prosodic_observations(acoustic, &model.mapping, utt)?;
    Ok(forward(&model.hmm, &obs)?.1)
}
