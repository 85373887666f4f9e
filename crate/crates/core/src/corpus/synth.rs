//! Synthetic corpora with known generating models.
//!
//! Every condition shares one second-order circular state process and one
//! set of base state means. A condition shifts all acoustic means by
//! `separation` (in units of the unit emission SD) along its own random
//! direction, and shifts the per-frame prosodic descriptors of each
//! suprasegmental block by `prosodic_separation` descriptor SDs. With both
//! separations at zero all generators are identical.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{prosody_path, track_sequence, CorpusManifest, RecordKind, SplitPlan, UtteranceRecord};
use crate::classifier::LabeledUtterance;
use crate::error::{Error, Result};
use crate::features::{write_features, FeatureSequence, ProsodyFrame, FEATURE_DIM};
use crate::hmm::{sample_with, Gmm, GmmEmission, Hmm2Model, Order, Shape, Topology, Transitions};
use crate::math::{derive_seed, rng_from_seed};
use crate::utterance::Utterance;

pub const DEFAULT_CONDITIONS: [&str; 6] = ["neutral", "angry", "slow", "loud", "soft", "fast"];

/// Typical level, spread and per-block step of (log-energy, pitch, ZCR).
const PROSODY_BASE: [f64; 3] = [10.0, 150.0, 0.1];
const PROSODY_SD: [f64; 3] = [1.0, 15.0, 0.02];
const PROSODY_BLOCK_STEP: f64 = 2.0;
const BASE_MEAN_SD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_conditions: usize,
    pub separation: f64,
    pub prosodic_separation: f64,
    pub speakers: usize,
    pub texts: usize,
    pub reps: usize,
    pub train_speakers: usize,
    pub train_texts: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub dim: usize,
    pub n_states: usize,
    pub n_supra: usize,
    /// Length of a per-speaker shift of the acoustic means.
    pub speaker_spread: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_conditions: 6,
            separation: 5.0,
            prosodic_separation: 5.0,
            speakers: 8,
            texts: 20,
            reps: 2,
            train_speakers: 5,
            train_texts: 10,
            min_frames: 40,
            max_frames: 80,
            dim: FEATURE_DIM,
            n_states: 6,
            n_supra: 2,
            speaker_spread: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synthetic corpus: {m}")));
        if self.n_conditions < 2 {
            return bad("need at least 2 conditions");
        }
        if !(self.separation >= 0.0) || !(self.prosodic_separation >= 0.0) || !(self.speaker_spread >= 0.0) {
            return bad("separations must be non-negative");
        }
        if self.train_speakers == 0 || self.train_speakers >= self.speakers {
            return bad("train speakers must leave at least one test speaker");
        }
        if self.train_texts == 0 || self.train_texts >= self.texts {
            return bad("train texts must leave at least one test text");
        }
        if self.reps == 0 || self.dim == 0 {
            return bad("reps and dim must be positive");
        }
        if self.min_frames == 0 || self.max_frames < self.min_frames {
            return bad("frame range is empty");
        }
        if self.n_states < 3 || self.n_supra == 0 || self.n_states % self.n_supra != 0 {
            return bad("need at least 3 states, divisible into suprasegmental blocks");
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        if self.n_conditions == DEFAULT_CONDITIONS.len() {
            DEFAULT_CONDITIONS.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.n_conditions).map(|c| format!("c{c}")).collect()
        }
    }
}

/// The hidden model behind one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGenerator {
    pub label: String,
    pub acoustic: Hmm2Model,
    /// Per suprasegmental block: mean of (log-energy, pitch, ZCR).
    pub prosody_means: Vec<[f64; 3]>,
    pub block: usize,
    pub prosody_sd: [f64; 3],
}

impl ConditionGenerator {
    fn sample<R: Rng>(&self, shift: &[f64], t: usize, rng: &mut R) -> Result<(FeatureSequence, Vec<ProsodyFrame>)> {
        let mut model = self.acoustic.clone();
        for g in &mut model.emissions.states {
            for (m, s) in g.means[0].iter_mut().zip(shift) {
                *m += s;
            }
        }
        let (seq, path) = sample_with(&model, t, rng)?;
        let track = path
            .iter()
            .map(|&q| {
                let mu = self.prosody_means[q / self.block];
                let mut v = [0.0; 3];
                for d in 0..3 {
                    let z: f64 = rng.sample(StandardNormal);
                    v[d] = (mu[d] + self.prosody_sd[d] * z).max(0.0);
                }
                round_frame(ProsodyFrame { log_energy: v[0], pitch: v[1], zcr: v[2] })
            })
            .collect();
        let data = seq.as_slice().iter().map(|&x| x as f32 as f64).collect();
        Ok((FeatureSequence::new("", seq.dim(), data)?, track))
    }
}

fn round_frame(f: ProsodyFrame) -> ProsodyFrame {
    let r = |x: f64| x as f32 as f64;
    ProsodyFrame { log_energy: r(f.log_energy), pitch: r(f.pitch), zcr: r(f.zcr) }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Direction-persistent walk around the ring: the next step tends to repeat
/// the previous one.
fn shared_transitions(n: usize) -> Transitions {
    let step = |from: usize, to: usize| -> usize {
        if to == from {
            0
        } else if to == (from + 1) % n {
            1
        } else {
            2
        }
    };
    // rows: previous move was stay / forward / back; columns: stay / forward / back
    let table = [[0.6, 0.3, 0.1], [0.5, 0.45, 0.05], [0.5, 0.1, 0.4]];
    let mut matrix = vec![0.0; n * n];
    let mut tensor = vec![0.0; n * n * n];
    for j in 0..n {
        for (col, k) in [j, (j + 1) % n, (j + n - 1) % n].into_iter().enumerate() {
            matrix[j * n + k] = table[0][col];
        }
    }
    for i in 0..n {
        for j in 0..n {
            // previous moves that the ring cannot make still need a valid row
            let prev = if j == i || (j != (i + 1) % n && j != (i + n - 1) % n) { 0 } else { step(i, j) };
            for (col, k) in [j, (j + 1) % n, (j + n - 1) % n].into_iter().enumerate() {
                tensor[(i * n + j) * n + k] = table[prev][col];
            }
        }
    }
    Transitions { n_states: n, matrix, tensor: Some(tensor) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: SynthSpec,
    pub manifest: CorpusManifest,
    pub plan: SplitPlan,
    /// Parallel to `manifest.records`.
    pub utterances: Vec<Utterance>,
    pub generators: Vec<ConditionGenerator>,
}

impl SyntheticCorpus {
    /// Train and test sides of the split plan, with condition indices.
    pub fn split(&self) -> (Vec<LabeledUtterance>, Vec<LabeledUtterance>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (r, u) in self.manifest.records.iter().zip(&self.utterances) {
            let label = self.manifest.condition_index(&r.condition).expect("declared condition");
            let item = LabeledUtterance { label, utterance: u.clone() };
            if self.plan.train_speakers.contains(&r.speaker) && self.plan.train_texts.contains(&r.text) {
                train.push(item);
            } else if self.plan.test_speakers.contains(&r.speaker) && self.plan.test_texts.contains(&r.text) {
                test.push(item);
            }
        }
        (train, test)
    }

    /// Writes `corpus.tsv`, `split.tsv` and `features/<id>.feat` + `.pros`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let feat_dir = dir.join("features");
        fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
        for (r, u) in self.manifest.records.iter().zip(&self.utterances) {
            let path = dir.join(&r.path);
            write_features(&path, &u.features)?;
            if let crate::utterance::Prosody::Track(track) = &u.prosody {
                write_features(&prosody_path(&path), &track_sequence(&u.id, track)?)?;
            }
        }
        self.manifest.write(&dir.join("corpus.tsv"))?;
        self.plan.write(&dir.join("split.tsv"))
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let labels = spec.labels();
    let n = spec.n_states;
    let topo = Topology::new(Order::Second, Shape::Circular, n)?;
    let transitions = shared_transitions(n);

    let mut base_rng = rng_from_seed(derive_seed(spec.seed, "synth/base"));
    let base_means: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..spec.dim).map(|_| BASE_MEAN_SD * base_rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    let generators = labels
        .iter()
        .map(|label| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &format!("synth/condition/{label}")));
            let dir = unit_vector(&mut rng, spec.dim);
            let states = base_means
                .iter()
                .map(|mu| Gmm {
                    weights: vec![1.0],
                    means: vec![mu.iter().zip(&dir).map(|(m, d)| m + spec.separation * d).collect()],
                    variances: vec![vec![1.0; spec.dim]],
                })
                .collect();
            let emissions = GmmEmission { dim: spec.dim, states };
            let acoustic = Hmm2Model::new(topo, vec![1.0 / n as f64; n], transitions.clone(), emissions)?;
            let prosody_means = (0..spec.n_supra)
                .map(|p| {
                    let v = unit_vector(&mut rng, 3);
                    let mut mu = [0.0; 3];
                    for d in 0..3 {
                        mu[d] = PROSODY_BASE[d]
                            + PROSODY_SD[d] * (PROSODY_BLOCK_STEP * p as f64 + spec.prosodic_separation * v[d]);
                    }
                    mu
                })
                .collect();
            Ok(ConditionGenerator {
                label: label.clone(),
                acoustic,
                prosody_means,
                prosody_sd: PROSODY_SD,
                block: n / spec.n_supra,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let speakers: Vec<String> = (1..=spec.speakers).map(|s| format!("s{s:02}")).collect();
    let texts: Vec<String> = (1..=spec.texts).map(|t| format!("t{t:02}")).collect();
    let shifts: Vec<Vec<f64>> = speakers
        .iter()
        .map(|s| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, &format!("synth/speaker/{s}")));
            unit_vector(&mut rng, spec.dim).into_iter().map(|x| x * spec.speaker_spread).collect()
        })
        .collect();
    let span = (spec.max_frames - spec.min_frames + 1) as u64;
    let lengths: Vec<usize> = texts
        .iter()
        .map(|t| spec.min_frames + (derive_seed(spec.seed, &format!("synth/text/{t}")) % span) as usize)
        .collect();

    let mut records = Vec::new();
    let mut utterances = Vec::new();
    for g in &generators {
        for (s, speaker) in speakers.iter().enumerate() {
            for (t, text) in texts.iter().enumerate() {
                for rep in 1..=spec.reps {
                    let id = format!("{}_{speaker}_{text}_r{rep}", g.label);
                    let mut rng = rng_from_seed(derive_seed(spec.seed, &format!("synth/utt/{id}")));
                    let (mut features, track) = g.sample(&shifts[s], lengths[t], &mut rng)?;
                    features.id.clone_from(&id);
                    utterances.push(Utterance::from_features(features, Some(track))?);
                    records.push(UtteranceRecord {
                        path: format!("features/{id}.feat"),
                        id,
                        speaker: speaker.clone(),
                        text: text.clone(),
                        condition: g.label.clone(),
                        rep: rep as u32,
                        kind: RecordKind::Feat,
                    });
                }
            }
        }
    }
    let manifest = CorpusManifest::new(labels, records)?;
    let set = |xs: &[String]| xs.iter().cloned().collect::<BTreeSet<_>>();
    let plan = SplitPlan {
        train_speakers: set(&speakers[..spec.train_speakers]),
        test_speakers: set(&speakers[spec.train_speakers..]),
        train_texts: set(&texts[..spec.train_texts]),
        test_texts: set(&texts[spec.train_texts..]),
    };
    Ok(SyntheticCorpus { spec: spec.clone(), manifest, plan, utterances, generators })
}
