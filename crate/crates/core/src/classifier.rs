//! Per-condition model banks, acoustic/prosodic score fusion and the
//! identification decision.
//!
//! Scores are log-likelihoods `log P(O | model)`. With uniform priors over
//! conditions the argmax over likelihoods equals the argmax over posteriors,
//! so no prior term is added.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSequence, MfccConfig};
use crate::hmm::{init_model, log_likelihood, train, GmmEmission, Hmm2Model, Order, Shape, Topology, TrainConfig};
use crate::math::{argmax, derive_seed, rng_from_seed};
use crate::suprasegmental::{
    prosodic_observations, train_suprasegmental, SupraConfig, SuprasegmentalModel,
};
use crate::hmm::forward;
use crate::utterance::Utterance;

/// `(1 - alpha) * log_acoustic + alpha * log_prosodic`. At the endpoints the
/// unused stream is ignored entirely, so it may be infinite.
pub fn fuse_scores(log_acoustic: f64, log_prosodic: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return finite(log_acoustic);
    }
    if alpha == 1.0 {
        return finite(log_prosodic);
    }
    Ok((1.0 - alpha) * finite(log_acoustic)? + alpha * finite(log_prosodic)?)
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidArgument(format!("score {x} is not finite")))
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidWeight(alpha))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionModel {
    pub label: String,
    pub acoustic: Hmm2Model,
    pub suprasegmental: Option<SuprasegmentalModel>,
}

/// A training or test utterance with its condition index into the bank's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledUtterance {
    pub label: usize,
    pub utterance: Utterance,
}

/// Both score streams for one utterance, one entry per condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamScores {
    pub acoustic: Vec<f64>,
    pub prosodic: Option<Vec<f64>>,
}

impl StreamScores {
    pub fn fused(&self, alpha: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        match (&self.prosodic, alpha == 0.0) {
            (_, true) => self.acoustic.iter().map(|&a| fuse_scores(a, 0.0, 0.0)).collect(),
            (Some(p), false) => {
                self.acoustic.iter().zip(p).map(|(&a, &p)| fuse_scores(a, p, alpha)).collect()
            }
            (None, false) => Err(Error::MissingSuprasegmental(format!(
                "alpha {alpha} needs prosodic scores"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub index: usize,
    pub label: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionBank {
    pub conditions: Vec<ConditionModel>,
    pub alpha: f64,
    /// Divide each stream by its observation count before fusing.
    pub normalize: bool,
    pub features: MfccConfig,
}

impl ConditionBank {
    pub fn new(conditions: Vec<ConditionModel>, alpha: f64) -> Result<Self> {
        let bank = Self { conditions, alpha, normalize: false, features: MfccConfig::default() };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::EmptyInput("condition bank"));
        }
        check_alpha(self.alpha)?;
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.conditions {
            if c.label.is_empty() {
                return Err(Error::InvalidConfig("condition label must be non-empty".into()));
            }
            if !seen.insert(c.label.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate condition label {:?}", c.label)));
            }
            c.acoustic.validate()?;
            if self.alpha > 0.0 && c.suprasegmental.is_none() {
                return Err(Error::MissingSuprasegmental(format!("condition {:?} at alpha {}", c.label, self.alpha)));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.conditions.iter().map(|c| c.label.clone()).collect()
    }

    pub fn has_suprasegmental(&self) -> bool {
        self.conditions.iter().all(|c| c.suprasegmental.is_some())
    }

    pub fn acoustic_scores(&self, obs: &FeatureSequence) -> Result<Vec<f64>> {
        self.conditions
            .iter()
            .map(|c| {
                let ll = log_likelihood(&c.acoustic, obs)?;
                Ok(if self.normalize { ll / obs.len() as f64 } else { ll })
            })
            .collect()
    }

    pub fn prosodic_scores(&self, utt: &Utterance) -> Result<Vec<f64>> {
        self.conditions
            .iter()
            .map(|c| {
                let supra = c.suprasegmental.as_ref().ok_or_else(|| {
                    Error::MissingSuprasegmental(format!("condition {:?}", c.label))
                })?;
                let obs = prosodic_observations(&c.acoustic, &supra.mapping, utt)?;
                let ll = forward(&supra.hmm, &obs)?.1;
                Ok(if self.normalize { ll / obs.len() as f64 } else { ll })
            })
            .collect()
    }

    /// Computes only the streams that `alpha` actually uses.
    pub fn stream_scores(&self, utt: &Utterance, alpha: f64) -> Result<StreamScores> {
        check_alpha(alpha)?;
        let acoustic = if alpha < 1.0 {
            self.acoustic_scores(&utt.features)?
        } else {
            vec![0.0; self.conditions.len()]
        };
        let prosodic = if alpha > 0.0 { Some(self.prosodic_scores(utt)?) } else { None };
        Ok(StreamScores { acoustic, prosodic })
    }

    /// Both streams, for re-fusing at many weights without rescoring.
    pub fn all_streams(&self, utt: &Utterance) -> Result<StreamScores> {
        Ok(StreamScores {
            acoustic: self.acoustic_scores(&utt.features)?,
            prosodic: Some(self.prosodic_scores(utt)?),
        })
    }

    pub fn classify_at(&self, utt: &Utterance, alpha: f64) -> Result<Decision> {
        self.validate()?;
        let scores = self.stream_scores(utt, alpha)?.fused(alpha)?;
        Ok(self.decide(scores))
    }

    pub fn classify(&self, utt: &Utterance) -> Result<Decision> {
        self.classify_at(utt, self.alpha)
    }

    pub(crate) fn decide(&self, scores: Vec<f64>) -> Decision {
        let index = argmax(&scores).unwrap_or(0);
        Decision { index, label: self.conditions[index].label.clone(), scores }
    }
}

/// Label and fused scores for one utterance under the bank's own weight.
pub fn classify(bank: &ConditionBank, utt: &Utterance) -> Result<Decision> {
    bank.classify(utt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub order: Order,
    pub shape: Shape,
    pub n_states: usize,
    pub mixtures: usize,
    pub supra: Option<SupraConfig>,
    pub alpha: f64,
    pub normalize: bool,
    pub train: TrainConfig,
    pub seed: u64,
    pub features: MfccConfig,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            order: Order::Second,
            shape: Shape::Circular,
            n_states: 6,
            mixtures: 10,
            supra: Some(SupraConfig::default()),
            alpha: 0.5,
            normalize: false,
            train: TrainConfig::default(),
            seed: 0,
            features: MfccConfig::default(),
        }
    }
}

/// Trains every condition's acoustic model, then its suprasegmental layer.
pub fn train_bank(
    labels: &[String],
    corpus: &[LabeledUtterance],
    cfg: &BankConfig,
) -> Result<ConditionBank> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("condition labels"));
    }
    check_alpha(cfg.alpha)?;
    if cfg.alpha > 0.0 && cfg.supra.is_none() {
        return Err(Error::MissingSuprasegmental(format!(
            "alpha {} requires a suprasegmental layer",
            cfg.alpha
        )));
    }
    if let Some(bad) = corpus.iter().find(|u| u.label >= labels.len()) {
        return Err(Error::UnknownLabel(format!("index {} for {:?}", bad.label, bad.utterance.id)));
    }
    let topo = Topology::new(cfg.order, cfg.shape, cfg.n_states)?;
    let conditions = labels
        .par_iter()
        .enumerate()
        .map(|(c, label)| {
            let utts: Vec<&Utterance> =
                corpus.iter().filter(|u| u.label == c).map(|u| &u.utterance).collect();
            if utts.is_empty() {
                return Err(Error::InvalidCorpus(format!("condition {label:?} has no training utterances")));
            }
            let acoustic = train_acoustic(topo, &utts, cfg, label)?;
            let suprasegmental = match &cfg.supra {
                Some(s) => {
                    let s = SupraConfig { seed: derive_seed(cfg.seed, &format!("supra/{label}")), ..*s };
                    Some(train_suprasegmental(&acoustic, &utts, &s)?)
                }
                None => None,
            };
            Ok(ConditionModel { label: label.clone(), acoustic, suprasegmental })
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = ConditionBank {
        conditions,
        alpha: cfg.alpha,
        normalize: cfg.normalize,
        features: cfg.features.clone(),
    };
    bank.validate()?;
    Ok(bank)
}

fn train_acoustic(topo: Topology, utts: &[&Utterance], cfg: &BankConfig, label: &str) -> Result<Hmm2Model> {
    let dim = utts[0].features.dim();
    let seed = derive_seed(cfg.seed, &format!("acoustic/{label}"));
    let mut start = init_model(topo, dim, cfg.mixtures, seed)?;
    let mut rng = rng_from_seed(derive_seed(seed, "emissions"));
    let frames = utts.iter().flat_map(|u| u.features.frames());
    start.emissions = GmmEmission::from_data(topo.n_states, cfg.mixtures, frames, dim, &mut rng)?;
    let corpus: Vec<FeatureSequence> = utts.iter().map(|u| u.features.clone()).collect();
    train(&start, &corpus, &cfg.train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fusion_arithmetic() {
        assert_eq!(fuse_scores(-100.0, -80.0, 0.5).unwrap(), -90.0);
        assert_eq!(fuse_scores(-100.0, -80.0, 0.0).unwrap(), -100.0);
        assert_eq!(fuse_scores(-100.0, -80.0, 1.0).unwrap(), -80.0);
        assert_eq!(fuse_scores(-100.0, f64::NEG_INFINITY, 0.0).unwrap(), -100.0);
        assert!(matches!(fuse_scores(-1.0, -1.0, 1.5), Err(Error::InvalidWeight(_))));
        assert!(matches!(fuse_scores(-1.0, -1.0, -0.1), Err(Error::InvalidWeight(_))));
        assert!(fuse_scores(f64::NAN, -1.0, 0.5).is_err());
    }

    #[test]
    fn missing_prosody_only_fails_when_used() {
        let s = StreamScores { acoustic: vec![-1.0, -2.0], prosodic: None };
        assert_eq!(s.fused(0.0).unwrap(), vec![-1.0, -2.0]);
        assert!(matches!(s.fused(0.5), Err(Error::MissingSuprasegmental(_))));
    }

    #[test]
    fn empty_bank_rejected() {
        assert!(matches!(ConditionBank::new(vec![], 0.0), Err(Error::EmptyInput(_))));
    }
}
