//! Named recognition systems.
//!
//! Each system variant is a [`SystemBuilder`] registered under a short name;
//! training one yields a boxed [`Recognizer`]. The HMM family differs only in
//! chain order, topology and whether a suprasegmental layer is stacked on top.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline_vq::{distortions, train_vq_bank, VqBank, VqConfig, DEFAULT_CODEBOOK_SIZE};
use crate::classifier::{train_bank, BankConfig, ConditionBank, LabeledUtterance};
use crate::error::{Error, Result};
use crate::features::MfccConfig;
use crate::hmm::{Order, Shape, TrainConfig};
use crate::math::argmax;
use crate::store::{load_bank, save_condition_bank, save_vq_bank, StoredBank};
use crate::suprasegmental::SupraConfig;
use crate::utterance::Utterance;

pub trait Recognizer: Send + Sync + fmt::Debug {
    fn system(&self) -> &str;
    fn labels(&self) -> Vec<String>;
    /// One score per condition; larger is better.
    fn scores(&self, utt: &Utterance) -> Result<Vec<f64>>;
    fn save(&self, dir: &Path) -> Result<()>;

    fn classify(&self, utt: &Utterance) -> Result<usize> {
        Ok(argmax(&self.scores(utt)?).unwrap_or(0))
    }

    /// The underlying HMM bank, for analyses that re-fuse score streams.
    fn condition_bank(&self) -> Option<&ConditionBank> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmRecognizer {
    pub system: String,
    pub bank: ConditionBank,
}

impl Recognizer for HmmRecognizer {
    fn system(&self) -> &str {
        &self.system
    }
    fn labels(&self) -> Vec<String> {
        self.bank.labels()
    }
    fn scores(&self, utt: &Utterance) -> Result<Vec<f64>> {
        Ok(self.bank.classify(utt)?.scores)
    }
    fn save(&self, dir: &Path) -> Result<()> {
        save_condition_bank(dir, &self.system, &self.bank)
    }
    fn condition_bank(&self) -> Option<&ConditionBank> {
        Some(&self.bank)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqRecognizer {
    pub system: String,
    pub bank: VqBank,
}

impl Recognizer for VqRecognizer {
    fn system(&self) -> &str {
        &self.system
    }
    fn labels(&self) -> Vec<String> {
        self.bank.codebooks.iter().map(|c| c.label.clone()).collect()
    }
    /// Negated average distortion, so the argmax picks the closest codebook.
    fn scores(&self, utt: &Utterance) -> Result<Vec<f64>> {
        Ok(distortions(&self.bank.codebooks, &utt.features)?.into_iter().map(|d| -d).collect())
    }
    fn save(&self, dir: &Path) -> Result<()> {
        save_vq_bank(dir, &self.system, &self.bank)
    }
}

/// Settings shared by every system; presets fill in what is left as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOptions {
    pub order: Option<Order>,
    pub shape: Option<Shape>,
    pub n_states: usize,
    /// `Some(0)` removes the suprasegmental layer; `Some(s)` adds one with
    /// `s` states even to presets that lack it.
    pub supra_states: Option<usize>,
    pub mixtures: usize,
    /// Mixture components per suprasegmental state.
    pub supra_mixtures: usize,
    pub alpha: f64,
    pub normalize: bool,
    pub train: TrainConfig,
    pub seed: u64,
    pub codebook_size: usize,
    pub features: MfccConfig,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self {
            order: None,
            shape: None,
            n_states: 6,
            supra_states: None,
            mixtures: 10,
            supra_mixtures: 3,
            alpha: 0.5,
            normalize: false,
            train: TrainConfig::default(),
            seed: 0,
            codebook_size: DEFAULT_CODEBOOK_SIZE,
            features: MfccConfig::default(),
        }
    }
}

pub trait SystemBuilder: Send + Sync {
    fn name(&self) -> &str;
    fn summary(&self) -> &str;
    fn train(&self, labels: &[String], corpus: &[LabeledUtterance], opts: &SystemOptions) -> Result<Box<dyn Recognizer>>;
}

/// A preset of the HMM family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmmSystem {
    pub name: &'static str,
    pub summary: &'static str,
    pub order: Order,
    pub shape: Shape,
    /// Order and shape of the suprasegmental chain, if any.
    pub supra: Option<(Order, Shape)>,
}

impl HmmSystem {
    /// Resolves the preset against the options. Systems without a
    /// suprasegmental layer always score acoustically (alpha 0).
    pub fn bank_config(&self, opts: &SystemOptions) -> Result<BankConfig> {
        let order = opts.order.unwrap_or(self.order);
        let shape = opts.shape.unwrap_or(self.shape);
        let supra = match (opts.supra_states, self.supra) {
            (Some(0), _) => None,
            (Some(s), layer) => {
                let (o, sh) = layer.unwrap_or((order, shape));
                Some((o, sh, s))
            }
            (None, Some((o, sh))) => Some((o, sh, 2)),
            (None, None) => None,
        };
        let supra = supra.map(|(o, sh, s)| SupraConfig {
            order: o,
            shape: sh,
            n_supra: s,
            mixtures: opts.supra_mixtures,
            train: opts.train,
            seed: opts.seed,
        });
        if let Some(s) = &supra {
            if s.n_supra > opts.n_states || opts.n_states % s.n_supra != 0 {
                return Err(Error::InvalidConfig(format!(
                    "{} states cannot be grouped into {} suprasegmental blocks",
                    opts.n_states, s.n_supra
                )));
            }
        }
        let alpha = if supra.is_some() { opts.alpha } else { 0.0 };
        Ok(BankConfig {
            order,
            shape,
            n_states: opts.n_states,
            mixtures: opts.mixtures,
            supra,
            alpha,
            normalize: opts.normalize,
            train: opts.train,
            seed: opts.seed,
            features: opts.features.clone(),
        })
    }
}

impl SystemBuilder for HmmSystem {
    fn name(&self) -> &str {
        self.name
    }
    fn summary(&self) -> &str {
        self.summary
    }
    fn train(&self, labels: &[String], corpus: &[LabeledUtterance], opts: &SystemOptions) -> Result<Box<dyn Recognizer>> {
        let bank = train_bank(labels, corpus, &self.bank_config(opts)?)?;
        Ok(Box::new(HmmRecognizer { system: self.name.to_string(), bank }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VqSystem;

impl SystemBuilder for VqSystem {
    fn name(&self) -> &str {
        "vq"
    }
    fn summary(&self) -> &str {
        "k-means codebook per condition, lowest average distortion wins"
    }
    fn train(&self, labels: &[String], corpus: &[LabeledUtterance], opts: &SystemOptions) -> Result<Box<dyn Recognizer>> {
        let cfg = VqConfig { codebook_size: opts.codebook_size, max_iters: opts.train.max_iters.max(100), seed: opts.seed };
        let mut bank = train_vq_bank(labels, corpus, &cfg)?;
        bank.features = opts.features.clone();
        Ok(Box::new(VqRecognizer { system: "vq".into(), bank }))
    }
}

pub struct SystemRegistry {
    builders: Vec<Box<dyn SystemBuilder>>,
}

impl fmt::Debug for SystemRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

const HMM_PRESETS: [HmmSystem; 7] = [
    HmmSystem {
        name: "hmm",
        summary: "first-order left-to-right HMM, acoustic only",
        order: Order::First,
        shape: Shape::Linear,
        supra: None,
    },
    HmmSystem {
        name: "chmm2",
        summary: "second-order circular HMM, acoustic only",
        order: Order::Second,
        shape: Shape::Circular,
        supra: None,
    },
    HmmSystem {
        name: "sphmm",
        summary: "first-order left-to-right HMM with a first-order suprasegmental layer",
        order: Order::First,
        shape: Shape::Linear,
        supra: Some((Order::First, Shape::Linear)),
    },
    HmmSystem {
        name: "ltrsphmm1",
        summary: "left-to-right first-order suprasegmental HMM",
        order: Order::First,
        shape: Shape::Linear,
        supra: Some((Order::First, Shape::Linear)),
    },
    HmmSystem {
        name: "ltrsphmm2",
        summary: "left-to-right second-order suprasegmental HMM",
        order: Order::Second,
        shape: Shape::Linear,
        supra: Some((Order::Second, Shape::Linear)),
    },
    HmmSystem {
        name: "csphmm1",
        summary: "circular first-order suprasegmental HMM",
        order: Order::First,
        shape: Shape::Circular,
        supra: Some((Order::First, Shape::Circular)),
    },
    HmmSystem {
        name: "csphmm2",
        summary: "circular second-order suprasegmental HMM",
        order: Order::Second,
        shape: Shape::Circular,
        supra: Some((Order::Second, Shape::Circular)),
    },
];

impl SystemRegistry {
    pub fn empty() -> Self {
        Self { builders: Vec::new() }
    }

    /// Every HMM preset plus the VQ baseline.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        for p in HMM_PRESETS {
            r.register(Box::new(p)).expect("preset names are unique");
        }
        r.register(Box::new(VqSystem)).expect("preset names are unique");
        r
    }

    pub fn register(&mut self, builder: Box<dyn SystemBuilder>) -> Result<()> {
        if self.builders.iter().any(|b| b.name() == builder.name()) {
            return Err(Error::InvalidConfig(format!("system {:?} is already registered", builder.name())));
        }
        self.builders.push(builder);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn SystemBuilder> {
        self.builders
            .iter()
            .find(|b| b.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownSystem(format!("{name:?} (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.iter().map(|b| b.name()).collect()
    }

    pub fn train(&self, name: &str, labels: &[String], corpus: &[LabeledUtterance], opts: &SystemOptions) -> Result<Box<dyn Recognizer>> {
        self.get(name)?.train(labels, corpus, opts)
    }
}

/// The HMM preset registered under `name`.
pub fn hmm_preset(name: &str) -> Option<HmmSystem> {
    HMM_PRESETS.iter().copied().find(|p| p.name == name)
}

/// Loads a saved bank of either kind.
pub fn load_recognizer(dir: &Path) -> Result<Box<dyn Recognizer>> {
    Ok(match load_bank(dir)? {
        StoredBank::Hmm { system, bank } => Box::new(HmmRecognizer { system, bank }),
        StoredBank::Vq { system, bank } => Box::new(VqRecognizer { system, bank }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let r = SystemRegistry::builtin();
        assert_eq!(r.names(), ["hmm", "chmm2", "sphmm", "ltrsphmm1", "ltrsphmm2", "csphmm1", "csphmm2", "vq"]);
        assert!(matches!(r.get("nope"), Err(Error::UnknownSystem(_))));
        let mut r = r;
        assert!(r.register(Box::new(VqSystem)).is_err());
    }

    #[test]
    fn presets_resolve() {
        let opts = SystemOptions::default();
        let c = hmm_preset("csphmm2").unwrap().bank_config(&opts).unwrap();
        assert_eq!((c.order, c.shape, c.n_states, c.mixtures, c.alpha), (Order::Second, Shape::Circular, 6, 10, 0.5));
        let s = c.supra.unwrap();
        assert_eq!((s.order, s.shape, s.n_supra), (Order::Second, Shape::Circular, 2));

        let h = hmm_preset("hmm").unwrap().bank_config(&opts).unwrap();
        assert_eq!((h.order, h.shape, h.alpha), (Order::First, Shape::Linear, 0.0));
        assert!(h.supra.is_none());

        let off = SystemOptions { supra_states: Some(0), ..SystemOptions::default() };
        assert!(hmm_preset("csphmm2").unwrap().bank_config(&off).unwrap().supra.is_none());

        let bad = SystemOptions { supra_states: Some(4), ..SystemOptions::default() };
        assert!(hmm_preset("csphmm2").unwrap().bank_config(&bad).is_err());
    }
}
