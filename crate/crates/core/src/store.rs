//! On-disk banks: a directory holding one JSON model document per condition
//! and a `bank.json` manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline_vq::{Codebook, VqBank};
use crate::classifier::{ConditionBank, ConditionModel};
use crate::error::{Error, Result};
use crate::features::MfccConfig;

pub const MODEL_SCHEMA: &str = "suprahmm-model v1";
pub const BANK_SCHEMA: &str = "suprahmm-bank v1";
pub const BANK_MANIFEST: &str = "bank.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelBody {
    Condition(ConditionModel),
    Codebook(Codebook),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub model: ModelBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankKind {
    Hmm,
    Vq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub schema: String,
    pub system: String,
    pub kind: BankKind,
    pub labels: Vec<String>,
    pub alpha: f64,
    pub normalize: bool,
    pub documents: Vec<String>,
    pub feature_config: MfccConfig,
    pub feature_config_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredBank {
    Hmm { system: String, bank: ConditionBank },
    Vq { system: String, bank: VqBank },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn feature_config_hash(cfg: &MfccConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

fn document_name(index: usize, label: &str) -> String {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:02}-{safe}.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn save(dir: &Path, manifest: BankManifest, bodies: Vec<ModelBody>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, model) in manifest.documents.iter().zip(bodies) {
        write_json(&dir.join(name), &ModelDocument { schema: MODEL_SCHEMA.into(), model })?;
    }
    write_json(&dir.join(BANK_MANIFEST), &manifest)
}

pub fn save_condition_bank(dir: &Path, system: &str, bank: &ConditionBank) -> Result<()> {
    bank.validate()?;
    let labels = bank.labels();
    let manifest = BankManifest {
        schema: BANK_SCHEMA.into(),
        system: system.into(),
        kind: BankKind::Hmm,
        documents: labels.iter().enumerate().map(|(i, l)| document_name(i, l)).collect(),
        labels,
        alpha: bank.alpha,
        normalize: bank.normalize,
        feature_config: bank.features.clone(),
        feature_config_sha256: feature_config_hash(&bank.features),
    };
    save(dir, manifest, bank.conditions.iter().cloned().map(ModelBody::Condition).collect())
}

pub fn save_vq_bank(dir: &Path, system: &str, bank: &VqBank) -> Result<()> {
    let labels: Vec<String> = bank.codebooks.iter().map(|c| c.label.clone()).collect();
    let manifest = BankManifest {
        schema: BANK_SCHEMA.into(),
        system: system.into(),
        kind: BankKind::Vq,
        documents: labels.iter().enumerate().map(|(i, l)| document_name(i, l)).collect(),
        labels,
        alpha: 0.0,
        normalize: false,
        feature_config: bank.features.clone(),
        feature_config_sha256: feature_config_hash(&bank.features),
    };
    save(dir, manifest, bank.codebooks.iter().cloned().map(ModelBody::Codebook).collect())
}

pub fn read_bank_manifest(dir: &Path) -> Result<BankManifest> {
    let path = dir.join(BANK_MANIFEST);
    let m: BankManifest = read_json(&path)?;
    if m.schema != BANK_SCHEMA {
        return Err(Error::format(path.display().to_string(), format!("schema {:?}, expected {BANK_SCHEMA:?}", m.schema)));
    }
    if m.documents.len() != m.labels.len() {
        return Err(Error::format(path.display().to_string(), "one document per label required"));
    }
    if m.feature_config_sha256 != feature_config_hash(&m.feature_config) {
        return Err(Error::format(path.display().to_string(), "feature config hash does not match"));
    }
    Ok(m)
}

pub fn read_document(path: &Path) -> Result<ModelDocument> {
    let doc: ModelDocument = read_json(path)?;
    if doc.schema != MODEL_SCHEMA {
        return Err(Error::format(path.display().to_string(), format!("schema {:?}, expected {MODEL_SCHEMA:?}", doc.schema)));
    }
    Ok(doc)
}

pub fn load_bank(dir: &Path) -> Result<StoredBank> {
    let m = read_bank_manifest(dir)?;
    let mut conditions = Vec::new();
    let mut codebooks = Vec::new();
    for (name, label) in m.documents.iter().zip(&m.labels) {
        let path = dir.join(name);
        let mismatch = |got: &str| Error::format(path.display().to_string(), format!("holds {got:?}, manifest says {label:?}"));
        match (read_document(&path)?.model, m.kind) {
            (ModelBody::Condition(c), BankKind::Hmm) => {
                if &c.label != label {
                    return Err(mismatch(&c.label));
                }
                conditions.push(c);
            }
            (ModelBody::Codebook(c), BankKind::Vq) => {
                if &c.label != label {
                    return Err(mismatch(&c.label));
                }
                c.validate()?;
                codebooks.push(c);
            }
            _ => return Err(Error::format(path.display().to_string(), "document kind does not match the bank")),
        }
    }
    match m.kind {
        BankKind::Hmm => {
            let bank = ConditionBank { conditions, alpha: m.alpha, normalize: m.normalize, features: m.feature_config };
            bank.validate()?;
            Ok(StoredBank::Hmm { system: m.system, bank })
        }
        BankKind::Vq => Ok(StoredBank::Vq { system: m.system, bank: VqBank { codebooks, features: m.feature_config } }),
    }
}

/// Digest over the manifest and every document, in manifest order.
pub fn bank_digest(dir: &Path) -> Result<String> {
    let m = read_bank_manifest(dir)?;
    let mut hasher = Sha256::new();
    for name in std::iter::once(BANK_MANIFEST).chain(m.documents.iter().map(String::as_str)) {
        let path = dir.join(name);
        hasher.update(fs::read(&path).map_err(|e| Error::io(&path, e))?);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
