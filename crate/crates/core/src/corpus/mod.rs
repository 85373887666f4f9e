//! Corpus manifests, speaker- and text-disjoint splits, loading, and the
//! synthetic corpus generator.
//!
//! Manifest layout (UTF-8, tab separated):
//!
//! ```text
//! suprahmm-corpus v1
//! #conditions	neutral	angry	slow	loud	soft	fast
//! #sample_rate	16000
//! id	speaker	text	condition	rep	path	kind
//! u0001	s01	t01	neutral	1	features/u0001.feat	feat
//! ```
//!
//! `kind` is `wav` or `feat`. Paths are relative to the manifest's directory.
//! A `feat` record may have a `.pros` companion holding per-frame
//! (log-energy, pitch, zero-crossing rate) rows in the same binary format.

mod synth;

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{read_features, read_wav, FeatureSequence, MfccConfig, ProsodyFrame, DEFAULT_SAMPLE_RATE};
use crate::utterance::Utterance;

pub use synth::{synth_generate, ConditionGenerator, SynthSpec, SyntheticCorpus, DEFAULT_CONDITIONS};

pub const MANIFEST_HEADER: &str = "suprahmm-corpus v1";
pub const SPLIT_HEADER: &str = "suprahmm-split v1";
const COLUMNS: [&str; 7] = ["id", "speaker", "text", "condition", "rep", "path", "kind"];
pub const PROSODY_EXTENSION: &str = "pros";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Wav,
    Feat,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Wav => "wav",
            Self::Feat => "feat",
        })
    }
}

impl FromStr for RecordKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wav" => Ok(Self::Wav),
            "feat" => Ok(Self::Feat),
            other => Err(Error::InvalidCorpus(format!("unknown record kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker: String,
    pub text: String,
    pub condition: String,
    pub rep: u32,
    pub path: String,
    pub kind: RecordKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub conditions: Vec<String>,
    pub sample_rate: u32,
    pub records: Vec<UtteranceRecord>,
}

impl CorpusManifest {
    pub fn new(conditions: Vec<String>, records: Vec<UtteranceRecord>) -> Result<Self> {
        let m = Self { conditions, sample_rate: DEFAULT_SAMPLE_RATE, records };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::InvalidCorpus("no conditions declared".into()));
        }
        let declared: HashSet<&str> = self.conditions.iter().map(String::as_str).collect();
        if declared.len() != self.conditions.len() {
            return Err(Error::InvalidCorpus("duplicate condition label".into()));
        }
        let mut ids = HashSet::new();
        let mut used = HashSet::new();
        for r in &self.records {
            for (name, v) in [("id", &r.id), ("speaker", &r.speaker), ("text", &r.text), ("path", &r.path)] {
                if v.is_empty() {
                    return Err(Error::InvalidCorpus(format!("record {:?} has an empty {name}", r.id)));
                }
            }
            if !declared.contains(r.condition.as_str()) {
                return Err(Error::InvalidCorpus(format!(
                    "record {:?} uses undeclared condition {:?}",
                    r.id, r.condition
                )));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::InvalidCorpus(format!("duplicate id {:?}", r.id)));
            }
            used.insert(r.condition.as_str());
        }
        if let Some(missing) = self.conditions.iter().find(|c| !used.contains(c.as_str())) {
            return Err(Error::InvalidCorpus(format!("condition {missing:?} has no records")));
        }
        Ok(())
    }

    pub fn condition_index(&self, label: &str) -> Result<usize> {
        self.conditions
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == MANIFEST_HEADER => {}
            _ => return Err(Error::InvalidCorpus(format!("missing {MANIFEST_HEADER:?} header"))),
        }
        let mut conditions: Option<Vec<String>> = None;
        let mut sample_rate = DEFAULT_SAMPLE_RATE;
        let mut saw_columns = false;
        let mut records = Vec::new();
        for (n, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |msg: String| Error::InvalidCorpus(format!("line {}: {msg}", n + 1));
            if let Some(key) = fields[0].strip_prefix('#') {
                match key {
                    "conditions" => conditions = Some(fields[1..].iter().map(|s| s.to_string()).collect()),
                    "sample_rate" => {
                        sample_rate = fields
                            .get(1)
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("unreadable sample rate".into()))?;
                    }
                    _ => {}
                }
                continue;
            }
            if !saw_columns {
                if fields != COLUMNS {
                    return Err(bad(format!("expected column header {}", COLUMNS.join("\\t"))));
                }
                saw_columns = true;
                continue;
            }
            if fields.len() != COLUMNS.len() {
                return Err(bad(format!("expected {} fields, found {}", COLUMNS.len(), fields.len())));
            }
            records.push(UtteranceRecord {
                id: fields[0].to_string(),
                speaker: fields[1].to_string(),
                text: fields[2].to_string(),
                condition: fields[3].to_string(),
                rep: fields[4].parse().map_err(|_| bad(format!("bad repetition {:?}", fields[4])))?,
                path: fields[5].to_string(),
                kind: fields[6].parse()?,
            });
        }
        let conditions = conditions.unwrap_or_else(|| {
            let mut seen = Vec::new();
            for r in &records {
                if !seen.contains(&r.condition) {
                    seen.push(r.condition.clone());
                }
            }
            seen
        });
        let m = Self { conditions, sample_rate, records };
        m.validate()?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n#conditions");
        for c in &self.conditions {
            let _ = write!(out, "\t{c}");
        }
        let _ = writeln!(out, "\n#sample_rate\t{}", self.sample_rate);
        out.push_str(&COLUMNS.join("\t"));
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.id, r.speaker, r.text, r.condition, r.rep, r.path, r.kind
            );
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitPlan {
    pub train_speakers: BTreeSet<String>,
    pub test_speakers: BTreeSet<String>,
    pub train_texts: BTreeSet<String>,
    pub test_texts: BTreeSet<String>,
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, set) in [
            ("train speaker", &self.train_speakers),
            ("test speaker", &self.test_speakers),
            ("train text", &self.train_texts),
            ("test text", &self.test_texts),
        ] {
            if set.is_empty() {
                return Err(Error::InvalidSplit(format!("{name} set is empty")));
            }
        }
        if let Some(s) = self.train_speakers.intersection(&self.test_speakers).next() {
            return Err(Error::InvalidSplit(format!("speaker {s:?} is in both train and test")));
        }
        if let Some(t) = self.train_texts.intersection(&self.test_texts).next() {
            return Err(Error::InvalidSplit(format!("text {t:?} is in both train and test")));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(SPLIT_HEADER) {
            return Err(Error::InvalidSplit(format!("missing {SPLIT_HEADER:?} header")));
        }
        let mut plan = Self::default();
        for line in lines.map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty()) {
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default();
            let set = match key {
                "train_speakers" => &mut plan.train_speakers,
                "test_speakers" => &mut plan.test_speakers,
                "train_texts" => &mut plan.train_texts,
                "test_texts" => &mut plan.test_texts,
                other => return Err(Error::InvalidSplit(format!("unknown key {other:?}"))),
            };
            set.extend(fields.filter(|f| !f.is_empty()).map(str::to_string));
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{SPLIT_HEADER}\n");
        for (key, set) in [
            ("train_speakers", &self.train_speakers),
            ("test_speakers", &self.test_speakers),
            ("train_texts", &self.train_texts),
            ("test_texts", &self.test_texts),
        ] {
            out.push_str(key);
            for v in set {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Train records match a train speaker and a train text; test records match
/// a test speaker and a test text. Everything else is unused.
pub fn split<'a>(
    manifest: &'a CorpusManifest,
    plan: &SplitPlan,
) -> Result<(Vec<&'a UtteranceRecord>, Vec<&'a UtteranceRecord>)> {
    plan.validate()?;
    let speakers: HashSet<&str> = manifest.records.iter().map(|r| r.speaker.as_str()).collect();
    let texts: HashSet<&str> = manifest.records.iter().map(|r| r.text.as_str()).collect();
    for s in plan.train_speakers.iter().chain(&plan.test_speakers) {
        if !speakers.contains(s.as_str()) {
            return Err(Error::InvalidSplit(format!("speaker {s:?} not in the manifest")));
        }
    }
    for t in plan.train_texts.iter().chain(&plan.test_texts) {
        if !texts.contains(t.as_str()) {
            return Err(Error::InvalidSplit(format!("text {t:?} not in the manifest")));
        }
    }
    let pick = |spk: &BTreeSet<String>, txt: &BTreeSet<String>| -> Vec<&'a UtteranceRecord> {
        manifest
            .records
            .iter()
            .filter(|r| spk.contains(&r.speaker) && txt.contains(&r.text))
            .collect()
    };
    let train = pick(&plan.train_speakers, &plan.train_texts);
    let test = pick(&plan.test_speakers, &plan.test_texts);
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidSplit("one side of the split is empty".into()));
    }
    Ok((train, test))
}

pub fn record_path(base: &Path, record: &UtteranceRecord) -> PathBuf {
    base.join(&record.path)
}

pub fn prosody_path(feature_path: &Path) -> PathBuf {
    feature_path.with_extension(PROSODY_EXTENSION)
}

/// Reads one record into an utterance. Audio is run through the front end;
/// feature files pick up a `.pros` companion when present.
pub fn load_record(base: &Path, record: &UtteranceRecord, mfcc: &MfccConfig) -> Result<Utterance> {
    let path = record_path(base, record);
    match record.kind {
        RecordKind::Wav => Utterance::from_audio(record.id.clone(), read_wav(&path)?, mfcc),
        RecordKind::Feat => {
            let mut features = read_features(&path)?;
            features.id.clone_from(&record.id);
            let pros = prosody_path(&path);
            let track = if pros.exists() { Some(read_track(&pros)?) } else { None };
            Utterance::from_features(features, track)
        }
    }
}

pub fn read_track(path: &Path) -> Result<Vec<ProsodyFrame>> {
    let seq = read_features(path)?;
    if seq.dim() != 3 {
        return Err(Error::format(path.display().to_string(), format!("prosody track has dim {}, expected 3", seq.dim())));
    }
    Ok(seq.frames().map(ProsodyFrame::from_slice).collect())
}

pub fn track_sequence(id: &str, track: &[ProsodyFrame]) -> Result<FeatureSequence> {
    let data = track.iter().flat_map(|f| f.to_array()).collect();
    FeatureSequence::new(id, 3, data)
}

/// Loads every record, collecting per-record failures instead of stopping at
/// the first one.
pub fn load_records(
    base: &Path,
    records: &[&UtteranceRecord],
    mfcc: &MfccConfig,
) -> (Vec<(usize, Utterance)>, Vec<(String, Error)>) {
    use rayon::prelude::*;
    let results: Vec<_> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| (i, r.id.clone(), load_record(base, r, mfcc)))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (i, id, res) in results {
        match res {
            Ok(u) => ok.push((i, u)),
            Err(e) => failed.push((id, e)),
        }
    }
    (ok, failed)
}
