//! An utterance as seen by the classifiers: acoustic features plus whatever
//! prosodic evidence is available for it.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::features::{
    frame_prosody_track, mfcc_extract, prosodic_extract, summarize_segment, AudioClip,
    FeatureSequence, FrameSpec, MfccConfig, ProsodicSequence, ProsodyFrame, PROSODIC_DIM,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Prosody {
    /// Raw audio; segment vectors are measured on the waveform.
    Audio { clip: AudioClip, frame: FrameSpec },
    /// Per-frame prosodic measurements aligned with the feature frames.
    Track(Vec<ProsodyFrame>),
    Absent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: FeatureSequence,
    pub prosody: Prosody,
}

impl Utterance {
    pub fn from_audio(id: impl Into<String>, clip: AudioClip, cfg: &MfccConfig) -> Result<Self> {
        let id = id.into();
        let mut features = mfcc_extract(&clip, cfg)?;
        features.id.clone_from(&id);
        Ok(Self { id, features, prosody: Prosody::Audio { clip, frame: cfg.frame } })
    }

    pub fn from_features(features: FeatureSequence, track: Option<Vec<ProsodyFrame>>) -> Result<Self> {
        if let Some(tr) = &track {
            if tr.len() != features.len() {
                return Err(Error::DimensionMismatch { expected: features.len(), actual: tr.len() });
            }
        }
        Ok(Self {
            id: features.id.clone(),
            prosody: track.map_or(Prosody::Absent, Prosody::Track),
            features,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.features.len()
    }

    /// One prosodic vector per frame range. Ranges must partition
    /// `0..frame_count`.
    pub fn prosodic_sequence(&self, segments: &[Range<usize>]) -> Result<ProsodicSequence> {
        let total = self.frame_count();
        match &self.prosody {
            Prosody::Absent => Err(Error::InvalidArgument(format!(
                "utterance {:?} carries no prosodic information",
                self.id
            ))),
            Prosody::Track(track) => {
                let mut data = Vec::with_capacity(segments.len() * PROSODIC_DIM);
                for (index, r) in segments.iter().enumerate() {
                    if r.start >= r.end || r.end > total {
                        return Err(Error::DegenerateSegment {
                            index,
                            reason: format!("frame range {r:?} of {total}"),
                        });
                    }
                    let fraction = (r.end - r.start) as f64 / total as f64;
                    data.extend_from_slice(&summarize_segment(&track[r.clone()], fraction));
                }
                Ok(ProsodicSequence(FeatureSequence::new(self.id.clone(), PROSODIC_DIM, data)?))
            }
            Prosody::Audio { clip, frame } => {
                let ranges = frame_to_sample_ranges(segments, total, frame, clip);
                let mut seq = prosodic_extract(clip, &ranges, frame)?;
                seq.0.id.clone_from(&self.id);
                Ok(seq)
            }
        }
    }
}

/// Maps frame runs to sample runs: a run starts at its first frame's start
/// and ends where the next run starts; the last run ends with its last frame.
fn frame_to_sample_ranges(
    segments: &[Range<usize>],
    total: usize,
    frame: &FrameSpec,
    clip: &AudioClip,
) -> Vec<Range<usize>> {
    let hop = frame.hop(clip.sample_rate);
    let len = frame.frame_len(clip.sample_rate);
    segments
        .iter()
        .map(|r| {
            let start = r.start * hop;
            let end = if r.end >= total {
                ((r.end.max(1) - 1) * hop + len).min(clip.len())
            } else {
                r.end * hop
            };
            start..end
        })
        .collect()
}

/// Per-frame prosodic track for a clip, on the front-end's framing.
pub fn prosody_track(clip: &AudioClip, frame: &FrameSpec) -> Result<Vec<ProsodyFrame>> {
    frame_prosody_track(clip, frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_clip(n: usize) -> AudioClip {
        let s = (0..n).map(|i| 5000.0 * (i as f64 * 0.07).sin()).collect();
        AudioClip::new(s, 16_000).unwrap()
    }

    #[test]
    fn audio_ranges_partition_the_covered_samples() {
        let clip = tone_clip(16_000);
        let spec = FrameSpec::default();
        let ranges = frame_to_sample_ranges(&[0..10, 10..60, 60..141], 141, &spec, &clip);
        assert_eq!(ranges, vec![0..1120, 1120..6720, 6720..15_936]);
    }

    #[test]
    fn track_and_audio_routes_agree_on_shape() {
        let clip = tone_clip(8000);
        let cfg = MfccConfig::default();
        let utt = Utterance::from_audio("a", clip.clone(), &cfg).unwrap();
        let t = utt.frame_count();
        let segs = [0..t / 2, t / 2..t];
        let from_audio = utt.prosodic_sequence(&segs).unwrap();
        let track = prosody_track(&clip, &cfg.frame).unwrap();
        let tracked = Utterance::from_features(utt.features.clone(), Some(track)).unwrap();
        let from_track = tracked.prosodic_sequence(&segs).unwrap();
        assert_eq!(from_audio.segment_count(), 2);
        assert_eq!(from_track.segment_count(), 2);
        let fractions: f64 = from_track.observations().frames().map(|v| v[4]).sum();
        assert!((fractions - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absent_prosody_is_an_error() {
        let fs = FeatureSequence::new("x", 1, vec![0.0, 1.0]).unwrap();
        let utt = Utterance::from_features(fs, None).unwrap();
        assert!(utt.prosodic_sequence(&[0..2]).is_err());
    }

    #[test]
    fn track_length_must_match() {
        let fs = FeatureSequence::new("x", 1, vec![0.0, 1.0]).unwrap();
        let track = vec![ProsodyFrame { log_energy: 0.0, pitch: 0.0, zcr: 0.0 }];
        assert!(Utterance::from_features(fs, Some(track)).is_err());
    }
}
