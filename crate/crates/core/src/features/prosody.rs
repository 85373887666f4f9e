//! Segment-level prosodic descriptors.
//!
//! Each segment is summarized by six numbers: mean and variance of frame
//! log-energy, mean and variance of an autocorrelation pitch proxy, the
//! segment's share of the utterance duration, and the mean zero-crossing rate.

use std::ops::Range;

use super::{AudioClip, FeatureSequence, FrameSpec, ProsodicSequence, LOG_FLOOR};
use crate::error::{Error, Result};

pub const PROSODIC_DIM: usize = 6;

const MIN_PITCH_HZ: f64 = 50.0;
const MAX_PITCH_HZ: f64 = 400.0;
const VOICING_THRESHOLD: f64 = 0.3;

/// Per-frame raw prosodic measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsodyFrame {
    pub log_energy: f64,
    pub pitch: f64,
    pub zcr: f64,
}

impl ProsodyFrame {
    pub fn measure(samples: &[f64], sample_rate: u32) -> Self {
        let n = samples.len().max(1) as f64;
        let energy = samples.iter().map(|x| x * x).sum::<f64>() / n;
        let zcr = if samples.len() < 2 {
            0.0
        } else {
            let crossings = samples
                .windows(2)
                .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
                .count();
            crossings as f64 / (samples.len() - 1) as f64
        };
        Self {
            log_energy: energy.max(LOG_FLOOR).ln(),
            pitch: pitch_proxy(samples, sample_rate, energy),
            zcr,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.log_energy, self.pitch, self.zcr]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { log_energy: v[0], pitch: v[1], zcr: v[2] }
    }
}

/// Autocorrelation peak in the 50-400 Hz lag range; 0 for unvoiced or silent frames.
fn pitch_proxy(samples: &[f64], sample_rate: u32, energy: f64) -> f64 {
    if energy <= LOG_FLOOR {
        return 0.0;
    }
    let rate = f64::from(sample_rate);
    let min_lag = (rate / MAX_PITCH_HZ).floor() as usize;
    let max_lag = ((rate / MIN_PITCH_HZ).ceil() as usize).min(samples.len().saturating_sub(1));
    if min_lag == 0 || max_lag < min_lag {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let r0: f64 = centered.iter().map(|x| x * x).sum();
    if r0 <= 0.0 {
        return 0.0;
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for lag in min_lag..=max_lag {
        let r: f64 = centered[lag..].iter().zip(&centered).map(|(a, b)| a * b).sum();
        if r > best.1 {
            best = (lag, r);
        }
    }
    if best.1 / r0 < VOICING_THRESHOLD {
        0.0
    } else {
        rate / best.0 as f64
    }
}

/// One descriptor per acoustic frame, on the same framing as the MFCC front-end.
pub fn frame_prosody_track(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<ProsodyFrame>> {
    let frames = super::frame_signal(clip, spec)?;
    Ok(frames.iter().map(|f| ProsodyFrame::measure(f, clip.sample_rate)).collect())
}

/// Collapses a run of frame descriptors into the six-component segment vector.
pub fn summarize_segment(frames: &[ProsodyFrame], duration_fraction: f64) -> [f64; PROSODIC_DIM] {
    let n = frames.len().max(1) as f64;
    let mean_var = |f: fn(&ProsodyFrame) -> f64| {
        let mean = frames.iter().map(f).sum::<f64>() / n;
        let var = frames.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    };
    let (e_mean, e_var) = mean_var(|p| p.log_energy);
    let (p_mean, p_var) = mean_var(|p| p.pitch);
    let zcr = frames.iter().map(|p| p.zcr).sum::<f64>() / n;
    [e_mean, e_var, p_mean, p_var, duration_fraction, zcr]
}

/// Prosodic vectors for ordered, non-overlapping sample ranges of `clip`.
///
/// A range shorter than one analysis frame is measured as a single frame.
pub fn prosodic_extract(
    clip: &AudioClip,
    boundaries: &[Range<usize>],
    spec: &FrameSpec,
) -> Result<ProsodicSequence> {
    if boundaries.is_empty() {
        return Err(Error::EmptyInput("segment boundaries"));
    }
    if clip.is_empty() {
        return Err(Error::EmptyInput("audio clip"));
    }
    spec.validate()?;
    let frame = spec.frame_len(clip.sample_rate);
    let hop = spec.hop(clip.sample_rate).max(1);
    let mut prev_end = 0;
    let mut data = Vec::with_capacity(boundaries.len() * PROSODIC_DIM);
    for (index, r) in boundaries.iter().enumerate() {
        if r.start >= r.end {
            return Err(Error::DegenerateSegment { index, reason: "empty sample range".into() });
        }
        if r.end > clip.len() {
            return Err(Error::DegenerateSegment {
                index,
                reason: format!("range ends at {} past clip length {}", r.end, clip.len()),
            });
        }
        if r.start < prev_end {
            return Err(Error::DegenerateSegment {
                index,
                reason: "ranges must be ordered and non-overlapping".into(),
            });
        }
        prev_end = r.end;
        let seg = &clip.samples[r.clone()];
        let descriptors: Vec<ProsodyFrame> = if seg.len() <= frame {
            vec![ProsodyFrame::measure(seg, clip.sample_rate)]
        } else {
            let count = (seg.len() - frame) / hop + 1;
            (0..count)
                .map(|i| ProsodyFrame::measure(&seg[i * hop..i * hop + frame], clip.sample_rate))
                .collect()
        };
        let fraction = seg.len() as f64 / clip.len() as f64;
        data.extend_from_slice(&summarize_segment(&descriptors, fraction));
    }
    Ok(ProsodicSequence(FeatureSequence::new("", PROSODIC_DIM, data)?))
}
