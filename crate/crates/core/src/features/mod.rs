//! Acoustic and prosodic front-end.
//!
//! Audio is turned into two observation streams: a 32-dimensional MFCC
//! sequence (16 static coefficients followed by their deltas) consumed by the
//! acoustic models, and a segment-level prosodic sequence consumed by the
//! suprasegmental layer.

mod io;
mod mfcc;
mod prosody;
mod signal;

pub use io::{
    decode_features, encode_features, read_features, read_wav, write_features, write_wav,
    FEATURE_MAGIC,
};
pub use mfcc::{delta_append, mfcc_extract, MfccConfig, DELTA_WINDOW};
pub use prosody::{
    frame_prosody_track, prosodic_extract, summarize_segment, ProsodyFrame, PROSODIC_DIM,
};
pub use signal::{frame_signal, preemphasize};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static MFCC coefficients per frame.
pub const N_STATIC: usize = 16;
/// Full acoustic observation size: static plus delta.
pub const FEATURE_DIM: usize = 2 * N_STATIC;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
/// Floor applied before every logarithm of an energy.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mono PCM audio. Samples keep their 16-bit amplitude scale but are held as
/// `f64` so filtering stays exact and linear.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::UnsupportedAudio("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn from_pcm(samples: &[i16], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| f64::from(s)).collect(), sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Framing parameters, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_ms: f64,
    pub overlap_ms: f64,
    pub preemphasis: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { frame_ms: 16.0, overlap_ms: 9.0, preemphasis: 0.97 }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_ms > 0.0 && self.overlap_ms < self.frame_ms) {
            return Err(Error::InvalidFrameSpec(format!(
                "need 0 < overlap ({}) < frame length ({})",
                self.overlap_ms, self.frame_ms
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(Error::InvalidFrameSpec(format!(
                "pre-emphasis {} outside [0, 1)",
                self.preemphasis
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn hop(&self, sample_rate: u32) -> usize {
        ((self.frame_ms - self.overlap_ms) * f64::from(sample_rate) / 1000.0).round() as usize
    }

    /// Number of whole frames in a clip of `len` samples (0 when shorter than one frame).
    pub fn frame_count(&self, len: usize, sample_rate: u32) -> usize {
        let frame = self.frame_len(sample_rate);
        let hop = self.hop(sample_rate);
        if len < frame || hop == 0 {
            return 0;
        }
        (len - frame) / hop + 1
    }
}

/// A sequence of equally sized observation vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub id: String,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(id: impl Into<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyInput("feature sequence has no frames"));
        }
        if data.len() % dim != 0 {
            return Err(Error::format(
                "feature sequence",
                format!("{} values is not a multiple of dimension {dim}", data.len()),
            ));
        }
        Ok(Self { id: id.into(), dim, data })
    }

    pub fn from_frames(id: impl Into<String>, frames: &[Vec<f64>]) -> Result<Self> {
        let dim = frames.first().map(Vec::len).ok_or(Error::EmptyInput("no frames"))?;
        let mut data = Vec::with_capacity(dim * frames.len());
        for f in frames {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: f.len() });
            }
            data.extend_from_slice(f);
        }
        Self::new(id, dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Index of the first frame holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite()).map(|i| i / self.dim)
    }
}

/// Segment-level prosodic observations, one vector per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodicSequence(pub FeatureSequence);

impl ProsodicSequence {
    pub fn segment_count(&self) -> usize {
        self.0.len()
    }

    pub fn observations(&self) -> &FeatureSequence {
        &self.0
    }
}
