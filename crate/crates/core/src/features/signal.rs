use super::{AudioClip, FrameSpec};
use crate::error::{Error, Result};

/// First-order high-pass: `y[n] = x[n] - coeff * x[n-1]`, `y[0] = x[0]`.
pub fn preemphasize(clip: &AudioClip, coeff: f64) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("audio clip"));
    }
    if !(0.0..1.0).contains(&coeff) {
        return Err(Error::InvalidArgument(format!("pre-emphasis {coeff} outside [0, 1)")));
    }
    let x = &clip.samples;
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    out.extend(x.windows(2).map(|w| w[1] - coeff * w[0]));
    Ok(AudioClip { samples: out, sample_rate: clip.sample_rate })
}

/// Splits a clip into overlapping frames; trailing partial samples are dropped.
pub fn frame_signal(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let frame = spec.frame_len(clip.sample_rate);
    let hop = spec.hop(clip.sample_rate);
    if frame == 0 || hop == 0 {
        return Err(Error::InvalidFrameSpec(format!(
            "frame of {frame} samples with hop {hop} at {} Hz",
            clip.sample_rate
        )));
    }
    if clip.len() < frame {
        return Err(Error::TooShort { samples: clip.len(), needed: frame });
    }
    let count = spec.frame_count(clip.len(), clip.sample_rate);
    Ok((0..count)
        .map(|i| clip.samples[i * hop..i * hop + frame].to_vec())
        .collect())
}
