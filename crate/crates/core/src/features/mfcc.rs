use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{frame_signal, preemphasize, AudioClip, FeatureSequence, FrameSpec, LOG_FLOOR, N_STATIC};
use crate::error::{Error, Result};

/// Half-width of the delta regression window.
pub const DELTA_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub frame: FrameSpec,
    pub n_static: usize,
    pub n_filters: usize,
    pub fft_size: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame: FrameSpec::default(),
            n_static: N_STATIC,
            n_filters: 26,
            fft_size: 512,
            low_hz: 0.0,
            high_hz: 8000.0,
            log_floor: LOG_FLOOR,
        }
    }
}

impl MfccConfig {
    pub fn with_frame(frame: FrameSpec) -> Self {
        Self { frame, ..Self::default() }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the linear bins `0..=fft_size/2`.
fn mel_filterbank(cfg: &MfccConfig, sample_rate: u32) -> Vec<Vec<f64>> {
    let n_bins = cfg.fft_size / 2 + 1;
    let high = cfg.high_hz.min(f64::from(sample_rate) / 2.0);
    let (lo_mel, hi_mel) = (hz_to_mel(cfg.low_hz), hz_to_mel(high));
    let edges: Vec<f64> = (0..cfg.n_filters + 2)
        .map(|i| mel_to_hz(lo_mel + (hi_mel - lo_mel) * i as f64 / (cfg.n_filters + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate) / cfg.fft_size as f64;
    (0..cfg.n_filters)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

struct StaticExtractor {
    window: Vec<f64>,
    filters: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
    n_static: usize,
    log_floor: f64,
}

impl StaticExtractor {
    fn new(cfg: &MfccConfig, frame_len: usize, sample_rate: u32) -> Result<Self> {
        if cfg.fft_size < frame_len {
            return Err(Error::InvalidConfig(format!(
                "FFT size {} smaller than frame length {frame_len}",
                cfg.fft_size
            )));
        }
        if cfg.n_static == 0 || cfg.n_static >= cfg.n_filters {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n_static ({}) < n_filters ({})",
                cfg.n_static, cfg.n_filters
            )));
        }
        Ok(Self {
            window: hamming(frame_len),
            filters: mel_filterbank(cfg, sample_rate),
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_size),
            fft_size: cfg.fft_size,
            n_static: cfg.n_static,
            log_floor: cfg.log_floor,
        })
    }

    fn frame(&self, frame: &[f64], buf: &mut Vec<Complex<f64>>) -> Vec<f64> {
        buf.clear();
        buf.extend(frame.iter().zip(&self.window).map(|(x, w)| Complex::new(x * w, 0.0)));
        buf.resize(self.fft_size, Complex::new(0.0, 0.0));
        self.fft.process(buf);
        let n_bins = self.fft_size / 2 + 1;
        let log_energies: Vec<f64> = self
            .filters
            .iter()
            .map(|f| {
                let e: f64 = f.iter().zip(&buf[..n_bins]).map(|(w, c)| w * c.norm()).sum();
                e.max(self.log_floor).ln()
            })
            .collect();
        let m = log_energies.len() as f64;
        let scale = (2.0 / m).sqrt();
        (1..=self.n_static)
            .map(|n| {
                scale
                    * log_energies
                        .iter()
                        .enumerate()
                        .map(|(j, &e)| e * (PI * n as f64 * (j as f64 + 0.5) / m).cos())
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Static cepstra (coefficients `1..=n_static`) followed by their deltas.
pub fn mfcc_extract(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureSequence> {
    let emphasized = preemphasize(clip, cfg.frame.preemphasis)?;
    let frames = frame_signal(&emphasized, &cfg.frame)?;
    let extractor = StaticExtractor::new(cfg, frames[0].len(), clip.sample_rate)?;
    let mut buf = Vec::with_capacity(cfg.fft_size);
    let statics: Vec<Vec<f64>> = frames.iter().map(|f| extractor.frame(f, &mut buf)).collect();
    let full = delta_append(&statics)?;
    FeatureSequence::from_frames("", &full)
}

/// Appends regression deltas over a ±2 frame window, replicating edge frames.
pub fn delta_append(statics: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let t_len = statics.len();
    if t_len == 0 {
        return Err(Error::EmptyInput("static feature matrix"));
    }
    let dim = statics[0].len();
    if let Some(bad) = statics.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.len() });
    }
    let denom: f64 = 2.0 * (1..=DELTA_WINDOW).map(|d| (d * d) as f64).sum::<f64>();
    let at = |t: isize| &statics[t.clamp(0, t_len as isize - 1) as usize];
    Ok((0..t_len as isize)
        .map(|t| {
            let mut row = Vec::with_capacity(2 * dim);
            row.extend_from_slice(&statics[t as usize]);
            for c in 0..dim {
                let num: f64 = (1..=DELTA_WINDOW as isize)
                    .map(|d| d as f64 * (at(t + d)[c] - at(t - d)[c]))
                    .sum();
                row.push(num / denom);
            }
            row
        })
        .collect())
}
