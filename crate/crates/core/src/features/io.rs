//! WAV input and the binary feature-file format.
//!
//! A feature file is one ASCII header line `SUPRAHMM-FEAT v1 <frames> <dim>`
//! followed by `frames * dim` little-endian `f32` values in row-major order.

use std::fs;
use std::path::Path;

use super::{AudioClip, FeatureSequence, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &str = "SUPRAHMM-FEAT v1";

/// Reads a 16-bit mono PCM WAV at 16 kHz.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path)
        .map_err(|source| Error::Wav { path: path.to_path_buf(), source })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: need 16-bit integer PCM",
            path.display()
        )));
    }
    if spec.sample_rate != DEFAULT_SAMPLE_RATE {
        return Err(Error::UnsupportedAudio(format!(
            "{}: sample rate {} Hz, expected {DEFAULT_SAMPLE_RATE} Hz (no resampling)",
            path.display(),
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|source| Error::Wav { path: path.to_path_buf(), source })?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("wav file has no samples"));
    }
    AudioClip::from_pcm(&samples, spec.sample_rate)
}

pub fn write_wav(path: &Path, samples: &[i16], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |source| Error::Wav { path: path.to_path_buf(), source };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in samples {
        w.write_sample(s).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}

pub fn encode_features(seq: &FeatureSequence) -> Vec<u8> {
    let header = format!("{FEATURE_MAGIC} {} {}\n", seq.len(), seq.dim());
    let mut out = Vec::with_capacity(header.len() + 4 * seq.as_slice().len());
    out.extend_from_slice(header.as_bytes());
    for &v in seq.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], id: &str) -> Result<FeatureSequence> {
    let ctx = || format!("feature file {id}");
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(ctx(), "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::format(ctx(), "header is not UTF-8"))?;
    let rest = header
        .strip_prefix(FEATURE_MAGIC)
        .ok_or_else(|| Error::format(ctx(), format!("bad magic in {header:?}")))?;
    let nums: Vec<usize> = rest
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(ctx(), format!("bad header {header:?}")))?;
    let [frames, dim] = nums[..] else {
        return Err(Error::format(ctx(), format!("bad header {header:?}")));
    };
    let body = &bytes[nl + 1..];
    if body.len() != frames * dim * 4 {
        return Err(Error::format(
            ctx(),
            format!("expected {} payload bytes, found {}", frames * dim * 4, body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    FeatureSequence::new(id, dim, data)
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    fs::write(path, encode_features(seq)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    decode_features(&bytes, id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let seq = FeatureSequence::new("a", 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let bytes = encode_features(&seq);
        assert!(bytes.starts_with(b"SUPRAHMM-FEAT v1 3 2\n"));
        assert_eq!(bytes.len(), "SUPRAHMM-FEAT v1 3 2\n".len() + 24);
        assert_eq!(&bytes[bytes.len() - 4..], &6.0f32.to_le_bytes());
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(decode_features(b"SUPRAHMM-FEAT v1 1 2\n\0\0\0\0", "x").is_err());
        assert!(decode_features(b"NOPE 1 1\n\0\0\0\0", "x").is_err());
        assert!(decode_features(b"SUPRAHMM-FEAT v1 1\n\0\0\0\0", "x").is_err());
        assert!(decode_features(b"no newline", "x").is_err());
    }

    #[test]
    fn wav_rate_and_channel_checks() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.wav");
        write_wav(&ok, &[1, -2, 3], 16_000).unwrap();
        let clip = read_wav(&ok).unwrap();
        assert_eq!(clip.samples, vec![1.0, -2.0, 3.0]);

        let wrong = dir.path().join("8k.wav");
        write_wav(&wrong, &[1, 2, 3], 8_000).unwrap();
        assert!(matches!(read_wav(&wrong), Err(Error::UnsupportedAudio(_))));

        let corrupt = dir.path().join("bad.wav");
        fs::write(&corrupt, b"RIFF????WAVEjunk").unwrap();
        assert!(read_wav(&corrupt).is_err());
    }

    proptest! {
        #[test]
        fn bytes_survive_decode_encode(
            rows in 1usize..20,
            dim in 1usize..40,
            seed in proptest::collection::vec(-1e6f32..1e6, 800),
        ) {
            let data: Vec<f64> = seed.iter().take(rows * dim).map(|&v| f64::from(v)).collect();
            prop_assume!(data.len() == rows * dim);
            let seq = FeatureSequence::new("p", dim, data).unwrap();
            let bytes = encode_features(&seq);
            let back = decode_features(&bytes, "p").unwrap();
            prop_assert_eq!(&back, &seq);
            prop_assert_eq!(encode_features(&back), bytes);
        }
    }
}
