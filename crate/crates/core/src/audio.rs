//! Mono WAV reading and writing.
//!
//! Only RIFF/WAVE with a plain `fmt ` chunk is handled: PCM 16-bit integer
//! or IEEE 32-bit float, single channel. The pipeline runs at 16 kHz
//! end to end; callers enforce that with [`Waveform::expect_rate`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate every pipeline entry point requires.
pub const PIPELINE_RATE: u32 = 16_000;

/// Mono PCM audio held as f64 samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let power: f64 = self.samples.iter().map(|s| s * s).sum();
        (power / self.samples.len() as f64).sqrt()
    }

    /// Errors with [`Error::RateMismatch`] unless the waveform is at `rate`.
    pub fn expect_rate(&self, rate: u32) -> Result<()> {
        if self.sample_rate != rate {
            return Err(Error::RateMismatch { expected: rate, got: self.sample_rate });
        }
        Ok(())
    }
}

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::MalformedFile { path: path.display().to_string(), detail: detail.into() }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

/// Reads a mono WAV file.
///
/// int16 samples are scaled by 1/32768; float samples are taken as stored.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);

    let mut riff = [0u8; 4];
    r.read_exact(&mut riff).map_err(|_| malformed(path, "missing RIFF header"))?;
    if &riff != b"RIFF" {
        return Err(malformed(path, "not a RIFF container"));
    }
    let _file_size = read_u32(&mut r).map_err(|_| malformed(path, "truncated RIFF size"))?;
    let mut wave = [0u8; 4];
    r.read_exact(&mut wave).map_err(|_| malformed(path, "truncated WAVE id"))?;
    if &wave != b"WAVE" {
        return Err(malformed(path, "not a WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    loop {
        let mut id = [0u8; 4];
        match r.read_exact(&mut id) {
            Ok(()) => {}
            Err(_) => return Err(malformed(path, "no data chunk")),
        }
        let size = read_u32(&mut r).map_err(|_| malformed(path, "truncated chunk size"))?;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed(path, "fmt chunk too small"));
                }
                let format = read_u16(&mut r)?;
                let channels = read_u16(&mut r)?;
                let rate = read_u32(&mut r)?;
                let _byte_rate = read_u32(&mut r)?;
                let _block_align = read_u16(&mut r)?;
                let bits = read_u16(&mut r)?;
                // Skip any fmt extension.
                if size > 16 {
                    r.seek(SeekFrom::Current((size - 16) as i64))?;
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => {
                let (format, channels, rate, bits) =
                    fmt.ok_or_else(|| malformed(path, "data chunk before fmt"))?;
                if channels != 1 {
                    return Err(Error::UnsupportedFormat(format!("{channels} channels, need mono")));
                }
                let mut raw = vec![0u8; size as usize];
                r.read_exact(&mut raw).map_err(|_| malformed(path, "data chunk shorter than declared"))?;
                let samples = match (format, bits) {
                    (1, 16) => raw
                        .chunks_exact(2)
                        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                        .collect(),
                    (3, 32) => raw
                        .chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                        .collect(),
                    (f, b) => {
                        return Err(Error::UnsupportedFormat(format!(
                            "format tag {f} with {b} bits; need PCM16 or float32"
                        )))
                    }
                };
                let wav = Waveform::new(samples, rate);
                for &s in &wav.samples {
                    if !s.is_finite() {
                        return Err(malformed(path, "non-finite sample"));
                    }
                }
                return Ok(wav);
            }
            _ => {
                // Unknown chunk; chunks are word-aligned.
                let skip = size as i64 + (size % 2) as i64;
                r.seek(SeekFrom::Current(skip))?;
            }
        }
    }
}

/// Reads a mono WAV file and requires the pipeline rate of 16 kHz.
pub fn read_wav_16k(path: impl AsRef<Path>) -> Result<Waveform> {
    let wav = read_wav(path)?;
    wav.expect_rate(PIPELINE_RATE)?;
    Ok(wav)
}

/// Largest value representable by pcm16 after scaling, 1 - 2^-15.
pub const PCM16_MAX: f64 = 1.0 - 1.0 / 32768.0;

/// Writes a mono WAV file.
///
/// pcm16 clips to [-1, 1 - 2^-15] before quantization; float32 stores the
/// samples narrowed to f32, so a read→write→read cycle is bit-exact.
pub fn write_wav(path: impl AsRef<Path>, wav: &Waveform, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    for &s in &wav.samples {
        if !s.is_finite() {
            return Err(Error::UnsupportedFormat("non-finite sample in output".into()));
        }
    }

    let (format_tag, bits): (u16, u16) = match encoding {
        WavEncoding::Pcm16 => (1, 16),
        WavEncoding::Float32 => (3, 32),
    };
    let bytes_per_sample = (bits / 8) as u32;
    let data_size = wav.samples.len() as u32 * bytes_per_sample;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_size).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&format_tag.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&wav.sample_rate.to_le_bytes())?;
    w.write_all(&(wav.sample_rate * bytes_per_sample).to_le_bytes())?;
    w.write_all(&(bytes_per_sample as u16).to_le_bytes())?;
    w.write_all(&bits.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&data_size.to_le_bytes())?;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &wav.samples {
                let clipped = s.clamp(-1.0, PCM16_MAX);
                let q = (clipped * 32768.0).round() as i32;
                let q = q.clamp(i16::MIN as i32, i16::MAX as i32) as i16;
                w.write_all(&q.to_le_bytes())?;
            }
        }
        WavEncoding::Float32 => {
            for &s in &wav.samples {
                w.write_all(&(s as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        // Keep the dir alive for the test by leaking it; files are tiny.
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    #[test]
    fn pcm16_scaling() {
        let path = tmp("scale.wav");
        // Raw int16 values 0, 16384, -32768 map to 0.0, 0.5, -1.0.
        let wav = Waveform::new(vec![0.0, 0.5, -1.0], 16_000);
        write_wav(&path, &wav, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn one_second_is_16000_samples() {
        let path = tmp("sec.wav");
        let wav = Waveform::new(vec![0.25; 16_000], 16_000);
        write_wav(&path, &wav, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), 16_000);
        assert_eq!(back.sample_rate, 16_000);
    }

    #[test]
    fn float32_round_trip_is_exact() {
        let path = tmp("f32.wav");
        let samples: Vec<f64> = (0..1000).map(|i| ((i as f32) * 0.001).sin() as f64).collect();
        let wav = Waveform::new(samples, 16_000);
        write_wav(&path, &wav, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples, wav.samples);
        assert_eq!(back.sample_rate, 16_000);
    }

    #[test]
    fn pcm16_round_trip_error_bound() {
        let path = tmp("pcm16.wav");
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.013).sin() * 0.9).collect();
        let wav = Waveform::new(samples.clone(), 16_000);
        write_wav(&path, &wav, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        let max_err = samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max_err = {max_err}");
    }

    #[test]
    fn pcm16_clips_overrange() {
        let path = tmp("clip.wav");
        let wav = Waveform::new(vec![1.5, -2.0], 16_000);
        write_wav(&path, &wav, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples[0], PCM16_MAX);
        assert_eq!(back.samples[1], -1.0);
    }

    #[test]
    fn stereo_rejected() {
        let path = tmp("stereo.wav");
        // Hand-build a 2-channel header.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&40u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes()); // stereo
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&64000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_wav(&path), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn garbage_rejected() {
        let path = tmp("garbage.wav");
        std::fs::write(&path, b"definitely not a wav file").unwrap();
        assert!(matches!(read_wav(&path), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn rate_mismatch_detected() {
        let path = tmp("rate.wav");
        let wav = Waveform::new(vec![0.1; 100], 8_000);
        write_wav(&path, &wav, WavEncoding::Pcm16).unwrap();
        assert!(matches!(read_wav_16k(&path), Err(Error::RateMismatch { expected: 16_000, got: 8_000 })));
    }
}
