//! Framed features and mask targets.
//!
//! A cochleagram becomes a `Spectrogram` of frame-RMS envelope magnitudes
//! (20 ms windows, 10 ms shift). Network inputs are the log energies plus
//! their delta coefficients (128 dimensions for 64 channels), mean/variance
//! normalized with training-set statistics, and optionally expanded with
//! ±3 frames of context. Training targets are ideal ratio masks computed
//! from clean speech and noise filtered separately.

use crate::error::{Error, Result};
use crate::frontend::{BandSample, Cochleagram};
use crate::nnet::tensor::Tensor2;

/// 20 ms analysis window at 16 kHz.
pub const FRAME_LEN: usize = 320;
/// 10 ms frame shift at 16 kHz.
pub const FRAME_SHIFT: usize = 160;
/// Energies below this are clamped before the log.
pub const LOG_FLOOR: f64 = 1e-10;
/// Frames of context on each side for the feedforward network.
pub const CONTEXT_FRAMES: usize = 3;

/// Frames covering `n_samples` at the pipeline frame shift (tail padded).
pub fn num_frames(n_samples: usize) -> usize {
    n_samples.div_ceil(FRAME_SHIFT)
}

/// Frame-wise envelope magnitudes, channels × frames, all nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Tensor2,
}

impl Spectrogram {
    pub fn from_tensor(values: Tensor2) -> Self {
        Self { values }
    }

    pub fn channels(&self) -> usize {
        self.values.rows()
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values.get(band, frame)
    }

    pub fn values(&self) -> &Tensor2 {
        &self.values
    }
}

/// Frame RMS of each channel envelope: window `FRAME_LEN`, hop
/// `FRAME_SHIFT`, frame f covering samples `[f·H, f·H + L)` with the tail
/// zero-padded, so a constant envelope maps to itself on full frames.
pub fn envelope_energies<T: BandSample>(c: &Cochleagram<T>) -> Spectrogram {
    let n = c.samples();
    let frames = num_frames(n);
    let mut values = Tensor2::zeros(c.channels(), frames);
    for (b, band) in c.bands().iter().enumerate() {
        for f in 0..frames {
            let start = f * FRAME_SHIFT;
            let stop = (start + FRAME_LEN).min(n);
            let mut acc = 0.0;
            for v in &band[start..stop] {
                let m = v.magnitude();
                acc += m * m;
            }
            values.set(b, f, (acc / FRAME_LEN as f64).sqrt());
        }
    }
    Spectrogram { values }
}

/// Natural log of the energies, frame-major (frames × channels), with the
/// floor applied so silence stays finite.
pub fn log_compress(s: &Spectrogram) -> Tensor2 {
    let mut out = Tensor2::zeros(s.frames(), s.channels());
    for f in 0..s.frames() {
        for b in 0..s.channels() {
            out.set(f, b, s.get(b, f).max(LOG_FLOOR).ln());
        }
    }
    out
}

/// Regression delta coefficients over ±2 frames, edge frames replicated:
/// `d_t = Σ_{n=1..2} n·(m_{t+n} − m_{t−n}) / (2·Σ n²)`.
pub fn delta_coeffs(m: &Tensor2) -> Tensor2 {
    let frames = m.rows() as isize;
    let mut out = Tensor2::zeros(m.rows(), m.cols());
    let clamp = |t: isize| t.clamp(0, frames - 1) as usize;
    for t in 0..frames {
        for c in 0..m.cols() {
            let mut num = 0.0;
            for n in 1..=2isize {
                num += n as f64 * (m.get(clamp(t + n), c) - m.get(clamp(t - n), c));
            }
            out.set(t as usize, c, num / 10.0);
        }
    }
    out
}

/// Log energies and their deltas side by side: frames × 2B.
pub fn base_features<T: BandSample>(c: &Cochleagram<T>) -> Tensor2 {
    base_features_from(&envelope_energies(c))
}

/// Same as `base_features`, starting from an already-computed spectrogram.
pub fn base_features_from(s: &Spectrogram) -> Tensor2 {
    let logm = log_compress(s);
    let deltas = delta_coeffs(&logm);
    let frames = logm.rows();
    let b = logm.cols();
    let mut out = Tensor2::zeros(frames, 2 * b);
    for f in 0..frames {
        out.row_mut(f)[..b].copy_from_slice(logm.row(f));
        out.row_mut(f)[b..].copy_from_slice(deltas.row(f));
    }
    out
}

/// Concatenates rows t−k..t+k (boundaries replicated): F × D → F × (2k+1)·D.
pub fn context_expand(m: &Tensor2, k: usize) -> Tensor2 {
    let frames = m.rows() as isize;
    let d = m.cols();
    let mut out = Tensor2::zeros(m.rows(), (2 * k + 1) * d);
    for t in 0..frames {
        let row = out.row_mut(t as usize);
        for (slot, off) in (-(k as isize)..=k as isize).enumerate() {
            let src = (t + off).clamp(0, frames - 1) as usize;
            row[slot * d..(slot + 1) * d].copy_from_slice(m.row(src));
        }
    }
    out
}

/// Per-dimension mean and standard deviation of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Dimensions with less spread than this normalize to zero.
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Population statistics over the rows of every matrix, with the std
    /// floor applied to degenerate (constant) dimensions.
    pub fn compute<'a, I>(mats: I) -> Result<NormStats>
    where
        I: IntoIterator<Item = &'a Tensor2>,
    {
        let mut mats = mats.into_iter().peekable();
        let d = match mats.peek() {
            Some(m) => m.cols(),
            None => return Err(Error::EmptyCorpus("no feature matrices".into())),
        };
        let mut sum = vec![0.0f64; d];
        let mut sum_sq = vec![0.0f64; d];
        let mut count = 0usize;
        for m in mats {
            if m.cols() != d {
                return Err(Error::ShapeMismatch(format!(
                    "feature dim {} != {d} while accumulating stats",
                    m.cols()
                )));
            }
            for r in 0..m.rows() {
                for (c, &v) in m.row(r).iter().enumerate() {
                    sum[c] += v;
                    sum_sq[c] += v * v;
                }
            }
            count += m.rows();
        }
        if count == 0 {
            return Err(Error::EmptyCorpus("no feature frames".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| (sq / n - m * m).max(0.0).sqrt().max(Self::STD_FLOOR))
            .collect();
        Ok(NormStats { mean, std })
    }

    /// Rounds the statistics through f32, the checkpoint storage type.
    /// Training applies this before any normalization so that losses
    /// computed in memory match a reloaded checkpoint bit-for-bit.
    pub fn round_to_f32(&mut self) {
        for v in self.mean.iter_mut().chain(self.std.iter_mut()) {
            *v = *v as f32 as f64;
        }
    }

    /// In-place `(x − mean)/std` per dimension.
    pub fn normalize(&self, m: &mut Tensor2) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "matrix dim {} != stats dim {}",
                m.cols(),
                self.dim()
            )));
        }
        for r in 0..m.rows() {
            for (c, v) in m.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        Ok(())
    }
}

/// Time-frequency gains in [0, 1], channels × frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    values: Tensor2,
}

impl Mask {
    /// Wraps a channels × frames tensor, clamping into [0, 1].
    pub fn from_tensor(mut values: Tensor2) -> Self {
        for v in values.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Self { values }
    }

    /// Converts network output (frames × channels) into a mask.
    pub fn from_frame_major(m: &Tensor2) -> Self {
        let mut values = Tensor2::zeros(m.cols(), m.rows());
        for f in 0..m.rows() {
            for b in 0..m.cols() {
                values.set(b, f, m.get(f, b).clamp(0.0, 1.0));
            }
        }
        Self { values }
    }

    /// Frames × channels layout used as the network training target.
    pub fn to_frame_major(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(self.frames(), self.channels());
        for b in 0..self.channels() {
            for f in 0..self.frames() {
                out.set(f, b, self.get(b, f));
            }
        }
        out
    }

    pub fn channels(&self) -> usize {
        self.values.rows()
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values.get(band, frame)
    }

    pub fn values(&self) -> &Tensor2 {
        &self.values
    }
}

/// Ideal ratio mask `S/(S+W)` from clean-speech and noise spectrograms;
/// frames with no energy in either source get 0 so silence stays silent.
pub fn compute_irm(s: &Spectrogram, w: &Spectrogram) -> Result<Mask> {
    s.values.check_same_shape(&w.values, "IRM inputs")?;
    let mut values = Tensor2::zeros(s.channels(), s.frames());
    for b in 0..s.channels() {
        for f in 0..s.frames() {
            let sv = s.get(b, f);
            let wv = w.get(b, f);
            let denom = sv + wv;
            let m = if denom < 1e-10 { 0.0 } else { sv / denom };
            values.set(b, f, m.clamp(0.0, 1.0));
        }
    }
    Ok(Mask { values })
}
