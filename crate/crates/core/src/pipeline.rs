//! End-to-end enhancement: noisy waveform → features through the
//! checkpoint's front end → predicted mask → mask applied to the
//! gammatone analysis of the noisy signal → resynthesis.
//!
//! Masking always happens in the gammatone domain, whichever front end
//! produced the features, because only that filterbank is invertible.

use num_complex::Complex64;

use crate::audio::{Waveform, PIPELINE_RATE};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{self, Mask, Spectrogram};
use crate::frontend::{Cochleagram, Frontend, GammatoneFilterbank};
use crate::nnet::Model;

/// Applies a frame-rate mask to a complex cochleagram. The per-sample
/// gain is the mask value linearly interpolated between frame centers
/// (constant beyond the first and last center) and clamped to [0, 1];
/// complex scaling changes magnitude only, so phase is preserved.
pub fn apply_mask(c: &Cochleagram<Complex64>, m: &Mask) -> Result<Cochleagram<Complex64>> {
    if m.channels() != c.channels() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} channels, cochleagram has {}",
            m.channels(),
            c.channels()
        )));
    }
    let frames = features::num_frames(c.samples());
    if m.frames() != frames {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} frames, {} samples need {frames}",
            m.frames(),
            c.samples()
        )));
    }

    let n = c.samples();
    let center0 = (features::FRAME_LEN / 2) as f64;
    let shift = features::FRAME_SHIFT as f64;
    // Frame position of each sample; shared by every channel.
    let positions: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let p = ((i as f64 - center0) / shift).clamp(0.0, (frames - 1) as f64);
            let f = (p.floor() as usize).min(frames - 1);
            (f, p - f as f64)
        })
        .collect();

    let mut out = c.clone();
    for (ch, band) in out.bands_mut().iter_mut().enumerate() {
        for (i, v) in band.iter_mut().enumerate() {
            let (f, frac) = positions[i];
            let hi = (f + 1).min(frames - 1);
            let g = m.get(ch, f) * (1.0 - frac) + m.get(ch, hi) * frac;
            *v *= g.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Masks a noisy gammatone analysis and resynthesizes, trimming the
/// synthesis delay so the output aligns with (and is as long as) the
/// analyzed input.
pub fn mask_and_resynthesize(
    gt: &GammatoneFilterbank,
    noisy_coch: &Cochleagram<Complex64>,
    mask: &Mask,
) -> Result<Waveform> {
    let masked = apply_mask(noisy_coch, mask)?;
    let full = gt.synthesize(&masked)?;
    let d = gt.delay();
    let n = noisy_coch.samples();
    Ok(Waveform::new(full.samples[d..d + n].to_vec(), full.sample_rate))
}

/// Enhancement with the ideal ratio mask computed from the known clean
/// and noise parts, bypassing any network. Upper bound for mask-based
/// enhancement under this pipeline.
pub fn oracle_enhance(clean: &Waveform, noise: &Waveform, noisy: &Waveform) -> Result<Waveform> {
    if clean.len() != noisy.len() {
        return Err(Error::LengthMismatch { left: clean.len(), right: noisy.len() });
    }
    if noise.len() != noisy.len() {
        return Err(Error::LengthMismatch { left: noise.len(), right: noisy.len() });
    }
    let gt = GammatoneFilterbank::default_16k();
    let s = features::envelope_energies(&gt.analyze(clean)?);
    let w = features::envelope_energies(&gt.analyze(noise)?);
    let mask = features::compute_irm(&s, &w)?;
    mask_and_resynthesize(&gt, &gt.analyze(noisy)?, &mask)
}

/// A loaded checkpoint plus the filterbanks it needs, ready to process
/// files. Stateless per call, so one instance serves many threads.
pub struct Enhancer {
    checkpoint: Checkpoint,
    gt: GammatoneFilterbank,
    features: Frontend,
}

impl Enhancer {
    pub fn new(checkpoint: Checkpoint) -> Enhancer {
        let features = Frontend::build(checkpoint.frontend);
        Enhancer { checkpoint, gt: GammatoneFilterbank::default_16k(), features }
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    /// Network input for one utterance: normalized base features, with
    /// context expansion when the model wants it.
    pub fn network_input(&self, spec: &Spectrogram) -> Result<crate::nnet::Tensor2> {
        let mut base = features::base_features_from(spec);
        self.checkpoint.stats.normalize(&mut base)?;
        Ok(match &self.checkpoint.model {
            Model::Mlp(_) => features::context_expand(&base, features::CONTEXT_FRAMES),
            Model::Lstm(_) => base,
        })
    }

    /// Predicted mask for one noisy utterance.
    pub fn predict_mask(&self, noisy: &Waveform) -> Result<Mask> {
        noisy.expect_rate(PIPELINE_RATE)?;
        let spec = self.features.analyze_energies(noisy)?;
        let input = self.network_input(&spec)?;
        let pred = self.checkpoint.model.predict(&input)?;
        Ok(Mask::from_frame_major(&pred))
    }

    /// Full enhancement of one noisy utterance. Output sample count
    /// equals the input's.
    pub fn enhance(&self, noisy: &Waveform) -> Result<Waveform> {
        noisy.expect_rate(PIPELINE_RATE)?;
        let gt_coch = self.gt.analyze(noisy)?;
        // The gammatone analysis doubles as the feature front end when the
        // checkpoint was trained on it; DRNL/CARFAC run their own pass.
        let spec = match &self.features {
            Frontend::Gt(_) => features::envelope_energies(&gt_coch),
            other => other.analyze_energies(noisy)?,
        };
        let input = self.network_input(&spec)?;
        let pred = self.checkpoint.model.predict(&input)?;
        let mask = Mask::from_frame_major(&pred);
        mask_and_resynthesize(&self.gt, &gt_coch, &mask)
    }
}
