//! Objective scoring: segmental SNR, LPC cepstral distance, and the
//! delta protocol against the unprocessed noisy baseline.
//!
//! The parameterization is fixed and documented here (20 ms frames with
//! 10 ms shift, per-frame clamps, LPC order 10, gain term excluded)
//! rather than ported bit-for-bit from any external toolkit; comparisons
//! should rely on deltas and identities, not absolute values.

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Predictor order for the cepstral distance.
pub const LPC_ORDER: usize = 10;
/// Per-frame segmental SNR clamp in dB.
pub const SEGSNR_CLAMP_DB: (f64, f64) = (-10.0, 35.0);
/// Per-frame cepstral distance clamp in dB.
pub const CD_CLAMP_DB: (f64, f64) = (0.0, 10.0);
/// Frames whose reference energy is at most this are skipped as silence.
const ACTIVE_ENERGY: f64 = 1e-8;

/// 20 ms frame length and 10 ms shift at the given rate.
fn frame_sizes(sample_rate: u32) -> (usize, usize) {
    let len = (sample_rate as f64 * 0.020).round() as usize;
    (len, len / 2)
}

fn check_pair(a: &Waveform, b: &Waveform) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::RateMismatch { expected: a.sample_rate, got: b.sample_rate });
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

/// Segmental SNR in dB. Each complete 20 ms frame (10 ms shift)
/// contributes 10·log10(Σref² / Σ(ref−test)²) clamped to [−10, 35];
/// frames with reference energy at most 1e−8 are skipped. The mean over
/// contributing frames is returned, 0.0 when none contributes.
pub fn seg_snr(reference: &Waveform, test: &Waveform) -> Result<f64> {
    check_pair(reference, test)?;
    let (flen, shift) = frame_sizes(reference.sample_rate);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + flen <= reference.len() {
        let r = &reference.samples[start..start + flen];
        let p_ref: f64 = r.iter().map(|v| v * v).sum();
        if p_ref > ACTIVE_ENERGY {
            let t = &test.samples[start..start + flen];
            let p_err: f64 = r.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            // Zero error gives +inf, which the clamp maps to the ceiling.
            let snr = 10.0 * (p_ref / p_err).log10();
            sum += snr.clamp(SEGSNR_CLAMP_DB.0, SEGSNR_CLAMP_DB.1);
            count += 1;
        }
        start += shift;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Levinson–Durbin solve of the autocorrelation normal equations.
/// `r` holds lags 0..=order; the result is a_1..a_order of the predictor
/// polynomial A(z) = 1 + Σ a_k·z^{−k}. None when the recursion hits a
/// non-positive prediction error (singular input).
pub fn levinson(r: &[f64], order: usize) -> Option<Vec<f64>> {
    assert!(r.len() > order, "need order+1 autocorrelation lags");
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        if err <= 0.0 {
            return None;
        }
        let mut acc = r[i];
        for j in 1..i {
            acc += a[j] * r[i - j];
        }
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
    }
    if a.iter().all(|v| v.is_finite()) {
        Some(a[1..].to_vec())
    } else {
        None
    }
}

/// Cepstrum of the all-pole model 1/A(z) via the standard recursion
/// c_k = −a_k − Σ_{m=1}^{k−1} (m/k)·c_m·a_{k−m}. Input is a_1..a_p,
/// output c_1..c_p (the gain term c_0 is excluded by construction).
pub fn cepstra_from_lpc(a: &[f64]) -> Vec<f64> {
    let p = a.len();
    let mut c = vec![0.0; p];
    for k in 1..=p {
        let mut acc = -a[k - 1];
        for m in 1..k {
            acc -= (m as f64 / k as f64) * c[m - 1] * a[k - m - 1];
        }
        c[k - 1] = acc;
    }
    c
}

/// LPC cepstra of one windowed analysis frame: autocorrelation method,
/// Levinson–Durbin, then `cepstra_from_lpc`. A frame with (near) zero
/// energy or a singular recursion yields all-zero cepstra.
pub fn lpc_cepstra(frame: &[f64], order: usize) -> Vec<f64> {
    let mut r = vec![0.0; order + 1];
    for (lag, slot) in r.iter_mut().enumerate() {
        let mut acc = 0.0;
        for n in lag..frame.len() {
            acc += frame[n] * frame[n - lag];
        }
        *slot = acc;
    }
    if r[0] < 1e-12 {
        return vec![0.0; order];
    }
    // Tiny relative diagonal loading keeps pure tones from singular
    // recursions without disturbing gain invariance.
    r[0] *= 1.0 + 1e-9;
    match levinson(&r, order) {
        Some(a) => cepstra_from_lpc(&a),
        None => vec![0.0; order],
    }
}

/// Hamming window of the given length.
pub fn hamming(len: usize) -> Vec<f64> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

/// Distance between two cepstral vectors: (10/ln 10)·sqrt(2·Σ Δc²),
/// clamped to [0, 10] dB.
pub fn cd_frame(c_ref: &[f64], c_test: &[f64]) -> f64 {
    let sq: f64 = c_ref.iter().zip(c_test).map(|(a, b)| (a - b) * (a - b)).sum();
    let cd = 10.0 / std::f64::consts::LN_10 * (2.0 * sq).sqrt();
    if cd.is_finite() {
        cd.clamp(CD_CLAMP_DB.0, CD_CLAMP_DB.1)
    } else {
        CD_CLAMP_DB.1
    }
}

/// Mean LPC cepstral distance in dB over 20 ms frames with 10 ms shift.
/// Frames are Hamming-windowed before analysis; excluding c_0 makes the
/// measure ignore global level. Frames with reference energy at most
/// 1e−8 are skipped, and 0.0 is returned when none contributes.
pub fn cepstral_distance(reference: &Waveform, test: &Waveform) -> Result<f64> {
    check_pair(reference, test)?;
    let (flen, shift) = frame_sizes(reference.sample_rate);
    let window = hamming(flen);
    let mut buf_r = vec![0.0; flen];
    let mut buf_t = vec![0.0; flen];
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + flen <= reference.len() {
        let r = &reference.samples[start..start + flen];
        let p_ref: f64 = r.iter().map(|v| v * v).sum();
        if p_ref > ACTIVE_ENERGY {
            let t = &test.samples[start..start + flen];
            for n in 0..flen {
                buf_r[n] = r[n] * window[n];
                buf_t[n] = t[n] * window[n];
            }
            let c_ref = lpc_cepstra(&buf_r, LPC_ORDER);
            let c_test = lpc_cepstra(&buf_t, LPC_ORDER);
            sum += cd_frame(&c_ref, &c_test);
            count += 1;
        }
        start += shift;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Raw and delta metrics for one clean/noisy/enhanced triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMetrics {
    pub segsnr_noisy: f64,
    pub segsnr_enh: f64,
    pub cd_noisy: f64,
    pub cd_enh: f64,
    pub delta_segsnr: f64,
    pub delta_cd: f64,
}

/// Scores enhancement against the noisy baseline. ΔsegSNR is
/// segSNR(clean, enhanced) − segSNR(clean, noisy); ΔCD is
/// CD(clean, noisy) − CD(clean, enhanced). Higher is better for both.
pub fn delta_report(
    clean: &Waveform,
    noisy: &Waveform,
    enhanced: &Waveform,
) -> Result<DeltaMetrics> {
    let segsnr_noisy = seg_snr(clean, noisy)?;
    let segsnr_enh = seg_snr(clean, enhanced)?;
    let cd_noisy = cepstral_distance(clean, noisy)?;
    let cd_enh = cepstral_distance(clean, enhanced)?;
    Ok(DeltaMetrics {
        segsnr_noisy,
        segsnr_enh,
        cd_noisy,
        cd_enh,
        delta_segsnr: segsnr_enh - segsnr_noisy,
        delta_cd: cd_noisy - cd_enh,
    })
}

/// One line of an evaluation report. `pesq` stays null unless an
/// external scorer fills it in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub file: String,
    pub snr_condition: f64,
    pub noise_type: String,
    pub frontend: String,
    pub arch: String,
    pub segsnr_noisy: f64,
    pub segsnr_enh: f64,
    pub cd_noisy: f64,
    pub cd_enh: f64,
    pub delta_segsnr: f64,
    pub delta_cd: f64,
    pub pesq: Option<f64>,
}

impl EvalReport {
    pub fn from_metrics(
        file: String,
        snr_condition: f64,
        noise_type: String,
        frontend: String,
        arch: String,
        m: &DeltaMetrics,
    ) -> EvalReport {
        EvalReport {
            file,
            snr_condition,
            noise_type,
            frontend,
            arch,
            segsnr_noisy: m.segsnr_noisy,
            segsnr_enh: m.segsnr_enh,
            cd_noisy: m.cd_noisy,
            cd_enh: m.cd_enh,
            delta_segsnr: m.delta_segsnr,
            delta_cd: m.delta_cd,
            pesq: None,
        }
    }
}
