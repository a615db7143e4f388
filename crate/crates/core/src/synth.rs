//! Seeded synthetic audio for desk-scale experiments: vowel-like utterances
//! and three noise types (speech-shaped, babble, factory). These stand in
//! for licensed speech and noise corpora; every generator is deterministic
//! in its seed so corpora and experiments reproduce exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::audio::{Waveform, PIPELINE_RATE};

const FS: f64 = PIPELINE_RATE as f64;

struct Syllable {
    start: usize,
    len: usize,
    formants: [f64; 3],
    amp: f64,
}

fn formant_gain(f: f64, formants: &[f64; 3]) -> f64 {
    const BW: [f64; 3] = [110.0, 170.0, 240.0];
    const A: [f64; 3] = [1.0, 0.65, 0.3];
    let mut g = 0.05; // broadband floor keeps high harmonics alive
    for j in 0..3 {
        let d = (f - formants[j]) / BW[j];
        g += A[j] * (-0.5 * d * d).exp();
    }
    g
}

/// A vowel-heavy nonsense utterance: harmonic source with per-syllable
/// formants, raised-cosine syllable envelopes, short consonant-like noise
/// bursts at onsets and silent gaps between syllables.
pub fn synthetic_utterance(seed: u64, secs: f64) -> Waveform {
    let n = (secs * FS).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0_base: f64 = rng.gen_range(95.0..190.0);

    // Lay out syllables with gaps until the time budget is spent.
    let mut syllables = Vec::new();
    let mut cursor = (rng.gen_range(0.02..0.08) * FS) as usize;
    while cursor < n {
        let len = (rng.gen_range(0.12..0.26) * FS) as usize;
        syllables.push(Syllable {
            start: cursor,
            len: len.min(n - cursor),
            formants: [
                rng.gen_range(300.0..850.0),
                rng.gen_range(950.0..2300.0),
                rng.gen_range(2350.0..3000.0),
            ],
            amp: rng.gen_range(0.55..1.0),
        });
        cursor += len + (rng.gen_range(0.04..0.14) * FS) as usize;
    }

    let vibrato_phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let max_harmonic = (3800.0 / f0_base).floor() as usize;
    let mut phases = vec![0.0f64; max_harmonic + 1];
    let mut samples = vec![0.0f64; n];

    for syl in &syllables {
        // Per-syllable harmonic gains: source tilt 1/k shaped by formants.
        let gains: Vec<f64> = (1..=max_harmonic)
            .map(|k| formant_gain(k as f64 * f0_base, &syl.formants) / k as f64)
            .collect();
        let attack = (0.030 * FS) as usize;
        let release = (0.050 * FS) as usize;
        for i in 0..syl.len {
            let t = (syl.start + i) as f64 / FS;
            let f0 = f0_base * (1.0 + 0.05 * (2.0 * PI * 2.7 * t + vibrato_phase).sin());
            let env = if i < attack {
                0.5 - 0.5 * (PI * i as f64 / attack as f64).cos()
            } else if i + release > syl.len {
                let r = (syl.len - i) as f64 / release as f64;
                0.5 - 0.5 * (PI * r).cos()
            } else {
                1.0
            };
            let mut v = 0.0;
            for (k, g) in gains.iter().enumerate() {
                let ph = &mut phases[k + 1];
                *ph += 2.0 * PI * (k + 1) as f64 * f0 / FS;
                if *ph > 2.0 * PI {
                    *ph -= 2.0 * PI * (*ph / (2.0 * PI)).floor();
                }
                v += g * ph.sin();
            }
            samples[syl.start + i] += syl.amp * env * v;
        }
        // Consonant-like burst at the onset.
        let burst_len = (0.018 * FS) as usize;
        for i in 0..burst_len.min(syl.len) {
            let decay = (-(i as f64) / (0.006 * FS)).exp();
            samples[syl.start + i] += 0.35 * syl.amp * decay * rng.gen_range(-1.0..1.0);
        }
    }

    // Faint breath noise under everything, then peak normalization.
    for v in &mut samples {
        *v += 0.002 * rng.gen_range(-1.0..1.0);
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let s = 0.45 / peak;
        for v in &mut samples {
            *v *= s;
        }
    }
    Waveform::new(samples, PIPELINE_RATE)
}

fn one_pole_lp(x: &mut [f64], cutoff_hz: f64) {
    let a = 1.0 - (-2.0 * PI * cutoff_hz / FS).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y += a * (*v - y);
        *v = y;
    }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let s = target / rms;
        for v in x.iter_mut() {
            *v *= s;
        }
    }
}

/// Stationary noise with a long-term-speech-like spectrum: flat at low
/// frequencies, falling above ~500 Hz, little energy below ~80 Hz.
pub fn speech_shaped_noise(seed: u64, len: usize) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    one_pole_lp(&mut x, 500.0);
    one_pole_lp(&mut x, 500.0);
    // Remove the sub-80 Hz rumble the integration built up.
    let mut low = x.clone();
    one_pole_lp(&mut low, 80.0);
    for (v, l) in x.iter_mut().zip(&low) {
        *v -= l;
    }
    normalize_rms(&mut x, 0.1);
    Waveform::new(x, PIPELINE_RATE)
}

/// Several overlapping utterance streams summed into continuous babble.
pub fn babble_noise(seed: u64, len: usize) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let talkers = 6;
    let mut x = vec![0.0f64; len];
    let secs = len as f64 / FS;
    for t in 0..talkers {
        let stream = synthetic_utterance(seed.wrapping_mul(31).wrapping_add(t as u64 + 1), secs + 1.0);
        let offset = rng.gen_range(0..stream.samples.len());
        for (i, v) in x.iter_mut().enumerate() {
            *v += stream.samples[(offset + i) % stream.samples.len()];
        }
    }
    normalize_rms(&mut x, 0.1);
    Waveform::new(x, PIPELINE_RATE)
}

/// Broadband machine noise: filtered noise bed, a slow-AM hum with
/// harmonics, and quasi-periodic clank transients.
pub fn factory_noise(seed: u64, len: usize) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    one_pole_lp(&mut x, 1200.0);

    let hum_f = rng.gen_range(47.0..53.0);
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / FS;
        let am = 1.0 + 0.4 * (2.0 * PI * 0.7 * t).sin();
        *v += 0.25
            * am
            * ((2.0 * PI * hum_f * t).sin()
                + 0.5 * (2.0 * PI * 2.0 * hum_f * t).sin()
                + 0.3 * (2.0 * PI * 3.0 * hum_f * t).sin());
    }

    let mut at = (rng.gen_range(0.1..0.5) * FS) as usize;
    while at + 1 < len {
        let clank_len = ((0.04 * FS) as usize).min(len - at);
        let strength = rng.gen_range(1.5..3.5);
        for i in 0..clank_len {
            let decay = (-(i as f64) / (0.008 * FS)).exp();
            x[at + i] += strength * decay * rng.gen_range(-1.0..1.0);
        }
        at += (rng.gen_range(0.35..0.9) * FS) as usize;
    }
    normalize_rms(&mut x, 0.1);
    Waveform::new(x, PIPELINE_RATE)
}

/// The noise types available for desk corpora, by manifest-friendly name.
pub fn noise_by_name(name: &str, seed: u64, len: usize) -> Option<Waveform> {
    match name {
        "speech_shaped" => Some(speech_shaped_noise(seed, len)),
        "babble" => Some(babble_noise(seed, len)),
        "factory" => Some(factory_noise(seed, len)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Goertzel magnitude of one bin, a small spectral probe.
    fn tone_mag(x: &[f64], freq: f64) -> f64 {
        let w = 2.0 * PI * freq / FS;
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        let c = 2.0 * w.cos();
        for &v in x {
            let s0 = v + c * s1 - s2;
            s2 = s1;
            s1 = s0;
        }
        ((s1 * s1 + s2 * s2 - c * s1 * s2) / x.len() as f64).max(0.0).sqrt()
    }

    #[test]
    fn utterance_is_deterministic_and_bounded() {
        let a = synthetic_utterance(42, 1.0);
        let b = synthetic_utterance(42, 1.0);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.len(), 16000);
        assert!(a.samples.iter().all(|v| v.is_finite() && v.abs() <= 0.45 + 1e-12));
        let c = synthetic_utterance(43, 1.0);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn utterance_has_speech_like_structure() {
        let u = synthetic_utterance(7, 1.6);
        // Frame energies: both active and near-silent frames should exist.
        let frame_rms: Vec<f64> = u
            .samples
            .chunks(320)
            .map(|f| (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt())
            .collect();
        let max = frame_rms.iter().cloned().fold(0.0f64, f64::max);
        assert!(frame_rms.iter().any(|&r| r > 0.5 * max));
        assert!(frame_rms.iter().any(|&r| r < 0.05 * max), "no pauses found");
        // Energy concentrated in the speech band rather than above 5 kHz.
        assert!(tone_mag(&u.samples, 500.0) + tone_mag(&u.samples, 1500.0)
            > 3.0 * tone_mag(&u.samples, 6000.0));
    }

    #[test]
    fn noises_are_deterministic_with_target_level() {
        for name in ["speech_shaped", "babble", "factory"] {
            let a = noise_by_name(name, 5, 16000).unwrap();
            let b = noise_by_name(name, 5, 16000).unwrap();
            assert_eq!(a.samples, b.samples, "{name} not deterministic");
            assert!(a.samples.iter().all(|v| v.is_finite()));
            assert!((a.rms() - 0.1).abs() < 0.02, "{name} rms {}", a.rms());
        }
        assert!(noise_by_name("tape_hiss", 5, 100).is_none());
    }

    #[test]
    fn speech_shaped_noise_tilts_downward() {
        let n = speech_shaped_noise(9, 4 * 16000);
        let low = tone_mag(&n.samples, 300.0);
        let high = tone_mag(&n.samples, 4000.0);
        assert!(low > 3.0 * high, "low {low} vs high {high}");
    }
}
