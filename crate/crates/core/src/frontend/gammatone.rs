//! Invertible complex gammatone filterbank.
//!
//! Each channel is a 4th-order all-pole gammatone realized as four cascaded
//! identical first-order complex recursions `y[n] = x[n] + a·y[n-1]` with
//! `a = lambda·e^{j·beta}`, `beta = 2π·cf/fs` and `lambda` set from the
//! channel's ERB bandwidth. The input is pre-scaled by `2·(1-lambda)^4` so a
//! unit-amplitude tone at the center frequency comes out with envelope ≈ 1.
//!
//! Resynthesis is delay-and-sum: every channel is delayed so its impulse
//! response envelope peak lands on the common design delay (when it peaks
//! early enough), rotated so the real part is maximal there, scaled so the
//! summed magnitude response is flat at the center frequencies, and the real
//! parts are summed.

use num_complex::Complex64;

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::frontend::erb::ChannelMap;
use crate::frontend::{BandSample, Cochleagram};

/// Order of the gammatone cascade.
pub const GT_ORDER: usize = 4;

/// Bandwidth correction factor for a 4th-order gammatone:
/// the exponential decay parameter is 1.0186 times the filter's ERB.
const BW_CORRECTION: f64 = 1.018_6;

/// Design delay of the synthesis path: 4 ms.
pub const DESIGN_DELAY_SECS: f64 = 0.004;

/// Impulse response length used to derive delays, phases and gains.
const IR_LEN: usize = 4096;

#[derive(Debug, Clone, Copy)]
struct Channel {
    /// Complex pole `lambda·e^{j·beta}`.
    pole: Complex64,
    /// Peak-gain normalization, applied once at the cascade input.
    gain: f64,
}

impl Channel {
    fn design(cf: f64, erb_bw: f64, fs: f64) -> Self {
        let beta = 2.0 * std::f64::consts::PI * cf / fs;
        let decay = BW_CORRECTION * erb_bw;
        let lambda = (-2.0 * std::f64::consts::PI * decay / fs).exp();
        Channel {
            pole: Complex64::from_polar(lambda, beta),
            gain: 2.0 * (1.0 - lambda).powi(GT_ORDER as i32),
        }
    }

    /// Runs the 4-stage cascade over `x`, writing complex band samples.
    fn filter(&self, x: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        out.reserve(x.len());
        let mut state = [Complex64::new(0.0, 0.0); GT_ORDER];
        for &sample in x {
            let mut v = Complex64::new(sample * self.gain, 0.0);
            for s in state.iter_mut() {
                v += self.pole * *s;
                *s = v;
            }
            out.push(v);
        }
    }
}

/// Per-channel resynthesis corrections derived from the impulse response.
#[derive(Debug, Clone)]
struct SynthDesign {
    /// Whole-sample delay applied to each channel before summing.
    delays: Vec<usize>,
    /// Combined phase rotation and gain per channel.
    weights: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct GammatoneFilterbank {
    map: ChannelMap,
    sample_rate: u32,
    channels: Vec<Channel>,
    design_delay: usize,
    synth: SynthDesign,
}

impl GammatoneFilterbank {
    pub fn new(map: ChannelMap, sample_rate: u32) -> Self {
        let fs = sample_rate as f64;
        let channels: Vec<Channel> = map
            .center_freqs()
            .iter()
            .zip(map.erb_bandwidths())
            .map(|(&cf, &bw)| Channel::design(cf, bw, fs))
            .collect();
        let design_delay = (DESIGN_DELAY_SECS * fs).round() as usize;
        let synth = design_synthesis(&channels, &map, fs, design_delay);
        Self { map, sample_rate, channels, design_delay, synth }
    }

    /// 64 channels, 50–8000 Hz, 16 kHz.
    pub fn default_16k() -> Self {
        Self::new(ChannelMap::default_16k(), crate::audio::PIPELINE_RATE)
    }

    pub fn map(&self) -> &ChannelMap {
        &self.map
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Group delay of analyze→synthesize in samples (64 at 16 kHz).
    pub fn delay(&self) -> usize {
        self.design_delay
    }

    /// Splits a waveform into complex band signals, one per channel.
    pub fn analyze(&self, x: &Waveform) -> Result<Cochleagram<Complex64>> {
        x.expect_rate(self.sample_rate)?;
        let mut bands = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let mut band = Vec::new();
            ch.filter(&x.samples, &mut band);
            bands.push(band);
        }
        Ok(Cochleagram::new(bands, self.sample_rate, self.map.clone()))
    }

    /// Delay-and-sum resynthesis.
    ///
    /// The output carries `self.delay()` extra samples of group delay:
    /// `out[delay..delay+n]` lines up with the analyzed input.
    pub fn synthesize(&self, c: &Cochleagram<Complex64>) -> Result<Waveform> {
        if c.channels() != self.channels.len() {
            return Err(Error::ShapeMismatch(format!(
                "cochleagram has {} channels, filterbank {}",
                c.channels(),
                self.channels.len()
            )));
        }
        let n = c.samples();
        let mut out = vec![0.0f64; n + self.design_delay];
        for (k, band) in c.bands().iter().enumerate() {
            let d = self.synth.delays[k];
            let w = self.synth.weights[k];
            for (i, &v) in band.iter().enumerate() {
                out[i + d] += (w * v).re;
            }
        }
        Ok(Waveform::new(out, self.sample_rate))
    }
}

/// Derives per-channel delays, phase rotations and gains from the analysis
/// impulse responses so that the summed response approximates a pure delay.
fn design_synthesis(channels: &[Channel], map: &ChannelMap, fs: f64, delay: usize) -> SynthDesign {
    let mut impulse = vec![0.0f64; IR_LEN];
    impulse[0] = 1.0;

    let mut irs: Vec<Vec<Complex64>> = Vec::with_capacity(channels.len());
    for ch in channels {
        let mut ir = Vec::new();
        ch.filter(&impulse, &mut ir);
        irs.push(ir);
    }

    // Peak alignment: delay each channel so its envelope maximum lands at the
    // design delay. Channels that peak later cannot be advanced; they get no
    // delay and only a phase correction at the design-delay sample.
    let mut delays = Vec::with_capacity(channels.len());
    let mut phases = Vec::with_capacity(channels.len());
    for ir in &irs {
        let peak = ir
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let d = delay.saturating_sub(peak);
        let anchor = ir[delay - d];
        let phase = if anchor.norm() > 0.0 {
            anchor.conj() / anchor.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        delays.push(d);
        phases.push(phase);
    }

    // Gain flattening: iteratively scale each channel so the magnitude of the
    // summed response is 1 at every center frequency.
    let mut gains = vec![1.0f64; channels.len()];
    for _ in 0..3 {
        let summed = summed_impulse_response(&irs, &delays, &phases, &gains, delay);
        for (k, &cf) in map.center_freqs().iter().enumerate() {
            let mag = dtft_magnitude(&summed, cf, fs);
            if mag > 1e-12 {
                gains[k] /= mag;
            }
        }
    }

    let weights = phases
        .iter()
        .zip(&gains)
        .map(|(p, &g)| p * g)
        .collect();
    SynthDesign { delays, weights }
}

fn summed_impulse_response(
    irs: &[Vec<Complex64>],
    delays: &[usize],
    phases: &[Complex64],
    gains: &[f64],
    extra: usize,
) -> Vec<f64> {
    let mut sum = vec![0.0f64; IR_LEN + extra];
    for (k, ir) in irs.iter().enumerate() {
        let w = phases[k] * gains[k];
        let d = delays[k];
        for (i, &v) in ir.iter().enumerate() {
            sum[i + d] += (w * v).re;
        }
    }
    sum
}

fn dtft_magnitude(signal: &[f64], freq: f64, fs: f64) -> f64 {
    let w = -2.0 * std::f64::consts::PI * freq / fs;
    let rot = Complex64::from_polar(1.0, w);
    let mut phasor = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &s in signal {
        acc += phasor * s;
        phasor *= rot;
    }
    acc.norm()
}

/// Mean envelope magnitude of one band, for tests and probes.
pub fn mean_envelope<T: BandSample>(c: &Cochleagram<T>, channel: usize) -> f64 {
    let band = &c.bands()[channel];
    if band.is_empty() {
        return 0.0;
    }
    band.iter().map(|v| v.magnitude()).sum::<f64>() / band.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::PIPELINE_RATE;

    fn tone(freq: f64, amp: f64, secs: f64) -> Waveform {
        let n = (secs * PIPELINE_RATE as f64) as usize;
        let w = 2.0 * std::f64::consts::PI * freq / PIPELINE_RATE as f64;
        Waveform::new((0..n).map(|i| amp * (w * i as f64).sin()).collect(), PIPELINE_RATE)
    }

    #[test]
    fn tone_at_cf_peaks_in_its_own_channel() {
        let fb = GammatoneFilterbank::default_16k();
        for &k in &[5usize, 20, 40, 60] {
            let cf = fb.map().center_freqs()[k];
            let c = fb.analyze(&tone(cf, 1.0, 0.3)).unwrap();
            // Skip the onset transient when averaging.
            let start = 1600;
            let mut best = (0usize, 0.0f64);
            for b in 0..c.channels() {
                let band = &c.bands()[b][start..];
                let mean = band.iter().map(|v| v.norm()).sum::<f64>() / band.len() as f64;
                if mean > best.1 {
                    best = (b, mean);
                }
            }
            assert_eq!(best.0, k, "tone at cf[{k}]={cf} Hz peaked in channel {}", best.0);
        }
    }

    #[test]
    fn unit_tone_envelope_near_one() {
        let fb = GammatoneFilterbank::default_16k();
        let k = 32;
        let cf = fb.map().center_freqs()[k];
        let c = fb.analyze(&tone(cf, 1.0, 0.5)).unwrap();
        let band = &c.bands()[k][4000..];
        let mean = band.iter().map(|v| v.norm()).sum::<f64>() / band.len() as f64;
        assert!((mean - 1.0).abs() < 0.15, "steady-state envelope {mean}");
    }

    #[test]
    fn zero_in_zero_out() {
        let fb = GammatoneFilterbank::default_16k();
        let c = fb.analyze(&Waveform::new(vec![0.0; 1000], PIPELINE_RATE)).unwrap();
        assert!(c.bands().iter().all(|b| b.iter().all(|v| v.norm() == 0.0)));
        let y = fb.synthesize(&c).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analysis_is_linear() {
        let fb = GammatoneFilterbank::default_16k();
        let x = tone(700.0, 0.3, 0.1);
        let x2 = Waveform::new(x.samples.iter().map(|s| s * 2.0).collect(), PIPELINE_RATE);
        let c1 = fb.analyze(&x).unwrap();
        let c2 = fb.analyze(&x2).unwrap();
        for (b1, b2) in c1.bands().iter().zip(c2.bands()) {
            for (v1, v2) in b1.iter().zip(b2) {
                assert!((v2 - v1 * 2.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_tone_amplitude_within_3db() {
        let fb = GammatoneFilterbank::default_16k();
        let x = tone(1000.0, 0.5, 0.5);
        let c = fb.analyze(&x).unwrap();
        let y = fb.synthesize(&c).unwrap();
        let d = fb.delay();
        // Compare steady-state RMS, skipping onset and tail.
        let lo = 3200;
        let hi = x.len() - 1600;
        let rms_in: f64 =
            (x.samples[lo..hi].iter().map(|v| v * v).sum::<f64>() / (hi - lo) as f64).sqrt();
        let rms_out: f64 =
            (y.samples[lo + d..hi + d].iter().map(|v| v * v).sum::<f64>() / (hi - lo) as f64).sqrt();
        let ratio_db = 20.0 * (rms_out / rms_in).log10();
        assert!(ratio_db.abs() <= 3.0, "round-trip level changed by {ratio_db:.2} dB");
    }

    #[test]
    fn round_trip_scales_linearly() {
        let fb = GammatoneFilterbank::default_16k();
        let x = tone(800.0, 0.2, 0.1);
        let x3 = Waveform::new(x.samples.iter().map(|s| s * 3.0).collect(), PIPELINE_RATE);
        let y1 = fb.synthesize(&fb.analyze(&x).unwrap()).unwrap();
        let y3 = fb.synthesize(&fb.analyze(&x3).unwrap()).unwrap();
        for (a, b) in y1.samples.iter().zip(&y3.samples) {
            assert!((b - a * 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn output_length_is_input_plus_delay() {
        let fb = GammatoneFilterbank::default_16k();
        let x = tone(500.0, 0.1, 0.05);
        let y = fb.synthesize(&fb.analyze(&x).unwrap()).unwrap();
        assert_eq!(y.len(), x.len() + fb.delay());
        assert_eq!(fb.delay(), 64);
    }
}
