//! Cascade of asymmetric resonators with fast-acting compression.
//!
//! Stages run base to apex (high to low center frequency); each stage output
//! feeds the next stage and is tapped as one cochleagram channel. A stage is
//! a two-pole–two-zero resonator in coupled form: the state pair (z1, z2) is
//! rotated by the pole angle theta with radius r, and the output mixes the
//! input with z2 to place a pair of zeros above the pole (the asymmetry).
//!
//! Compression: a per-stage detector half-wave rectifies the stage output,
//! smooths it with the AGC time constant and across neighbor stages, and
//! drives the damping between min_damping and max_damping. The pole radius
//! r = 1 - damping·theta therefore moves every sample; more level means more
//! damping, a lower resonant peak, and a compressed output.

use std::f64::consts::PI;

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::frontend::erb::{hz_to_erb_rate, ChannelMap, erb_bandwidth, erb_rate_to_hz};
use crate::frontend::Cochleagram;

/// One resonator stage, ordered base (high cf) to apex.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    /// Pole angle `2π·cf/fs` in radians.
    pub pole_theta: f64,
    /// Damping ratio at rest (quiet): highest pole radius.
    pub min_damping: f64,
    /// Damping ratio under full compression: lowest pole radius.
    pub max_damping: f64,
    /// Zero frequency over pole frequency; the high-side notch position.
    pub zero_ratio: f64,
    /// Output gain multiplier on the DC-normalized stage.
    pub stage_gain: f64,
}

/// Detector and smoothing loop shared by all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct AgcParams {
    /// Detector smoothing time constant in seconds.
    pub time_constant: f64,
    /// Spatial smoothing half-width in stages (1 = one neighbor each side).
    pub spatial_width: usize,
    /// Detector-to-damping coupling strength.
    pub loop_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarfacParams {
    /// Base-to-apex stage list (descending center frequency).
    pub stages: Vec<StageParams>,
    pub agc: AgcParams,
}

impl CarfacParams {
    /// 64 stages, poles ERB-spaced from 6.8 kHz down to 50 Hz, at 16 kHz.
    pub fn default_16k() -> Self {
        Self::erb_spaced(50.0, 6800.0, 64, crate::audio::PIPELINE_RATE)
    }

    /// ERB-spaced pole frequencies between `f_min` and `f_max`, descending.
    pub fn erb_spaced(f_min: f64, f_max: f64, count: usize, sample_rate: u32) -> Self {
        let e_lo = hz_to_erb_rate(f_min);
        let e_hi = hz_to_erb_rate(f_max);
        let step = (e_hi - e_lo) / (count - 1) as f64;
        let stages = (0..count)
            .map(|k| {
                // Base first: highest frequency at k = 0.
                let f = erb_rate_to_hz(e_hi - step * k as f64);
                StageParams {
                    pole_theta: 2.0 * PI * f / sample_rate as f64,
                    min_damping: 0.10,
                    max_damping: 0.35,
                    zero_ratio: std::f64::consts::SQRT_2,
                    stage_gain: 1.0,
                }
            })
            .collect();
        Self {
            stages,
            agc: AgcParams { time_constant: 0.010, spatial_width: 1, loop_gain: 8.0 },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct StageCoeffs {
    theta: f64,
    sin_theta: f64,
    cos_theta: f64,
    /// Zero-placement mix of z2 into the output.
    h: f64,
    min_damping: f64,
    max_damping: f64,
    stage_gain: f64,
}

/// Level statistics from one run, for stability assertions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarfacRunStats {
    /// Largest pole radius reached by any stage at any sample.
    pub max_pole_radius: f64,
}

#[derive(Debug, Clone)]
pub struct Carfac {
    params: CarfacParams,
    coeffs: Vec<StageCoeffs>,
    /// Channel map in ascending frequency order (stage order reversed).
    map: ChannelMap,
    sample_rate: u32,
    /// One-pole detector coefficient from the AGC time constant.
    detector_coeff: f64,
}

impl Carfac {
    pub fn new(params: CarfacParams, sample_rate: u32) -> Result<Self> {
        if params.stages.len() < 2 {
            return Err(Error::InvalidParams("need at least 2 CARFAC stages".into()));
        }
        let fs = sample_rate as f64;
        let mut coeffs = Vec::with_capacity(params.stages.len());
        for (i, s) in params.stages.iter().enumerate() {
            if !(s.pole_theta > 0.0 && s.pole_theta < PI) {
                return Err(Error::InvalidParams(format!(
                    "stage {i}: pole_theta must be in (0, π), got {}",
                    s.pole_theta
                )));
            }
            if !(s.min_damping > 0.0 && s.min_damping <= s.max_damping) {
                return Err(Error::Instability(format!(
                    "stage {i}: need 0 < min_damping <= max_damping"
                )));
            }
            // r = 1 - damping·theta must stay strictly inside (0, 1).
            if 1.0 - s.max_damping * s.pole_theta <= 0.0 {
                return Err(Error::Instability(format!(
                    "stage {i}: max_damping {} puts the pole radius at or below 0",
                    s.max_damping
                )));
            }
            coeffs.push(StageCoeffs {
                theta: s.pole_theta,
                sin_theta: s.pole_theta.sin(),
                cos_theta: s.pole_theta.cos(),
                h: (s.zero_ratio * s.zero_ratio - 1.0) * s.pole_theta.sin(),
                min_damping: s.min_damping,
                max_damping: s.max_damping,
                stage_gain: s.stage_gain,
            });
        }
        // Ascending map for the cochleagram: reverse of the stage order.
        let mut cfs: Vec<f64> =
            params.stages.iter().map(|s| s.pole_theta * fs / (2.0 * PI)).collect();
        cfs.reverse();
        let bws = cfs.iter().map(|&f| erb_bandwidth(f)).collect();
        let map = ChannelMap::from_parts(cfs, bws);
        let detector_coeff = 1.0 - (-1.0 / (fs * params.agc.time_constant)).exp();
        Ok(Self { params, coeffs, map, sample_rate, detector_coeff })
    }

    pub fn default_16k() -> Self {
        Self::new(CarfacParams::default_16k(), crate::audio::PIPELINE_RATE)
            .expect("default CARFAC parameters are stable")
    }

    /// The model's native channel map, ascending.
    pub fn map(&self) -> &ChannelMap {
        &self.map
    }

    pub fn params(&self) -> &CarfacParams {
        &self.params
    }

    pub fn analyze(&self, x: &Waveform) -> Result<Cochleagram<f64>> {
        Ok(self.analyze_with_stats(x)?.0)
    }

    /// Runs the cascade, also reporting the largest pole radius seen.
    pub fn analyze_with_stats(&self, x: &Waveform) -> Result<(Cochleagram<f64>, CarfacRunStats)> {
        x.expect_rate(self.sample_rate)?;
        let n_stages = self.coeffs.len();
        let n = x.samples.len();

        // Stage outputs in base-to-apex order, re-ordered at the end.
        let mut outputs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); n_stages];
        let mut z1 = vec![0.0f64; n_stages];
        let mut z2 = vec![0.0f64; n_stages];
        let mut detector = vec![0.0f64; n_stages];
        let mut smoothed = vec![0.0f64; n_stages];
        // Quiet-state damping until the detectors see energy.
        let mut radius: Vec<f64> =
            self.coeffs.iter().map(|c| 1.0 - c.min_damping * c.theta).collect();
        let mut max_radius = radius.iter().cloned().fold(0.0f64, f64::max);

        let agc = &self.params.agc;
        let width = agc.spatial_width;

        for &sample in &x.samples {
            let mut stage_in = sample;
            for (k, c) in self.coeffs.iter().enumerate() {
                let r = radius[k];
                let a = r * c.cos_theta;
                let cc = r * c.sin_theta;
                let z1_new = a * z1[k] - cc * z2[k] + stage_in;
                let z2_new = cc * z1[k] + a * z2[k];
                z1[k] = z1_new;
                z2[k] = z2_new;
                // Unity DC gain regardless of the current damping.
                let one_minus_a = 1.0 - a;
                let dc = 1.0 + c.h * cc / (one_minus_a * one_minus_a + cc * cc);
                let y = c.stage_gain / dc * (stage_in + c.h * z2_new);
                outputs[k].push(y);
                // Half-wave rectified detector with one-pole smoothing.
                let d = y.max(0.0);
                detector[k] += self.detector_coeff * (d - detector[k]);
                stage_in = y;
            }

            // Spatial smoothing across neighbor stages (triangular kernel,
            // edges clamped), then damping update for the next sample.
            if width == 0 {
                smoothed.copy_from_slice(&detector);
            } else {
                for k in 0..n_stages {
                    let mut acc = 0.0;
                    let mut norm = 0.0;
                    for off in -(width as isize)..=(width as isize) {
                        let idx = (k as isize + off).clamp(0, n_stages as isize - 1) as usize;
                        let wgt = (width as isize + 1 - off.abs()) as f64;
                        acc += wgt * detector[idx];
                        norm += wgt;
                    }
                    smoothed[k] = acc / norm;
                }
            }
            for (k, c) in self.coeffs.iter().enumerate() {
                let u = agc.loop_gain * smoothed[k];
                // Saturating map keeps damping strictly below max_damping.
                let zeta = c.min_damping + (c.max_damping - c.min_damping) * u / (1.0 + u);
                let r = 1.0 - zeta * c.theta;
                debug_assert!(r > 0.0 && r < 1.0);
                radius[k] = r;
                if r > max_radius {
                    max_radius = r;
                }
            }
        }

        outputs.reverse(); // ascending center frequency
        let gram = Cochleagram::new(outputs, self.sample_rate, self.map.clone());
        Ok((gram, CarfacRunStats { max_pole_radius: max_radius }))
    }
}
