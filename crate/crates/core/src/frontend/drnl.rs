//! Dual-resonance nonlinear filterbank.
//!
//! Each channel sums two paths driven by the same input:
//!   linear:    gain → gammatone cascade → lowpass
//!   nonlinear: gammatone cascade → broken-stick compression → gammatone
//!              cascade → lowpass
//!
//! The default parameter table follows the published human-model regression
//! fits for the path gains and the compression knee, rescaled so the linear
//! path has unit gain at 1 kHz (the original operates on stapes velocity;
//! our signals are full-scale PCM). The table is configuration, not ground
//! truth, and every field can be overridden.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::frontend::erb::ChannelMap;
use crate::frontend::Cochleagram;

/// Memoryless compressive nonlinearity `sign(x)·min(a|x|, b|x|^c)`.
pub fn broken_stick(x: f64, a: f64, b: f64, c: f64) -> f64 {
    let ax = a * x.abs();
    let bx = b * x.abs().powf(c);
    x.signum() * ax.min(bx)
}

/// Per-channel DRNL parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DrnlParams {
    /// Linear-path gain (outer/middle-ear transfer folded in).
    pub lin_gain: f64,
    /// Gammatone order of the linear path.
    pub lin_gt_order: usize,
    /// Broken-stick low-level slope.
    pub nl_a: f64,
    /// Broken-stick compressive scale.
    pub nl_b: f64,
    /// Broken-stick exponent, in (0, 1].
    pub nl_c: f64,
    /// Gammatone order of each nonlinear-path cascade.
    pub gt_order: usize,
    /// Lowpass cutoff in Hz (both paths).
    pub lp_cutoff: f64,
    /// Number of cascaded second-order lowpass sections.
    pub lp_order: usize,
}

/// Regression fits from the human dual-resonance model, as
/// `10^(p0 + m·log10 cf)`, rescaled by the 1 kHz linear gain.
fn fit(p0: f64, m: f64, cf: f64) -> f64 {
    10f64.powf(p0 + m * cf.log10())
}

impl DrnlParams {
    /// Default table entry for a channel at `cf`, `fs`.
    pub fn default_for(cf: f64, fs: f64) -> Self {
        // Linear gain fit g, compression fits a and b; c = 0.25.
        let g_raw = fit(4.204_05, -0.479_09, cf);
        let a_raw = fit(1.402_98, 0.819_16, cf);
        let b_raw = fit(1.619_12, -0.818_67, cf);
        // Normalize so the linear path has unit gain at 1 kHz. Scaling the
        // broken-stick output by the same factor keeps the knee position and
        // the path balance identical.
        let scale = fit(4.204_05, -0.479_09, 1000.0);
        Self {
            lin_gain: g_raw / scale,
            lin_gt_order: 2,
            nl_a: a_raw / scale,
            nl_b: b_raw / scale,
            nl_c: 0.25,
            gt_order: 3,
            lp_cutoff: (cf).min(0.45 * fs),
            lp_order: 2,
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.nl_c > 0.0 && self.nl_c <= 1.0) {
            return Err(Error::InvalidParams(format!("nl_c must be in (0,1], got {}", self.nl_c)));
        }
        if self.nl_a < 0.0 || self.nl_b < 0.0 || self.lin_gain <= 0.0 {
            return Err(Error::InvalidParams("gains must be nonnegative, lin_gain positive".into()));
        }
        if !(self.lp_cutoff > 0.0 && self.lp_cutoff < fs / 2.0) {
            return Err(Error::InvalidParams(format!(
                "lp_cutoff must be in (0, fs/2), got {}",
                self.lp_cutoff
            )));
        }
        if self.lin_gt_order == 0 || self.gt_order == 0 || self.lp_order == 0 {
            return Err(Error::InvalidParams("filter orders must be at least 1".into()));
        }
        Ok(())
    }
}

/// Real gammatone cascade of configurable order: complex one-pole stages,
/// real part taken at the end, peak gain ≈ 1 at cf.
#[derive(Debug, Clone, Copy)]
struct RealGammatone {
    pole: Complex64,
    gain: f64,
    order: usize,
}

impl RealGammatone {
    fn design(cf: f64, erb_bw: f64, fs: f64, order: usize) -> Self {
        let beta = 2.0 * PI * cf / fs;
        let lambda = (-2.0 * PI * 1.018_6 * erb_bw / fs).exp();
        Self {
            pole: Complex64::from_polar(lambda, beta),
            gain: 2.0 * (1.0 - lambda).powi(order as i32),
            order,
        }
    }

    fn filter(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(x.len());
        let mut state = vec![Complex64::new(0.0, 0.0); self.order];
        for &sample in x {
            let mut v = Complex64::new(sample * self.gain, 0.0);
            for s in state.iter_mut() {
                v += self.pole * *s;
                *s = v;
            }
            out.push(v.re);
        }
    }
}

/// Second-order Butterworth lowpass biquad (bilinear transform).
#[derive(Debug, Clone, Copy)]
struct LowpassBiquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl LowpassBiquad {
    fn design(cutoff: f64, fs: f64) -> Self {
        let k = (PI * cutoff / fs).tan();
        let sqrt2 = std::f64::consts::SQRT_2;
        let a0 = k * k + sqrt2 * k + 1.0;
        Self {
            b0: k * k / a0,
            b1: 2.0 * k * k / a0,
            b2: k * k / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (k * k - sqrt2 * k + 1.0) / a0,
        }
    }

    fn filter_in_place(&self, x: &mut [f64], sections: usize) {
        for _ in 0..sections {
            let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
            for v in x.iter_mut() {
                let x0 = *v;
                let y = self.b0 * x0 + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y;
                *v = y;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct DrnlChannel {
    params: DrnlParams,
    lin_gt: RealGammatone,
    nl_gt: RealGammatone,
    lowpass: LowpassBiquad,
}

#[derive(Debug, Clone)]
pub struct DrnlFilterbank {
    map: ChannelMap,
    sample_rate: u32,
    channels: Vec<DrnlChannel>,
}

impl DrnlFilterbank {
    /// Builds the bank with the default parameter table.
    pub fn new(map: ChannelMap, sample_rate: u32) -> Result<Self> {
        let fs = sample_rate as f64;
        let params = map
            .center_freqs()
            .iter()
            .map(|&cf| DrnlParams::default_for(cf, fs))
            .collect();
        Self::with_params(map, sample_rate, params)
    }

    /// Builds the bank with an explicit per-channel table.
    pub fn with_params(map: ChannelMap, sample_rate: u32, params: Vec<DrnlParams>) -> Result<Self> {
        if params.len() != map.channels() {
            return Err(Error::InvalidParams(format!(
                "{} parameter sets for {} channels",
                params.len(),
                map.channels()
            )));
        }
        let fs = sample_rate as f64;
        let mut channels = Vec::with_capacity(params.len());
        for ((&cf, &bw), p) in map.center_freqs().iter().zip(map.erb_bandwidths()).zip(params) {
            p.validate(fs)?;
            channels.push(DrnlChannel {
                lin_gt: RealGammatone::design(cf, bw, fs, p.lin_gt_order),
                nl_gt: RealGammatone::design(cf, bw, fs, p.gt_order),
                lowpass: LowpassBiquad::design(p.lp_cutoff, fs),
                params: p,
            });
        }
        Ok(Self { map, sample_rate, channels })
    }

    pub fn default_16k() -> Self {
        Self::new(ChannelMap::default_16k(), crate::audio::PIPELINE_RATE)
            .expect("default DRNL table is valid")
    }

    pub fn map(&self) -> &ChannelMap {
        &self.map
    }

    pub fn analyze(&self, x: &Waveform) -> Result<Cochleagram<f64>> {
        x.expect_rate(self.sample_rate)?;
        let mut bands = Vec::with_capacity(self.channels.len());
        let mut stage = Vec::new();
        for ch in &self.channels {
            let p = &ch.params;

            // Linear path: gain, gammatone, lowpass.
            let scaled: Vec<f64> = x.samples.iter().map(|s| s * p.lin_gain).collect();
            let mut lin = Vec::new();
            ch.lin_gt.filter(&scaled, &mut lin);
            ch.lowpass.filter_in_place(&mut lin, p.lp_order);

            // Nonlinear path: gammatone, broken stick, gammatone, lowpass.
            ch.nl_gt.filter(&x.samples, &mut stage);
            let compressed: Vec<f64> =
                stage.iter().map(|&v| broken_stick(v, p.nl_a, p.nl_b, p.nl_c)).collect();
            let mut nl = Vec::new();
            ch.nl_gt.filter(&compressed, &mut nl);
            ch.lowpass.filter_in_place(&mut nl, p.lp_order);

            let band: Vec<f64> = lin.iter().zip(&nl).map(|(l, n)| l + n).collect();
            bands.push(band);
        }
        Ok(Cochleagram::new(bands, self.sample_rate, self.map.clone()))
    }
}
