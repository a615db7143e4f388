//! ERB-rate frequency scale and channel maps.
//!
//! Glasberg–Moore conversions: the ERB-rate scale
//! `E(f) = 21.4·log10(0.00437·f + 1)` counts auditory filters below `f`,
//! and `ERB(f) = 24.7·(4.37·f/1000 + 1)` is the equivalent rectangular
//! bandwidth of the filter centered at `f`.

use crate::error::{Error, Result};

const EAR_Q: f64 = 21.4;
const MIN_BW_FACTOR: f64 = 0.00437;

/// Frequency in Hz to ERB-rate.
pub fn hz_to_erb_rate(f: f64) -> f64 {
    EAR_Q * (MIN_BW_FACTOR * f + 1.0).log10()
}

/// ERB-rate back to frequency in Hz.
pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / EAR_Q) - 1.0) / MIN_BW_FACTOR
}

/// Equivalent rectangular bandwidth in Hz of the auditory filter at `f`.
pub fn erb_bandwidth(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// Center frequencies and bandwidths of a filterbank, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap {
    center_freqs: Vec<f64>,
    erb_bandwidths: Vec<f64>,
}

impl ChannelMap {
    /// `B` center frequencies uniformly spaced on the ERB-rate scale with the
    /// endpoints hitting `f_min` and `f_max` exactly.
    pub fn erb_space(f_min: f64, f_max: f64, channels: usize) -> Result<Self> {
        if !(f_min > 0.0 && f_min < f_max) || !f_max.is_finite() {
            return Err(Error::InvalidRange(format!("need 0 < f_min < f_max, got [{f_min}, {f_max}]")));
        }
        if channels < 2 {
            return Err(Error::InvalidRange(format!("need at least 2 channels, got {channels}")));
        }
        let e_lo = hz_to_erb_rate(f_min);
        let e_hi = hz_to_erb_rate(f_max);
        let step = (e_hi - e_lo) / (channels - 1) as f64;
        let mut center_freqs: Vec<f64> = (0..channels)
            .map(|k| erb_rate_to_hz(e_lo + step * k as f64))
            .collect();
        // Pin the endpoints so round-trip error cannot move them.
        center_freqs[0] = f_min;
        center_freqs[channels - 1] = f_max;
        let erb_bandwidths = center_freqs.iter().map(|&f| erb_bandwidth(f)).collect();
        Ok(Self { center_freqs, erb_bandwidths })
    }

    /// Default analysis map: 64 channels from 50 Hz to Nyquist at 16 kHz.
    pub fn default_16k() -> Self {
        Self::erb_space(50.0, 8000.0, 64).expect("default map parameters are valid")
    }

    pub fn from_parts(center_freqs: Vec<f64>, erb_bandwidths: Vec<f64>) -> Self {
        assert_eq!(center_freqs.len(), erb_bandwidths.len());
        Self { center_freqs, erb_bandwidths }
    }

    pub fn channels(&self) -> usize {
        self.center_freqs.len()
    }

    pub fn center_freqs(&self) -> &[f64] {
        &self.center_freqs
    }

    pub fn erb_bandwidths(&self) -> &[f64] {
        &self.erb_bandwidths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_monotonicity() {
        let map = ChannelMap::erb_space(50.0, 8000.0, 64).unwrap();
        assert_eq!(map.channels(), 64);
        assert_eq!(map.center_freqs()[0], 50.0);
        assert_eq!(map.center_freqs()[63], 8000.0);
        for w in map.center_freqs().windows(2) {
            assert!(w[1] > w[0], "center frequencies must be strictly increasing");
        }
    }

    #[test]
    fn erb_bandwidth_at_1khz() {
        // 24.7 * (4.37 + 1) = 132.639
        let got = erb_bandwidth(1000.0);
        assert!((got - 132.639).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn erb_rate_at_1khz() {
        // 21.4 * log10(5.37) = 15.621...
        let got = hz_to_erb_rate(1000.0);
        assert!((got - 15.6215).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn uniform_on_erb_rate() {
        let map = ChannelMap::erb_space(50.0, 8000.0, 64).unwrap();
        let rates: Vec<f64> = map.center_freqs().iter().map(|&f| hz_to_erb_rate(f)).collect();
        let step = rates[1] - rates[0];
        for w in rates.windows(2) {
            assert!(((w[1] - w[0]) - step).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_ranges_rejected() {
        assert!(ChannelMap::erb_space(0.0, 8000.0, 64).is_err());
        assert!(ChannelMap::erb_space(500.0, 100.0, 64).is_err());
        assert!(ChannelMap::erb_space(50.0, 8000.0, 1).is_err());
    }
}
