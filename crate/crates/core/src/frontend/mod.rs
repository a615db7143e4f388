//! Cochlear front ends: ERB channel maps, the invertible gammatone
//! filterbank, the dual-resonance nonlinear filterbank and the CARFAC
//! cascade. Each turns a waveform into a B-channel cochleagram.

pub mod carfac;
pub mod drnl;
pub mod erb;
pub mod gammatone;

use num_complex::Complex64;

pub use carfac::{Carfac, CarfacParams};
pub use drnl::{broken_stick, DrnlFilterbank, DrnlParams};
pub use erb::{erb_bandwidth, erb_rate_to_hz, hz_to_erb_rate, ChannelMap};
pub use gammatone::GammatoneFilterbank;

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Per-sample value of a cochleagram band: complex for the gammatone
/// analysis, real for DRNL and CARFAC.
pub trait BandSample: Copy {
    fn magnitude(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl BandSample for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }

    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl BandSample for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }

    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// B band signals of equal length, one per cochlear channel.
#[derive(Debug, Clone)]
pub struct Cochleagram<T: BandSample> {
    bands: Vec<Vec<T>>,
    sample_rate: u32,
    map: ChannelMap,
}

impl<T: BandSample> Cochleagram<T> {
    pub fn new(bands: Vec<Vec<T>>, sample_rate: u32, map: ChannelMap) -> Self {
        debug_assert_eq!(bands.len(), map.channels());
        debug_assert!(bands.windows(2).all(|w| w[0].len() == w[1].len()));
        Self { bands, sample_rate, map }
    }

    pub fn channels(&self) -> usize {
        self.bands.len()
    }

    /// Samples per band (equals the analyzed input length).
    pub fn samples(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    pub fn bands(&self) -> &[Vec<T>] {
        &self.bands
    }

    pub fn bands_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.bands
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn map(&self) -> &ChannelMap {
        &self.map
    }

    pub fn all_finite(&self) -> bool {
        self.bands.iter().all(|b| b.iter().all(|v| v.is_finite_value()))
    }
}

/// Which cochlear model feeds the mask estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontendKind {
    Gt,
    Drnl,
    Carfac,
}

impl FrontendKind {
    pub fn tag(self) -> &'static str {
        match self {
            FrontendKind::Gt => "gt",
            FrontendKind::Drnl => "drnl",
            FrontendKind::Carfac => "carfac",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gt" => Ok(FrontendKind::Gt),
            "drnl" => Ok(FrontendKind::Drnl),
            "carfac" => Ok(FrontendKind::Carfac),
            other => Err(Error::Config(format!("unknown frontend '{other}' (gt|drnl|carfac)"))),
        }
    }
}

/// A constructed front end ready to filter waveforms.
pub enum Frontend {
    Gt(GammatoneFilterbank),
    Drnl(DrnlFilterbank),
    Carfac(Carfac),
}

impl Frontend {
    /// Builds the named model with its default 16 kHz configuration.
    pub fn build(kind: FrontendKind) -> Frontend {
        match kind {
            FrontendKind::Gt => Frontend::Gt(GammatoneFilterbank::default_16k()),
            FrontendKind::Drnl => Frontend::Drnl(DrnlFilterbank::default_16k()),
            FrontendKind::Carfac => Frontend::Carfac(Carfac::default_16k()),
        }
    }

    pub fn kind(&self) -> FrontendKind {
        match self {
            Frontend::Gt(_) => FrontendKind::Gt,
            Frontend::Drnl(_) => FrontendKind::Drnl,
            Frontend::Carfac(_) => FrontendKind::Carfac,
        }
    }

    pub fn map(&self) -> &ChannelMap {
        match self {
            Frontend::Gt(fb) => fb.map(),
            Frontend::Drnl(fb) => fb.map(),
            Frontend::Carfac(model) => model.map(),
        }
    }

    /// Frame-wise envelope energies of the model output (module `features`
    /// turns these into network inputs).
    pub fn analyze_energies(&self, x: &Waveform) -> Result<crate::features::Spectrogram> {
        match self {
            Frontend::Gt(fb) => Ok(crate::features::envelope_energies(&fb.analyze(x)?)),
            Frontend::Drnl(fb) => Ok(crate::features::envelope_energies(&fb.analyze(x)?)),
            Frontend::Carfac(model) => Ok(crate::features::envelope_energies(&model.analyze(x)?)),
        }
    }
}
