//! Cochlear-model noise suppression at desk scale.
//!
//! The signal path: mix clean speech with noise at an exact SNR, run a
//! cochlear front end (gammatone, DRNL or CARFAC) over the noisy audio,
//! train a small network (MLP or LSTM) to predict the ideal ratio mask
//! in 64 ERB-spaced bands, apply the predicted mask to the invertible
//! gammatone analysis, resynthesize, and score the result with segmental
//! SNR and cepstral distance against the noisy baseline.

// Filter cascades and gate updates run several arrays in lockstep; explicit
// indices keep that structure visible where iterator zips would bury it.
#![allow(clippy::needless_range_loop)]

pub mod audio;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod features;
pub mod frontend;
pub mod metrics;
pub mod mixer;
pub mod nnet;
pub mod pipeline;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
