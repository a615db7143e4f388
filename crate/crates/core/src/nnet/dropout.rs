//! Inverted dropout: survivors are scaled by 1/keep_prob at training time so
//! inference is a plain identity.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Dropout {
    pub keep_prob: f64,
}

/// The applied mask (0 or 1/keep_prob per element), kept for backward.
#[derive(Debug, Clone)]
pub struct DropoutCache {
    scale: Vec<f64>,
}

impl Dropout {
    pub fn new(keep_prob: f64) -> Result<Self> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "keep_prob must be in (0, 1], got {keep_prob}"
            )));
        }
        Ok(Self { keep_prob })
    }

    /// Scales `x` in place; the identity when `training` is false.
    pub fn forward(&self, x: &mut Tensor2, training: bool, rng: &mut impl Rng) -> DropoutCache {
        if !training || self.keep_prob == 1.0 {
            return DropoutCache { scale: Vec::new() };
        }
        let inv = 1.0 / self.keep_prob;
        let scale: Vec<f64> = x
            .data()
            .iter()
            .map(|_| if rng.gen::<f64>() < self.keep_prob { inv } else { 0.0 })
            .collect();
        for (v, s) in x.data_mut().iter_mut().zip(&scale) {
            *v *= s;
        }
        DropoutCache { scale }
    }

    /// Applies the same mask to the gradient, in place.
    pub fn backward(&self, cache: &DropoutCache, dy: &mut Tensor2) {
        if cache.scale.is_empty() {
            return;
        }
        for (v, s) in dy.data_mut().iter_mut().zip(&cache.scale) {
            *v *= s;
        }
    }
}
