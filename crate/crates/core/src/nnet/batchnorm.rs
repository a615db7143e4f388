//! Batch normalization over the batch (row) dimension, one statistic per
//! feature column. Training normalizes with batch statistics and updates the
//! running estimates; inference uses the running estimates only.

use crate::error::{Error, Result};
use crate::nnet::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Fraction of the batch statistic blended into the running estimate.
    pub momentum: f64,
    pub eps: f64,
    pub dgamma: Vec<f64>,
    pub dbeta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    /// Normalized input (before gamma/beta).
    x_hat: Tensor2,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.1,
            eps: 1e-5,
            dgamma: vec![0.0; dim],
            dbeta: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check_input(&self, x: &Tensor2) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "batchnorm input dim {} != {}",
                x.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Normalizes with batch statistics (biased variance) and updates the
    /// running estimates.
    pub fn forward_train(&mut self, x: &Tensor2) -> Result<(Tensor2, BatchNormCache)> {
        self.check_input(x)?;
        let n = x.rows();
        if n == 0 {
            return Err(Error::ShapeMismatch("batchnorm on an empty batch".into()));
        }
        let d = self.dim();
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for r in 0..n {
            for (c, &v) in x.row(r).iter().enumerate() {
                mean[c] += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for r in 0..n {
            for (c, &v) in x.row(r).iter().enumerate() {
                let dlt = v - mean[c];
                var[c] += dlt * dlt;
            }
        }
        for v in &mut var {
            *v /= n as f64;
        }
        for c in 0..d {
            self.running_mean[c] =
                (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean[c];
            self.running_var[c] =
                (1.0 - self.momentum) * self.running_var[c] + self.momentum * var[c];
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut x_hat = x.clone();
        let mut y = Tensor2::zeros(n, d);
        for r in 0..n {
            let xr = x_hat.row_mut(r);
            let yr = y.row_mut(r);
            for c in 0..d {
                xr[c] = (xr[c] - mean[c]) * inv_std[c];
                yr[c] = self.gamma[c] * xr[c] + self.beta[c];
            }
        }
        Ok((y, BatchNormCache { x_hat, inv_std }))
    }

    /// Normalizes with the running estimates; no state changes.
    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        self.check_input(x)?;
        let d = self.dim();
        let mut y = x.clone();
        for r in 0..y.rows() {
            let row = y.row_mut(r);
            for c in 0..d {
                let inv = 1.0 / (self.running_var[c] + self.eps).sqrt();
                row[c] = self.gamma[c] * (row[c] - self.running_mean[c]) * inv + self.beta[c];
            }
        }
        Ok(y)
    }

    /// Accumulates dgamma/dbeta and returns dL/dX for the training path.
    pub fn backward(&mut self, cache: &BatchNormCache, dy: &Tensor2) -> Result<Tensor2> {
        cache.x_hat.check_same_shape(dy, "batchnorm backward")?;
        let n = dy.rows();
        let d = self.dim();
        let mut sum_dy = vec![0.0; d];
        let mut sum_dy_xhat = vec![0.0; d];
        for r in 0..n {
            let dyr = dy.row(r);
            let xr = cache.x_hat.row(r);
            for c in 0..d {
                sum_dy[c] += dyr[c];
                sum_dy_xhat[c] += dyr[c] * xr[c];
            }
        }
        for c in 0..d {
            self.dbeta[c] += sum_dy[c];
            self.dgamma[c] += sum_dy_xhat[c];
        }
        // dx = γ·inv_std·(dy − mean(dy) − x̂·mean(dy⊙x̂)) per column.
        let mut dx = Tensor2::zeros(n, d);
        let nf = n as f64;
        for r in 0..n {
            let dyr = dy.row(r);
            let xr = cache.x_hat.row(r);
            let dxr = dx.row_mut(r);
            for c in 0..d {
                dxr[c] = self.gamma[c] * cache.inv_std[c]
                    * (dyr[c] - sum_dy[c] / nf - xr[c] * sum_dy_xhat[c] / nf);
            }
        }
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.dgamma.fill(0.0);
        self.dbeta.fill(0.0);
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        f(&mut self.gamma, &self.dgamma);
        f(&mut self.beta, &self.dbeta);
    }
}
