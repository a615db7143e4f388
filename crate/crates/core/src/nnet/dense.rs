//! Fully connected layer with an explicit backward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::tensor::Tensor2;
use crate::nnet::{glorot_uniform, Activation};

/// Y = act(X·Wᵀ + b) over a batch of row vectors.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// Weights, out_dim × in_dim.
    pub w: Tensor2,
    /// Bias, 1 × out_dim.
    pub b: Tensor2,
    pub activation: Activation,
    /// Gradient buffers, same shapes; `backward` accumulates into them.
    pub dw: Tensor2,
    pub db: Tensor2,
}

/// Values saved by `forward` that `backward` needs.
#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Tensor2,
    /// Activated output (sigmoid/tanh derivatives only need y).
    y: Tensor2,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self {
            w: glorot_uniform(out_dim, in_dim, in_dim, out_dim, rng),
            b: Tensor2::zeros(1, out_dim),
            activation,
            dw: Tensor2::zeros(out_dim, in_dim),
            db: Tensor2::zeros(1, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    fn check_input(&self, x: &Tensor2) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "dense input dim {} != layer in_dim {}",
                x.cols(),
                self.in_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass without caching, for frozen-model inference.
    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        self.check_input(x)?;
        let mut y = x.matmul_nt(&self.w);
        for r in 0..y.rows() {
            let row = y.row_mut(r);
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.activation.apply(*v + self.b.data()[c]);
            }
        }
        Ok(y)
    }

    /// Forward pass that also returns what `backward` needs.
    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, DenseCache)> {
        let y = self.infer(x)?;
        Ok((y.clone(), DenseCache { x: x.clone(), y }))
    }

    /// Accumulates dW, db and returns dL/dX. `dy` is dL/dY.
    pub fn backward(&mut self, cache: &DenseCache, dy: &Tensor2) -> Result<Tensor2> {
        cache.y.check_same_shape(dy, "dense backward")?;
        // dz = dy ⊙ act'(y)
        let mut dz = dy.clone();
        for (v, &y) in dz.data_mut().iter_mut().zip(cache.y.data()) {
            *v *= self.activation.derivative_from_output(y);
        }
        self.dw.add_assign(&dz.matmul_tn(&cache.x));
        for r in 0..dz.rows() {
            for (c, &v) in dz.row(r).iter().enumerate() {
                self.db.data_mut()[c] += v;
            }
        }
        Ok(dz.matmul(&self.w))
    }

    pub fn zero_grads(&mut self) {
        self.dw.data_mut().fill(0.0);
        self.db.data_mut().fill(0.0);
    }

    /// Visits (parameter, gradient) slices in a fixed order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        f(self.w.data_mut(), self.dw.data());
        f(self.b.data_mut(), self.db.data());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::check_block;
    use crate::nnet::loss::mse_loss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer = DenseLayer::new(3, 3, Activation::Identity, &mut rng);
        layer.w = Tensor2::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let x = Tensor2::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.0, -0.25]]);
        let y = layer.infer(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn sigmoid_of_zero_preactivation_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer = DenseLayer::new(2, 2, Activation::Sigmoid, &mut rng);
        layer.w.data_mut().fill(0.0);
        let y = layer.infer(&Tensor2::from_rows(&[vec![3.0, -1.0]])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn rejects_wrong_input_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = DenseLayer::new(4, 2, Activation::Identity, &mut rng);
        assert!(matches!(
            layer.infer(&Tensor2::zeros(1, 5)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = DenseLayer::new(5, 3, Activation::Sigmoid, &mut rng);
        let x = Tensor2::from_vec(4, 5, (0..20).map(|i| (i as f64 * 0.37).sin()).collect());
        let target = Tensor2::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.11).cos()).collect());

        layer.zero_grads();
        let (y, cache) = layer.forward(&x).unwrap();
        let (_, dy) = mse_loss(&y, &target).unwrap();
        let dx = layer.backward(&cache, &dy).unwrap();
        let dw = layer.dw.clone();
        let db = layer.db.clone();

        let loss_of = |layer: &DenseLayer, x: &Tensor2| {
            let y = layer.infer(x).unwrap();
            mse_loss(&y, &target).unwrap().0
        };

        let err_w = check_block(dw.data(), |i, d| {
            let old = layer.w.data()[i];
            layer.w.data_mut()[i] = old + d;
            let l = loss_of(&layer, &x);
            layer.w.data_mut()[i] = old;
            l
        });
        assert!(err_w < 1e-4, "weight gradient error {err_w}");

        let err_b = check_block(db.data(), |i, d| {
            let old = layer.b.data()[i];
            layer.b.data_mut()[i] = old + d;
            let l = loss_of(&layer, &x);
            layer.b.data_mut()[i] = old;
            l
        });
        assert!(err_b < 1e-4, "bias gradient error {err_b}");

        let mut x_pert = x.clone();
        let err_x = check_block(dx.data(), |i, d| {
            let old = x_pert.data()[i];
            x_pert.data_mut()[i] = old + d;
            let l = loss_of(&layer, &x_pert);
            x_pert.data_mut()[i] = old;
            l
        });
        assert!(err_x < 1e-4, "input gradient error {err_x}");
    }
}
