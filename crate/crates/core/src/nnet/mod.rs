//! Minimal network kernel: dense layers, LSTM layers, batch normalization,
//! dropout, MSE loss and Adam, each with an analytic backward pass that is
//! held to central finite differences by the `gradcheck` harness. All math
//! is 64-bit so the gradient checks are meaningful.

pub mod adam;
pub mod batchnorm;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod tensor;

pub use adam::Adam;
pub use batchnorm::BatchNorm;
pub use dense::DenseLayer;
pub use dropout::Dropout;
pub use gradcheck::check_block;
pub use loss::{mse_loss, mse_loss_multi};
pub use lstm::LstmLayer;
pub use model::{Model, MlpModel, LstmModel};
pub use tensor::Tensor2;

/// Elementwise nonlinearity of a layer output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activated value `y = apply(z)`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    // Split to avoid overflow in exp for large |z|.
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Glorot-uniform initialization in ±sqrt(6/(fan_in+fan_out)).
pub fn glorot_uniform(
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl rand::Rng,
) -> Tensor2 {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor2::from_vec(rows, cols, data)
}
