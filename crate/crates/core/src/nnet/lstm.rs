//! LSTM layer processing one sequence at a time, with full backpropagation
//! through time. Gates use sigmoid, the candidate uses tanh:
//!
//!   c_t = f ⊙ c_{t−1} + i ⊙ g,   h_t = o ⊙ act(c_t)
//!
//! `act` is tanh for hidden layers. The mask-output layer uses sigmoid as
//! the cell activation so h_t lands in (0, 1) like the targets.
//!
//! Frames at and beyond `len` are padding: they are neither processed nor
//! differentiated, so appending padding changes nothing.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::tensor::Tensor2;
use crate::nnet::{glorot_uniform, sigmoid, Activation};

/// Gate order used everywhere: input, forget, output, candidate.
pub const GATE_NAMES: [&str; 4] = ["i", "f", "o", "g"];
const GI: usize = 0;
const GF: usize = 1;
const GO: usize = 2;
const GG: usize = 3;

#[derive(Debug, Clone)]
pub struct LstmLayer {
    /// Input weights per gate, hidden × input.
    pub w: [Tensor2; 4],
    /// Recurrent weights per gate, hidden × hidden.
    pub u: [Tensor2; 4],
    /// Biases per gate, 1 × hidden. Forget bias starts at 1.0.
    pub b: [Tensor2; 4],
    /// tanh for hidden layers, sigmoid for the mask output layer.
    pub cell_activation: Activation,
    pub dw: [Tensor2; 4],
    pub du: [Tensor2; 4],
    pub db: [Tensor2; 4],
}

/// Per-sequence values saved by `forward` for BPTT.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Tensor2,
    /// Activated gate values, T × hidden each, in GATE order.
    gates: [Tensor2; 4],
    /// Cell states c_t.
    c: Tensor2,
    /// act(c_t).
    c_act: Tensor2,
    /// Outputs h_t.
    h: Tensor2,
    len: usize,
}

impl LstmLayer {
    pub fn new(
        in_dim: usize,
        hidden: usize,
        cell_activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let w = std::array::from_fn(|_| glorot_uniform(hidden, in_dim, in_dim, hidden, rng));
        let u = std::array::from_fn(|_| glorot_uniform(hidden, hidden, hidden, hidden, rng));
        let mut b: [Tensor2; 4] = std::array::from_fn(|_| Tensor2::zeros(1, hidden));
        b[GF].data_mut().fill(1.0);
        Self {
            w,
            u,
            b,
            cell_activation,
            dw: std::array::from_fn(|_| Tensor2::zeros(hidden, in_dim)),
            du: std::array::from_fn(|_| Tensor2::zeros(hidden, hidden)),
            db: std::array::from_fn(|_| Tensor2::zeros(1, hidden)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w[GI].cols()
    }

    pub fn hidden(&self) -> usize {
        self.w[GI].rows()
    }

    /// Runs the recurrence over rows `0..len` of `x`; later rows are padding
    /// and produce zero output. Returns h (same row count as x) plus cache.
    pub fn forward(&self, x: &Tensor2, len: usize) -> Result<(Tensor2, LstmCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "lstm input dim {} != {}",
                x.cols(),
                self.in_dim()
            )));
        }
        if len > x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "sequence length {len} exceeds {} rows",
                x.rows()
            )));
        }
        let t_total = x.rows();
        let hd = self.hidden();
        // One GEMM per gate for the input contribution of every frame.
        let xw: [Tensor2; 4] = std::array::from_fn(|g| x.matmul_nt(&self.w[g]));
        let mut gates: [Tensor2; 4] = std::array::from_fn(|_| Tensor2::zeros(t_total, hd));
        let mut c = Tensor2::zeros(t_total, hd);
        let mut c_act = Tensor2::zeros(t_total, hd);
        let mut h = Tensor2::zeros(t_total, hd);
        let mut h_prev = vec![0.0f64; hd];
        let mut c_prev = vec![0.0f64; hd];

        for t in 0..len {
            for g in 0..4 {
                let xr = xw[g].row(t);
                let br = self.b[g].data();
                let gr = gates[g].row_mut(t);
                for j in 0..hd {
                    let mut z = xr[j] + br[j];
                    let ur = self.u[g].row(j);
                    for (uu, hh) in ur.iter().zip(&h_prev) {
                        z += uu * hh;
                    }
                    gr[j] = if g == GG { z.tanh() } else { sigmoid(z) };
                }
            }
            for j in 0..hd {
                let cv = gates[GF].get(t, j) * c_prev[j] + gates[GI].get(t, j) * gates[GG].get(t, j);
                let av = self.cell_activation.apply(cv);
                c.set(t, j, cv);
                c_act.set(t, j, av);
                h.set(t, j, gates[GO].get(t, j) * av);
            }
            h_prev.copy_from_slice(h.row(t));
            c_prev.copy_from_slice(c.row(t));
        }

        let cache = LstmCache { x: x.clone(), gates, c, c_act, h: h.clone(), len };
        Ok((h, cache))
    }

    /// BPTT. `dh_out` is dL/dh (rows ≥ len ignored); accumulates parameter
    /// gradients and returns dL/dx.
    pub fn backward(&mut self, cache: &LstmCache, dh_out: &Tensor2) -> Result<Tensor2> {
        cache.h.check_same_shape(dh_out, "lstm backward")?;
        let t_total = cache.x.rows();
        let hd = self.hidden();
        let len = cache.len;

        // Pre-activation gradients per gate, filled walking time backwards.
        let mut dz: [Tensor2; 4] = std::array::from_fn(|_| Tensor2::zeros(t_total, hd));
        let mut dh_next = vec![0.0f64; hd];
        let mut dc_next = vec![0.0f64; hd];

        for t in (0..len).rev() {
            for j in 0..hd {
                let dh = dh_out.get(t, j) + dh_next[j];
                let i = cache.gates[GI].get(t, j);
                let f = cache.gates[GF].get(t, j);
                let o = cache.gates[GO].get(t, j);
                let g = cache.gates[GG].get(t, j);
                let a = cache.c_act.get(t, j);
                let c_prev = if t > 0 { cache.c.get(t - 1, j) } else { 0.0 };

                let dc = dh * o * self.cell_activation.derivative_from_output(a) + dc_next[j];
                dz[GO].set(t, j, dh * a * o * (1.0 - o));
                dz[GI].set(t, j, dc * g * i * (1.0 - i));
                dz[GF].set(t, j, dc * c_prev * f * (1.0 - f));
                dz[GG].set(t, j, dc * i * (1.0 - g * g));
                dc_next[j] = dc * f;
            }
            // dh_{t−1} = Σ_gates dzᵗ U (vector × matrix per gate).
            dh_next.fill(0.0);
            for g in 0..4 {
                let dzr = dz[g].row(t);
                for (j, &dzv) in dzr.iter().enumerate() {
                    if dzv != 0.0 {
                        let ur = self.u[g].row(j);
                        for (jj, uu) in ur.iter().enumerate() {
                            dh_next[jj] += dzv * uu;
                        }
                    }
                }
            }
        }

        // h shifted one step: row t holds h_{t−1}, row 0 is the zero state.
        let mut h_shift = Tensor2::zeros(t_total, hd);
        for t in 1..len {
            let src: Vec<f64> = cache.h.row(t - 1).to_vec();
            h_shift.row_mut(t).copy_from_slice(&src);
        }

        let mut dx = Tensor2::zeros(t_total, cache.x.cols());
        for g in 0..4 {
            self.dw[g].add_assign(&dz[g].matmul_tn(&cache.x));
            self.du[g].add_assign(&dz[g].matmul_tn(&h_shift));
            for t in 0..len {
                for (j, &v) in dz[g].row(t).iter().enumerate() {
                    self.db[g].data_mut()[j] += v;
                }
            }
            dx.add_assign(&dz[g].matmul(&self.w[g]));
        }
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        for g in 0..4 {
            self.dw[g].data_mut().fill(0.0);
            self.du[g].data_mut().fill(0.0);
            self.db[g].data_mut().fill(0.0);
        }
    }

    /// Visits (parameter, gradient) blocks in a fixed order: per gate
    /// (i, f, o, g), W then U then b.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for g in 0..4 {
            f(self.w[g].data_mut(), self.dw[g].data());
            f(self.u[g].data_mut(), self.du[g].data());
            f(self.b[g].data_mut(), self.db[g].data());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::check_block;
    use crate::nnet::loss::mse_loss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_layer(seed: u64, cell_activation: Activation) -> LstmLayer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LstmLayer::new(3, 4, cell_activation, &mut rng)
    }

    fn toy_input(t: usize) -> Tensor2 {
        Tensor2::from_vec(t, 3, (0..t * 3).map(|i| (i as f64 * 0.41).sin()).collect())
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut layer = toy_layer(1, Activation::Tanh);
        for g in 0..4 {
            layer.w[g].data_mut().fill(0.0);
            layer.u[g].data_mut().fill(0.0);
            layer.b[g].data_mut().fill(0.0);
        }
        let (h, _) = layer.forward(&toy_input(6), 6).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forget_bias_is_one() {
        let layer = toy_layer(2, Activation::Tanh);
        assert!(layer.b[1].data().iter().all(|&v| v == 1.0));
        assert!(layer.b[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_cell_output_stays_in_unit_interval() {
        let layer = toy_layer(3, Activation::Sigmoid);
        let (h, _) = layer.forward(&toy_input(50), 50).unwrap();
        assert!(h.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut layer = toy_layer(4, Activation::Tanh);
        let x = toy_input(5);
        let target = Tensor2::from_vec(5, 4, (0..20).map(|i| (i as f64 * 0.23).cos()).collect());

        layer.zero_grads();
        let (h, cache) = layer.forward(&x, 5).unwrap();
        let (_, dh) = mse_loss(&h, &target).unwrap();
        let dx = layer.backward(&cache, &dh).unwrap();

        let loss_of = |layer: &LstmLayer, x: &Tensor2| {
            let (h, _) = layer.forward(x, 5).unwrap();
            mse_loss(&h, &target).unwrap().0
        };

        for g in 0..4 {
            let dw = layer.dw[g].clone();
            let err = check_block(dw.data(), |i, d| {
                let old = layer.w[g].data()[i];
                layer.w[g].data_mut()[i] = old + d;
                let l = loss_of(&layer, &x);
                layer.w[g].data_mut()[i] = old;
                l
            });
            assert!(err < 1e-4, "W_{} gradient error {err}", GATE_NAMES[g]);

            let du = layer.du[g].clone();
            let err = check_block(du.data(), |i, d| {
                let old = layer.u[g].data()[i];
                layer.u[g].data_mut()[i] = old + d;
                let l = loss_of(&layer, &x);
                layer.u[g].data_mut()[i] = old;
                l
            });
            assert!(err < 1e-4, "U_{} gradient error {err}", GATE_NAMES[g]);

            let db = layer.db[g].clone();
            let err = check_block(db.data(), |i, d| {
                let old = layer.b[g].data()[i];
                layer.b[g].data_mut()[i] = old + d;
                let l = loss_of(&layer, &x);
                layer.b[g].data_mut()[i] = old;
                l
            });
            assert!(err < 1e-4, "b_{} gradient error {err}", GATE_NAMES[g]);
        }

        let mut xp = x.clone();
        let err = check_block(dx.data(), |i, d| {
            let old = xp.data()[i];
            xp.data_mut()[i] = old + d;
            let l = loss_of(&layer, &xp);
            xp.data_mut()[i] = old;
            l
        });
        assert!(err < 1e-4, "input gradient error {err}");
    }

    #[test]
    fn bptt_matches_finite_differences_sigmoid_cell() {
        let mut layer = toy_layer(5, Activation::Sigmoid);
        let x = toy_input(5);
        let target = Tensor2::from_vec(5, 4, vec![0.5; 20]);
        layer.zero_grads();
        let (h, cache) = layer.forward(&x, 5).unwrap();
        let (_, dh) = mse_loss(&h, &target).unwrap();
        layer.backward(&cache, &dh).unwrap();
        for g in 0..4 {
            let dw = layer.dw[g].clone();
            let err = check_block(dw.data(), |i, d| {
                let old = layer.w[g].data()[i];
                layer.w[g].data_mut()[i] = old + d;
                let (h, _) = layer.forward(&x, 5).unwrap();
                let l = mse_loss(&h, &target).unwrap().0;
                layer.w[g].data_mut()[i] = old;
                l
            });
            assert!(err < 1e-4, "W_{} gradient error {err}", GATE_NAMES[g]);
        }
    }

    #[test]
    fn padding_changes_nothing() {
        let mut layer = toy_layer(6, Activation::Tanh);
        let x = toy_input(6);
        let len = 4;
        let target = Tensor2::from_vec(6, 4, (0..24).map(|i| i as f64 * 0.05).collect());

        let run = |layer: &mut LstmLayer, x: &Tensor2, t_rows: usize| {
            layer.zero_grads();
            let (h, cache) = layer.forward(x, len).unwrap();
            // Loss only over valid frames, as the trainer does.
            let hv = h.slice_rows(0, len);
            let tv = target.slice_rows(0, len);
            let (_, dval) = mse_loss(&hv, &tv).unwrap();
            let mut dh = Tensor2::zeros(t_rows, 4);
            for t in 0..len {
                let src: Vec<f64> = dval.row(t).to_vec();
                dh.row_mut(t).copy_from_slice(&src);
            }
            let dx = layer.backward(&cache, &dh).unwrap();
            (h, dx)
        };

        let (h_a, dx_a) = run(&mut layer, &x, 6);
        let grads_a: Vec<Tensor2> = (0..4).map(|g| layer.dw[g].clone()).collect();

        // Same sequence with 100 extra padding rows.
        let mut padded = Tensor2::zeros(106, 3);
        for t in 0..6 {
            let src: Vec<f64> = x.row(t).to_vec();
            padded.row_mut(t).copy_from_slice(&src);
        }
        let (h_b, dx_b) = run(&mut layer, &padded, 106);

        for t in 0..6 {
            for j in 0..4 {
                assert!((h_a.get(t, j) - h_b.get(t, j)).abs() <= 1e-12);
            }
        }
        for t in 0..6 {
            for j in 0..3 {
                assert!((dx_a.get(t, j) - dx_b.get(t, j)).abs() <= 1e-12);
            }
        }
        for g in 0..4 {
            for (a, b) in grads_a[g].data().iter().zip(layer.dw[g].data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
