//! Adam optimizer with first/second moment estimates per parameter block.
//!
//! Usage per training step: `begin_step()`, then `update(param, grad)` once
//! per block in a fixed visitation order (slots are allocated on the first
//! step and matched positionally afterwards).

#[derive(Debug, Clone)]
struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    slots: Vec<Slot>,
    cursor: usize,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, slots: Vec::new(), cursor: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Advances the step counter and rewinds the slot cursor.
    pub fn begin_step(&mut self) {
        self.t += 1;
        self.cursor = 0;
    }

    /// Applies one Adam update to a parameter block.
    pub fn update(&mut self, param: &mut [f64], grad: &[f64]) {
        self.update_scaled(param, grad, 1.0);
    }

    /// `update` with the gradient multiplied by `scale` first (global-norm
    /// clipping applies one scale to every block of the step).
    pub fn update_scaled(&mut self, param: &mut [f64], grad: &[f64], scale: f64) {
        assert_eq!(param.len(), grad.len(), "parameter/gradient size mismatch");
        assert!(self.t > 0, "call begin_step before update");
        if self.cursor == self.slots.len() {
            self.slots.push(Slot { m: vec![0.0; param.len()], v: vec![0.0; param.len()] });
        }
        let slot = &mut self.slots[self.cursor];
        assert_eq!(slot.m.len(), param.len(), "visitation order changed between steps");
        self.cursor += 1;

        let b1 = self.beta1;
        let b2 = self.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..param.len() {
            let g = grad[i] * scale;
            slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g;
            slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g * g;
            let m_hat = slot.m[i] / bc1;
            let v_hat = slot.v[i] / bc2;
            param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = Adam::new(0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        adam.begin_step();
        adam.update(&mut p, &[0.0, 0.0, 0.0]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_is_a_signed_lr_step() {
        let mut adam = Adam::new(0.1);
        let mut p = vec![5.0, -3.0];
        adam.begin_step();
        adam.update(&mut p, &[2.5, -0.01]);
        // At t=1, m̂/√v̂ = g/|g|, so each parameter moves by ≈ lr against g.
        assert!((p[0] - (5.0 - 0.1)).abs() < 1e-6);
        assert!((p[1] - (-3.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f(p) = ‖p‖² from (5, −3) at lr 0.1.
        let mut adam = Adam::new(0.1);
        let mut p = vec![5.0, -3.0];
        let mut steps = 0;
        for _ in 0..2000 {
            let grad: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
            adam.begin_step();
            adam.update(&mut p, &grad);
            steps += 1;
            if (p[0] * p[0] + p[1] * p[1]).sqrt() < 1e-3 {
                break;
            }
        }
        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
        assert!(norm < 1e-3, "‖p‖ = {norm} after {steps} steps");
    }

    #[test]
    fn scaled_update_matches_prescaled_gradient() {
        let mut a = Adam::new(0.05);
        let mut b = Adam::new(0.05);
        let mut pa = vec![1.0, -2.0];
        let mut pb = vec![1.0, -2.0];
        for step in 1..=5 {
            let g = vec![0.3 * step as f64, -0.7];
            let gs: Vec<f64> = g.iter().map(|v| v * 0.25).collect();
            a.begin_step();
            a.update_scaled(&mut pa, &g, 0.25);
            b.begin_step();
            b.update(&mut pb, &gs);
        }
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "visitation order changed")]
    fn changed_visitation_order_is_caught() {
        let mut adam = Adam::new(0.1);
        let mut a = vec![0.0; 3];
        let mut b = vec![0.0; 5];
        adam.begin_step();
        adam.update(&mut a, &[1.0; 3]);
        adam.update(&mut b, &[1.0; 5]);
        adam.begin_step();
        adam.update(&mut b, &[1.0; 5]); // wrong block first
    }
}
