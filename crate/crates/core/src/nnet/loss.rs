//! Mean-square error over all elements of a batch.

use crate::error::Result;
use crate::nnet::tensor::Tensor2;

/// Returns (loss, dL/dpred). loss = mean((pred−target)²), gradient
/// 2(pred−target)/count. Padding never reaches this function: sequences are
/// truncated to their true length before the loss.
pub fn mse_loss(pred: &Tensor2, target: &Tensor2) -> Result<(f64, Tensor2)> {
    pred.check_same_shape(target, "mse")?;
    let count = pred.data().len() as f64;
    let mut grad = Tensor2::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let e = p - t;
        loss += e * e;
        *g = 2.0 * e / count;
    }
    Ok((loss / count, grad))
}

/// Loss summed over several (pred, target) pairs as one mean, as used for
/// per-sequence batches: every element counts once regardless of sequence
/// length. Returns the loss and one gradient matrix per pair.
pub fn mse_loss_multi(pairs: &[(&Tensor2, &Tensor2)]) -> Result<(f64, Vec<Tensor2>)> {
    let mut count = 0usize;
    for (p, t) in pairs {
        p.check_same_shape(t, "mse")?;
        count += p.data().len();
    }
    let count_f = count.max(1) as f64;
    let mut grads = Vec::with_capacity(pairs.len());
    let mut loss = 0.0;
    for (p, t) in pairs {
        let mut g = Tensor2::zeros(p.rows(), p.cols());
        for ((gv, &pv), &tv) in g.data_mut().iter_mut().zip(p.data()).zip(t.data()) {
            let e = pv - tv;
            loss += e * e;
            *gv = 2.0 * e / count_f;
        }
        grads.push(g);
    }
    Ok((loss / count_f, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::nnet::gradcheck::check_block;

    #[test]
    fn zero_when_equal() {
        let a = Tensor2::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.0]);
        let (loss, grad) = mse_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_offset_gives_unit_loss() {
        let a = Tensor2::from_vec(2, 3, vec![0.0; 6]);
        let b = Tensor2::from_vec(2, 3, vec![1.0; 6]);
        let (loss, _) = mse_loss(&b, &a).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor2::zeros(2, 3);
        let b = Tensor2::zeros(3, 2);
        assert!(matches!(mse_loss(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut pred = Tensor2::from_vec(3, 2, vec![0.3, -0.7, 1.2, 0.0, 2.0, -1.5]);
        let target = Tensor2::from_vec(3, 2, vec![0.0, 0.5, 1.0, -0.5, 1.5, -1.0]);
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let err = check_block(grad.data(), |i, d| {
            let old = pred.data()[i];
            pred.data_mut()[i] = old + d;
            let l = mse_loss(&pred, &target).unwrap().0;
            pred.data_mut()[i] = old;
            l
        });
        assert!(err < 1e-6, "mse gradient error {err}");
    }

    #[test]
    fn multi_pair_counts_elements_once() {
        let p1 = Tensor2::from_vec(1, 2, vec![1.0, 1.0]);
        let t1 = Tensor2::from_vec(1, 2, vec![0.0, 0.0]);
        let p2 = Tensor2::from_vec(2, 2, vec![1.0; 4]);
        let t2 = Tensor2::from_vec(2, 2, vec![1.0; 4]);
        let (loss, grads) = mse_loss_multi(&[(&p1, &t1), (&p2, &t2)]).unwrap();
        // 2 errors of 1 over 6 elements.
        assert!((loss - 2.0 / 6.0).abs() < 1e-15);
        assert!((grads[0].get(0, 0) - 2.0 / 6.0).abs() < 1e-15);
        assert!(grads[1].data().iter().all(|&v| v == 0.0));
    }
}
