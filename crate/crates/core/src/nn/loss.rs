use super::tensor::Tensor2D;
use crate::error::{BendError, Result};

/// Mean softmax cross-entropy over the batch.
///
/// Returns the loss and its gradient with respect to `logits`,
/// `(softmax − onehot) / batch`.
pub fn cross_entropy_loss(logits: &Tensor2D, labels: &[usize]) -> Result<(f64, Tensor2D)> {
    let (batch, classes) = logits.shape();
    if labels.len() != batch {
        return Err(BendError::shape(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if batch == 0 {
        return Err(BendError::input("empty batch"));
    }
    let mut grad = Tensor2D::zeros(batch, classes);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(BendError::input(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += log_z - row[label];
        for (c, &v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            let target = if c == label { 1.0 } else { 0.0 };
            grad.set(r, c, (p - target) / batch as f64);
        }
    }
    Ok((total / batch as f64, grad))
}

/// Mean squared elementwise error and its gradient `2(pred − target)/count`.
pub fn mse_loss(pred: &Tensor2D, target: &Tensor2D) -> Result<(f64, Tensor2D)> {
    if pred.shape() != target.shape() {
        return Err(BendError::shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.data().len();
    if count == 0 {
        return Err(BendError::input("empty tensors"));
    }
    let n = count as f64;
    let mut grad = Tensor2D::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        total += d * d;
        *g = 2.0 * d / n;
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let logits = Tensor2D::zeros(4, 5);
        let (loss, _) = cross_entropy_loss(&logits, &[0, 1, 2, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_give_near_zero() {
        let logits = Tensor2D::from_rows(&[vec![50.0, -50.0], vec![-50.0, 50.0]]).unwrap();
        let (loss, _) = cross_entropy_loss(&logits, &[0, 1]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor2D::zeros(1, 3);
        assert!(matches!(cross_entropy_loss(&logits, &[3]), Err(BendError::Input(_))));
    }

    #[test]
    fn mse_basic_values() {
        let a = Tensor2D::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
        let p = Tensor2D::from_rows(&[vec![2.0]]).unwrap();
        let t = Tensor2D::from_rows(&[vec![0.0]]).unwrap();
        let (loss, grad) = mse_loss(&p, &t).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad.data(), &[4.0]);
        assert!(matches!(mse_loss(&a, &p), Err(BendError::Shape(_))));
    }
}
