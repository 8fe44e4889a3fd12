use crate::error::{Error, Result};

/// Huber loss averaged over elements, and the derivative of each element's
/// loss with respect to its prediction (clipped to `[-delta, delta]`).
pub fn huber_loss(pred: &[f64], target: &[f64], delta: f64) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("huber delta must be positive, got {delta}")));
    }
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            if e.abs() <= delta {
                total += 0.5 * e * e;
                e
            } else {
                total += delta * (e.abs() - 0.5 * delta);
                delta * e.signum()
            }
        })
        .collect();
    let loss = if pred.is_empty() { 0.0 } else { total / pred.len() as f64 };
    Ok((loss, grad))
}
