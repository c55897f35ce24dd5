use crate::error::{Error, Result};

/// Equally weighted slope and duration mean squared error:
/// `0.5 * MSE(slope) + 0.5 * MSE(duration)`.
///
/// Returns the loss and its gradient with respect to each prediction.
pub fn joint_loss(preds: &[[f64; 2]], targets: &[[f64; 2]]) -> Result<(f64, Vec<[f64; 2]>)> {
    if preds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    let n = preds.len() as f64;
    let mut loss = 0.0;
    let grads = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let ds = p[0] - t[0];
            let dd = p[1] - t[1];
            loss += 0.5 * (ds * ds + dd * dd);
            [ds / n, dd / n]
        })
        .collect();
    Ok((loss / n, grads))
}
