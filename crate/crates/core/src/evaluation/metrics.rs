use crate::error::EvalError;

fn check<T, U>(truth: &[T], predicted: &[U]) -> Result<(), EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::Length {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Confusion counts `(tp, tn, fp, fn)`.
pub fn confusion(truth: &[bool], predicted: &[bool]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => c.0 += 1,
            (false, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (true, false) => c.3 += 1,
        }
    }
    c
}

/// (TP + TN) / (P + N)
pub fn accuracy(truth: &[bool], predicted: &[bool]) -> Result<f64, EvalError> {
    check(truth, predicted)?;
    let (tp, tn, _, _) = confusion(truth, predicted);
    Ok((tp + tn) as f64 / truth.len() as f64)
}

/// 2TP / (2TP + FP + FN). With no positives in either vector the score is
/// defined as 1.
pub fn f1(truth: &[bool], predicted: &[bool]) -> Result<f64, EvalError> {
    check(truth, predicted)?;
    let (tp, _, fp, fn_) = confusion(truth, predicted);
    let denom = 2 * tp + fp + fn_;
    Ok(if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    })
}

pub fn mae(truth: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check(truth, predicted)?;
    let sum: f64 = truth.iter().zip(predicted).map(|(y, p)| (p - y).abs()).sum();
    Ok(sum / truth.len() as f64)
}

pub fn rmse(truth: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check(truth, predicted)?;
    let sum: f64 = truth.iter().zip(predicted).map(|(y, p)| (p - y).powi(2)).sum();
    Ok((sum / truth.len() as f64).sqrt())
}
