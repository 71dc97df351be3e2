//! Softmax cross-entropy over logit rows.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::real::Real;

/// Mean cross-entropy over rows plus the gradient with respect to the logits.
/// Labels index the columns; any label outside the class range is rejected.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Array2<T>,
    labels: &[usize],
) -> Result<(T, Array2<T>)> {
    let (rows, classes) = logits.dim();
    if rows == 0 {
        return Err(Error::invalid("empty logit matrix"));
    }
    if labels.len() != rows {
        return Err(Error::invalid(format!(
            "{} labels for {} logit rows",
            labels.len(),
            rows
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let inv_rows = T::one() / T::of(rows as f64);
    let mut grad = Array2::zeros((rows, classes));
    let mut loss = T::zero();
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for &v in row.iter() {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln();
        loss += -(row[label] - max - log_denom);
        for c in 0..classes {
            let softmax = (row[c] - max).exp() / denom;
            let target = if c == label { T::one() } else { T::zero() };
            grad[[r, c]] = (softmax - target) * inv_rows;
        }
    }
    Ok((loss * inv_rows, grad))
}

/// Row-wise argmax with ties to the lowest column.
pub fn argmax_rows<T: Real>(values: &Array2<T>) -> Vec<usize> {
    values
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = row[0];
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            best
        })
        .collect()
}
