//! Global max pooling over the point dimension.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug)]
pub struct PoolTape {
    /// Winning row per channel (ties go to the lower row).
    pub argmax: Vec<usize>,
    rows: usize,
}

/// Reduces N×D features to a D-vector of per-channel maxima.
pub fn max_pool_global<T: Real>(features: &Array2<T>) -> Result<(Array1<T>, PoolTape)> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::invalid("cannot max-pool zero points"));
    }
    let d = features.ncols();
    let mut out = Array1::zeros(d);
    let mut argmax = vec![0usize; d];
    for c in 0..d {
        let mut best = features[[0, c]];
        let mut best_r = 0;
        for r in 1..n {
            let v = features[[r, c]];
            if v > best {
                best = v;
                best_r = r;
            }
        }
        out[c] = best;
        argmax[c] = best_r;
    }
    Ok((out, PoolTape { argmax, rows: n }))
}

/// Routes the upstream gradient to each channel's argmax row only.
pub fn max_pool_global_backward<T: Real>(tape: PoolTape, dout: &Array1<T>) -> Result<Array2<T>> {
    if dout.len() != tape.argmax.len() {
        return Err(Error::structural("upstream gradient does not match tape"));
    }
    let mut dx = Array2::zeros((tape.rows, dout.len()));
    for (c, &r) in tape.argmax.iter().enumerate() {
        dx[[r, c]] = dout[c];
    }
    Ok(dx)
}
