//! Per-channel batch normalization over the point dimension.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::real::Real;

const EPS: f64 = 1e-5;
const MOMENTUM: f64 = 0.9;

#[derive(Debug)]
pub struct BatchNormTape<T: Real> {
    normalized: Array2<T>,
    inv_std: Array1<T>,
}

/// Batch norm over N×D features: train mode normalizes with batch statistics
/// (ε = 1e-5) and blends them into the running stats with momentum 0.9; eval
/// mode uses the running stats. Scale and shift are learnable per channel.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T: Real> {
    gamma: Array1<T>,
    beta: Array1<T>,
    running_mean: Array1<T>,
    running_var: Array1<T>,
    grad_gamma: Array1<T>,
    grad_beta: Array1<T>,
}

impl<T: Real> BatchNorm1d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            grad_gamma: Array1::zeros(channels),
            grad_beta: Array1::zeros(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check_width(&self, features: &Array2<T>) -> Result<()> {
        if features.ncols() != self.channels() {
            return Err(Error::invalid(format!(
                "features have {} channels, batch norm expects {}",
                features.ncols(),
                self.channels()
            )));
        }
        Ok(())
    }

    /// Training-mode forward: batch statistics, running-stat update.
    pub fn forward_train(
        &mut self,
        features: &Array2<T>,
    ) -> Result<(Array2<T>, BatchNormTape<T>)> {
        self.check_width(features)?;
        let n = features.nrows();
        if n == 0 {
            return Err(Error::invalid("batch norm needs at least one row in train mode"));
        }
        let inv_n = T::one() / T::of(n as f64);
        let mean = features.sum_axis(Axis(0)) * inv_n;
        let centered = features - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) * inv_n;
        let inv_std = var.mapv(|v| T::one() / (v + T::of(EPS)).sqrt());

        let normalized = &centered * &inv_std;
        let out = &normalized * &self.gamma + &self.beta;

        let m = T::of(MOMENTUM);
        let one_minus = T::one() - m;
        self.running_mean = &self.running_mean * m + &(mean * one_minus);
        self.running_var = &self.running_var * m + &(var * one_minus);

        Ok((out, BatchNormTape { normalized, inv_std }))
    }

    /// Eval-mode forward using running statistics; never mutates.
    pub fn forward_eval(&self, features: &Array2<T>) -> Result<Array2<T>> {
        self.check_width(features)?;
        let inv_std = self.running_var.mapv(|v| T::one() / (v + T::of(EPS)).sqrt());
        let normalized = (features - &self.running_mean) * &inv_std;
        Ok(&normalized * &self.gamma + &self.beta)
    }

    /// Inference forward normalizing with the statistics of the given rows,
    /// without touching the running stats. Hosts that feed one cloud at a
    /// time use this so inference sees the same statistics training did.
    pub fn forward_instance(&self, features: &Array2<T>) -> Result<Array2<T>> {
        self.check_width(features)?;
        let n = features.nrows();
        if n == 0 {
            return Err(Error::invalid("batch norm needs at least one row"));
        }
        let inv_n = T::one() / T::of(n as f64);
        let mean = features.sum_axis(Axis(0)) * inv_n;
        let centered = features - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) * inv_n;
        let inv_std = var.mapv(|v| T::one() / (v + T::of(EPS)).sqrt());
        let normalized = centered * &inv_std;
        Ok(&normalized * &self.gamma + &self.beta)
    }

    pub fn backward(&mut self, tape: BatchNormTape<T>, dout: &Array2<T>) -> Result<Array2<T>> {
        if dout.dim() != tape.normalized.dim() {
            return Err(Error::structural("upstream gradient does not match tape"));
        }
        let n = dout.nrows();
        let inv_n = T::one() / T::of(n as f64);

        self.grad_gamma = &self.grad_gamma + &(dout * &tape.normalized).sum_axis(Axis(0));
        self.grad_beta = &self.grad_beta + &dout.sum_axis(Axis(0));

        let dxhat = dout * &self.gamma;
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &tape.normalized).sum_axis(Axis(0));
        // dX = inv_std/N · (N·dx̂ − Σdx̂ − x̂·Σ(dx̂⊙x̂))
        let mut dx = dxhat * T::of(n as f64);
        dx -= &sum_dxhat;
        dx -= &(&tape.normalized * &sum_dxhat_xhat);
        dx = dx * &tape.inv_std * inv_n;
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.grad_gamma.fill(T::zero());
        self.grad_beta.fill(T::zero());
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(super::ParamSlot<'_, T>)) {
        f(super::ParamSlot {
            key: format!("{prefix}.gamma"),
            value: self.gamma.as_slice_mut().unwrap(),
            grad: Some(self.grad_gamma.as_slice_mut().unwrap()),
            decay: false,
        });
        f(super::ParamSlot {
            key: format!("{prefix}.beta"),
            value: self.beta.as_slice_mut().unwrap(),
            grad: Some(self.grad_beta.as_slice_mut().unwrap()),
            decay: false,
        });
        f(super::ParamSlot {
            key: format!("{prefix}.running_mean"),
            value: self.running_mean.as_slice_mut().unwrap(),
            grad: None,
            decay: false,
        });
        f(super::ParamSlot {
            key: format!("{prefix}.running_var"),
            value: self.running_var.as_slice_mut().unwrap(),
            grad: None,
            decay: false,
        });
    }
}
