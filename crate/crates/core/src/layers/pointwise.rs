//! Point-wise (1×1) convolution: an affine map applied independently to every
//! point's feature row.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug)]
pub struct PointwiseTape<T: Real> {
    input: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct PointwiseConv<T: Real> {
    w: Array2<T>,
    bias: Option<Array1<T>>,
    grad_w: Array2<T>,
    grad_bias: Option<Array1<T>>,
}

impl<T: Real> PointwiseConv<T> {
    /// `w` maps input width (columns) to output width (rows).
    pub fn new(w: Array2<T>, bias: Option<Array1<T>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != w.nrows() {
                return Err(Error::invalid(format!(
                    "bias length {} does not match output width {}",
                    b.len(),
                    w.nrows()
                )));
            }
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite weight"));
        }
        let grad_w = Array2::zeros(w.dim());
        let grad_bias = bias.as_ref().map(|b| Array1::zeros(b.len()));
        Ok(Self { w, bias, grad_w, grad_bias })
    }

    pub fn weight(&self) -> &Array2<T> {
        &self.w
    }

    pub fn input_width(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.w.nrows()
    }

    /// `out = F · Wᵀ + bias`. Empty inputs yield empty outputs.
    pub fn forward(&self, features: &Array2<T>) -> Result<(Array2<T>, PointwiseTape<T>)> {
        if features.ncols() != self.w.ncols() {
            return Err(Error::invalid(format!(
                "features have width {}, weight expects {}",
                features.ncols(),
                self.w.ncols()
            )));
        }
        let mut out = features.dot(&self.w.t());
        if let Some(b) = &self.bias {
            out += b;
        }
        Ok((out, PointwiseTape { input: features.clone() }))
    }

    pub fn backward(&mut self, tape: PointwiseTape<T>, dout: &Array2<T>) -> Result<Array2<T>> {
        if dout.dim() != (tape.input.nrows(), self.w.nrows()) {
            return Err(Error::structural(format!(
                "upstream gradient is {:?}, expected ({}, {})",
                dout.dim(),
                tape.input.nrows(),
                self.w.nrows()
            )));
        }
        self.grad_w = &self.grad_w + &dout.t().dot(&tape.input);
        if let Some(gb) = &mut self.grad_bias {
            *gb = &*gb + &dout.sum_axis(Axis(0));
        }
        Ok(dout.dot(&self.w))
    }

    pub fn zero_grads(&mut self) {
        self.grad_w.fill(T::zero());
        if let Some(gb) = &mut self.grad_bias {
            gb.fill(T::zero());
        }
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(super::ParamSlot<'_, T>)) {
        f(super::ParamSlot {
            key: format!("{prefix}.w"),
            value: self.w.as_slice_mut().unwrap(),
            grad: Some(self.grad_w.as_slice_mut().unwrap()),
            decay: true,
        });
        if let (Some(b), Some(gb)) = (&mut self.bias, &mut self.grad_bias) {
            f(super::ParamSlot {
                key: format!("{prefix}.bias"),
                value: b.as_slice_mut().unwrap(),
                grad: Some(gb.as_slice_mut().unwrap()),
                decay: false,
            });
        }
    }
}
