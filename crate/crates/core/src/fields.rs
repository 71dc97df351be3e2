//! Potential fields over the local neighborhood ball and the correlation
//! function that turns potential values into kernel weights.
//!
//! A bank holds one field per output channel. Four families are supported:
//!
//! - linear: `p_k(y) = a_k · y + d_k`
//! - linear with normals: `p_k(y, n) = a_k · (y + n) + d_k`
//! - quadratic: `p_k(y) = a_k · y + b_k · y² + d_k` (element-wise square)
//! - MLP: a 3 → 8 → D′ point-wise network with leaky-ReLU hidden activation
//!
//! The correlation is the simplified Gaussian `h(p) = exp(-p²)` (σ = 1/√2,
//! μ = 0, coefficient dropped); it is fixed, not trainable.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::vec3;

/// Negative slope of the leaky-ReLU used inside the MLP potential.
pub const MLP_LEAK: f64 = 0.1;

/// Hidden width of the MLP potential.
pub const MLP_HIDDEN: usize = 8;

/// Which potential function a bank evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Linear,
    LinearNormal,
    Quadratic,
    Mlp,
}

impl FieldKind {
    pub fn needs_normals(self) -> bool {
        matches!(self, FieldKind::LinearNormal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Linear => "linear",
            FieldKind::LinearNormal => "linear_normal",
            FieldKind::Quadratic => "quadratic",
            FieldKind::Mlp => "mlp",
        }
    }
}

/// Stacked parameters of D′ potential fields, one per output channel.
///
/// The variant carries exactly the parameters its family uses, so "B present
/// iff quadratic" and "mlp parameters present iff mlp" hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldParams<T: Real> {
    Linear {
        /// D′×3 stacked direction coefficients.
        a: Array2<T>,
        /// D′ biases.
        bias: Array1<T>,
    },
    LinearNormal {
        a: Array2<T>,
        bias: Array1<T>,
    },
    Quadratic {
        a: Array2<T>,
        /// D′×3 stacked element-wise quadratic coefficients.
        b: Array2<T>,
        bias: Array1<T>,
    },
    Mlp {
        /// 8×3 first layer.
        w1: Array2<T>,
        b1: Array1<T>,
        /// D′×8 second layer.
        w2: Array2<T>,
        b2: Array1<T>,
    },
}

/// A bank of D′ potential fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBank<T: Real> {
    params: FieldParams<T>,
}

impl<T: Real> FieldBank<T> {
    pub fn linear(a: Array2<T>, bias: Array1<T>) -> Result<Self> {
        Self::check_ab(&a, None, &bias)?;
        Ok(Self { params: FieldParams::Linear { a, bias } })
    }

    pub fn linear_normal(a: Array2<T>, bias: Array1<T>) -> Result<Self> {
        Self::check_ab(&a, None, &bias)?;
        Ok(Self { params: FieldParams::LinearNormal { a, bias } })
    }

    pub fn quadratic(a: Array2<T>, b: Array2<T>, bias: Array1<T>) -> Result<Self> {
        Self::check_ab(&a, Some(&b), &bias)?;
        Ok(Self { params: FieldParams::Quadratic { a, b, bias } })
    }

    pub fn mlp(w1: Array2<T>, b1: Array1<T>, w2: Array2<T>, b2: Array1<T>) -> Result<Self> {
        if w1.nrows() != MLP_HIDDEN || w1.ncols() != 3 {
            return Err(Error::invalid(format!(
                "mlp first layer must be {MLP_HIDDEN}x3, got {}x{}",
                w1.nrows(),
                w1.ncols()
            )));
        }
        if b1.len() != MLP_HIDDEN {
            return Err(Error::invalid("mlp first bias must have hidden width"));
        }
        if w2.ncols() != MLP_HIDDEN {
            return Err(Error::invalid(format!(
                "mlp second layer must have {MLP_HIDDEN} columns, got {}",
                w2.ncols()
            )));
        }
        if b2.len() != w2.nrows() {
            return Err(Error::invalid("mlp second bias must match output width"));
        }
        let finite = w1.iter().chain(b1.iter()).chain(w2.iter()).chain(b2.iter());
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite mlp parameter"));
        }
        Ok(Self { params: FieldParams::Mlp { w1, b1, w2, b2 } })
    }

    fn check_ab(a: &Array2<T>, b: Option<&Array2<T>>, bias: &Array1<T>) -> Result<()> {
        if a.ncols() != 3 {
            return Err(Error::invalid(format!("A must have 3 columns, got {}", a.ncols())));
        }
        if bias.len() != a.nrows() {
            return Err(Error::invalid(format!(
                "bias length {} does not match {} fields",
                bias.len(),
                a.nrows()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) || !bias.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite field parameter"));
        }
        if let Some(b) = b {
            if b.dim() != a.dim() {
                return Err(Error::invalid("B must have the same shape as A"));
            }
            if !b.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("non-finite field parameter"));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> FieldKind {
        match self.params {
            FieldParams::Linear { .. } => FieldKind::Linear,
            FieldParams::LinearNormal { .. } => FieldKind::LinearNormal,
            FieldParams::Quadratic { .. } => FieldKind::Quadratic,
            FieldParams::Mlp { .. } => FieldKind::Mlp,
        }
    }

    /// Number of fields D′ (the convolution's output width).
    pub fn fields(&self) -> usize {
        match &self.params {
            FieldParams::Linear { a, .. }
            | FieldParams::LinearNormal { a, .. }
            | FieldParams::Quadratic { a, .. } => a.nrows(),
            FieldParams::Mlp { w2, .. } => w2.nrows(),
        }
    }

    pub fn params(&self) -> &FieldParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut FieldParams<T> {
        &mut self.params
    }

    fn kind_error(&self, wanted: FieldKind) -> Error {
        Error::invalid(format!(
            "field bank is {}, not {}",
            self.kind().as_str(),
            wanted.as_str()
        ))
    }

    /// Linear potentials: `p_k = a_k · y + d_k`, one value per field.
    pub fn eval_linear(&self, y: [T; 3]) -> Result<Vec<T>> {
        let FieldParams::Linear { a, bias } = &self.params else {
            return Err(self.kind_error(FieldKind::Linear));
        };
        Ok(linear_scalar(a, bias, y))
    }

    /// Normal-augmented potentials: `p_k = a_k · (y + n) + d_k`.
    pub fn eval_linear_normal(&self, y: [T; 3], normal: [T; 3]) -> Result<Vec<T>> {
        let FieldParams::LinearNormal { a, bias } = &self.params else {
            return Err(self.kind_error(FieldKind::LinearNormal));
        };
        Ok(linear_scalar(a, bias, vec3::add(y, normal)))
    }

    /// Quadratic potentials: `p_k = a_k · y + b_k · y² + d_k`.
    pub fn eval_quadratic(&self, y: [T; 3]) -> Result<Vec<T>> {
        let FieldParams::Quadratic { a, b, bias } = &self.params else {
            return Err(self.kind_error(FieldKind::Quadratic));
        };
        let y2 = [y[0] * y[0], y[1] * y[1], y[2] * y[2]];
        let mut out = Vec::with_capacity(a.nrows());
        for k in 0..a.nrows() {
            let mut p = bias[k];
            for c in 0..3 {
                p += a[[k, c]] * y[c] + b[[k, c]] * y2[c];
            }
            out.push(p);
        }
        Ok(out)
    }

    /// MLP potentials: `p = W₂ · leaky(W₁ y + c₁) + c₂`.
    pub fn eval_mlp(&self, y: [T; 3]) -> Result<Vec<T>> {
        let FieldParams::Mlp { w1, b1, w2, b2 } = &self.params else {
            return Err(self.kind_error(FieldKind::Mlp));
        };
        let leak = T::of(MLP_LEAK);
        let mut hidden = [T::zero(); MLP_HIDDEN];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut z = b1[j];
            for c in 0..3 {
                z += w1[[j, c]] * y[c];
            }
            *h = if z > T::zero() { z } else { leak * z };
        }
        let mut out = Vec::with_capacity(w2.nrows());
        for k in 0..w2.nrows() {
            let mut p = b2[k];
            for (j, h) in hidden.iter().enumerate() {
                p += w2[[k, j]] * *h;
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Potential values for one point, dispatching on the bank's family.
    pub fn eval_point(&self, y: [T; 3], normal: Option<[T; 3]>) -> Result<Vec<T>> {
        match self.kind() {
            FieldKind::Linear => self.eval_linear(y),
            FieldKind::LinearNormal => {
                let n = normal.ok_or_else(|| {
                    Error::invalid("normal-augmented field requires a normal per point")
                })?;
                self.eval_linear_normal(y, n)
            }
            FieldKind::Quadratic => self.eval_quadratic(y),
            FieldKind::Mlp => self.eval_mlp(y),
        }
    }

    /// Batched potential values for K points: a K×D′ matrix.
    ///
    /// This is the parallel matrix form of the per-point evaluations; the
    /// per-point loops above serve as its oracle in tests.
    pub fn eval_potentials(
        &self,
        local: ArrayView2<T>,
        normals: Option<ArrayView2<T>>,
    ) -> Result<Array2<T>> {
        if local.ncols() != 3 {
            return Err(Error::invalid(format!(
                "local coordinates must be K x 3, got K x {}",
                local.ncols()
            )));
        }
        if let Some(n) = normals {
            if n.dim() != local.dim() {
                return Err(Error::invalid("normals must match local coordinate shape"));
            }
        }
        match &self.params {
            FieldParams::Linear { a, bias } => Ok(local.dot(&a.t()) + bias),
            FieldParams::LinearNormal { a, bias } => {
                let n = normals.ok_or_else(|| {
                    Error::invalid("normal-augmented field requires per-point normals")
                })?;
                let shifted = &local + &n;
                Ok(shifted.dot(&a.t()) + bias)
            }
            FieldParams::Quadratic { a, b, bias } => {
                let sq = local.mapv(|v| v * v);
                Ok(local.dot(&a.t()) + sq.dot(&b.t()) + bias)
            }
            FieldParams::Mlp { w1, b1, w2, b2 } => {
                let leak = T::of(MLP_LEAK);
                let mut z = local.dot(&w1.t());
                z += b1;
                let hidden = z.mapv(|v| if v > T::zero() { v } else { leak * v });
                let mut p = hidden.dot(&w2.t());
                p += b2;
                Ok(p)
            }
        }
    }

    /// Batched correlation matrix `H[i, k] = h(p̃_k(y_i))`, each entry in (0, 1].
    pub fn eval_batched(
        &self,
        local: ArrayView2<T>,
        normals: Option<ArrayView2<T>>,
    ) -> Result<Array2<T>> {
        Ok(self.eval_potentials(local, normals)?.mapv(correlation))
    }

    /// Index of the most correlated field per point (ties to the lowest k).
    pub fn argmax_field(
        &self,
        local: ArrayView2<T>,
        normals: Option<ArrayView2<T>>,
    ) -> Result<Vec<usize>> {
        let h = self.eval_batched(local, normals)?;
        Ok(h.axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                let mut best_v = row[0];
                for (k, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best_v = v;
                        best = k;
                    }
                }
                best
            })
            .collect())
    }
}

fn linear_scalar<T: Real>(a: &Array2<T>, bias: &Array1<T>, x: [T; 3]) -> Vec<T> {
    (0..a.nrows())
        .map(|k| a[[k, 0]] * x[0] + a[[k, 1]] * x[1] + a[[k, 2]] * x[2] + bias[k])
        .collect()
}

/// Correlation function `h(p) = exp(-p²)`, the simplified Gaussian with
/// σ = 1/√2, μ = 0, and the normalization coefficient dropped.
#[inline]
pub fn correlation<T: Real>(p: T) -> T {
    (-p * p).exp()
}

/// Correlation value and its derivative `dh/dp = -2 p exp(-p²)`.
#[inline]
pub fn correlation_with_grad<T: Real>(p: T) -> (T, T) {
    let h = correlation(p);
    (h, T::of(-2.0) * p * h)
}
