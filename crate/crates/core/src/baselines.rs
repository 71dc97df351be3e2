//! Discrete and continuous convolution baselines.
//!
//! Both expose the same `(geometry, features) -> (Q×D′, tape)` interface as
//! the potential convolution so the host network can swap kernel families.
//!
//! - Discrete: a rigid arrangement of kernel points, each carrying its own
//!   D′×D weight matrix; a neighbor contributes through the linear
//!   correlation `h_d(y, x_m) = max(0, 1 − ‖y − x_m‖ / σ_d)`. Kernel
//!   positions and the influence radius are fixed, not trained.
//! - Continuous: a small MLP (3 → 16 → D′·D) regresses a full weight matrix
//!   from each neighbor's local coordinates.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::layers::{LocalGeometry, ParamSlot};
use crate::real::Real;
use crate::vec3;

/// Hidden width of the continuous kernel's weight-regressing MLP.
pub const CONTINUOUS_HIDDEN: usize = 16;

/// Negative slope shared with the rest of the stack.
const LEAK: f64 = 0.1;

/// Fixed kernel-point dispositions: the origin plus, for larger arrangements,
/// shells of a regular polyhedron scaled to 0.66·r.
///
/// Supported counts: 1 (origin), 7 (origin + octahedron), 15 (origin +
/// octahedron + cube corners).
pub fn make_rigid_dispositions<T: Real>(m: usize, r: T) -> Result<Vec<[T; 3]>> {
    if !(r > T::zero()) {
        return Err(Error::invalid("kernel radius must be positive"));
    }
    let shell = T::of(0.66) * r;
    let mut pts: Vec<[T; 3]> = vec![[T::zero(); 3]];
    if m == 1 {
        return Ok(pts);
    }
    let octa: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    for v in octa {
        pts.push([T::of(v[0]) * shell, T::of(v[1]) * shell, T::of(v[2]) * shell]);
    }
    if m == 7 {
        return Ok(pts);
    }
    if m == 15 {
        let s = 1.0 / 3.0f64.sqrt();
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    pts.push([
                        T::of(sx * s) * shell,
                        T::of(sy * s) * shell,
                        T::of(sz * s) * shell,
                    ]);
                }
            }
        }
        return Ok(pts);
    }
    Err(Error::invalid(format!(
        "unsupported kernel point count {m}; supported: 1, 7, 15"
    )))
}

/// Rigid kernel points with per-point weight matrices and a linear
/// correlation of influence σ_d.
#[derive(Debug, Clone)]
pub struct DiscreteConv<T: Real> {
    kernel_points: Vec<[T; 3]>,
    weights: Vec<Array2<T>>,
    influence: T,
    grad_weights: Vec<Array2<T>>,
}

#[derive(Debug)]
pub struct DiscreteTape<T: Real> {
    gathered: Array2<T>,
    corr: Array2<T>,
    summed: Vec<Array2<T>>,
    rows: usize,
}

impl<T: Real> DiscreteConv<T> {
    pub fn new(kernel_points: Vec<[T; 3]>, weights: Vec<Array2<T>>, influence: T) -> Result<Self> {
        if kernel_points.is_empty() || kernel_points.len() != weights.len() {
            return Err(Error::invalid(
                "need one weight matrix per kernel point, at least one point",
            ));
        }
        if !(influence > T::zero()) {
            return Err(Error::invalid("influence must be positive"));
        }
        let dim = weights[0].dim();
        for w in &weights {
            if w.dim() != dim {
                return Err(Error::invalid("all kernel weights must share one shape"));
            }
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("non-finite kernel weight"));
            }
        }
        let grad_weights = weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        Ok(Self { kernel_points, weights, influence, grad_weights })
    }

    pub fn kernel_points(&self) -> &[[T; 3]] {
        &self.kernel_points
    }

    pub fn input_width(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weights[0].nrows()
    }

    fn correlations(&self, geo: &LocalGeometry<T>) -> Array2<T> {
        let rows = geo.rows();
        let m = self.kernel_points.len();
        let mut corr = Array2::zeros((rows, m));
        let local = geo.local();
        for r in 0..rows {
            let y = [local[[r, 0]], local[[r, 1]], local[[r, 2]]];
            for (j, kp) in self.kernel_points.iter().enumerate() {
                let d = vec3::norm(vec3::sub(y, *kp));
                let h = T::one() - d / self.influence;
                if h > T::zero() {
                    corr[[r, j]] = h;
                }
            }
        }
        corr
    }

    /// `out[q] = Σ_i Σ_m h_d(y_i, x_m) · W_m f_i`
    pub fn forward(
        &self,
        geo: &LocalGeometry<T>,
        features: &Array2<T>,
    ) -> Result<(Array2<T>, DiscreteTape<T>)> {
        if features.ncols() != self.input_width() {
            return Err(Error::invalid(format!(
                "features have width {}, kernel expects {}",
                features.ncols(),
                self.input_width()
            )));
        }
        let gathered = geo.gather_features(features)?;
        let corr = self.correlations(geo);
        let q_count = geo.queries();
        let d_in = self.input_width();
        let mut out = Array2::zeros((q_count, self.output_width()));
        let mut summed = Vec::with_capacity(self.kernel_points.len());
        for (j, w) in self.weights.iter().enumerate() {
            // Per-query correlation-weighted feature sums for this kernel point.
            let mut s = Array2::zeros((q_count, d_in));
            for q in 0..q_count {
                for r in geo.segment(q) {
                    let c = corr[[r, j]];
                    if c == T::zero() {
                        continue;
                    }
                    let mut row = s.row_mut(q);
                    row.scaled_add(c, &gathered.row(r));
                }
            }
            out = out + s.dot(&w.t());
            summed.push(s);
        }
        let tape = DiscreteTape { gathered, corr, summed, rows: geo.rows() };
        Ok((out, tape))
    }

    pub fn backward(
        &mut self,
        geo: &LocalGeometry<T>,
        tape: DiscreteTape<T>,
        dout: &Array2<T>,
    ) -> Result<Array2<T>> {
        if tape.rows != geo.rows() {
            return Err(Error::structural("tape does not match this geometry"));
        }
        if dout.dim() != (geo.queries(), self.output_width()) {
            return Err(Error::structural("upstream gradient shape mismatch"));
        }
        let mut dgathered: Array2<T> = Array2::zeros(tape.gathered.dim());
        for (j, w) in self.weights.iter().enumerate() {
            self.grad_weights[j] = &self.grad_weights[j] + &dout.t().dot(&tape.summed[j]);
            let ds = dout.dot(w); // Q×D
            for q in 0..geo.queries() {
                for r in geo.segment(q) {
                    let c = tape.corr[[r, j]];
                    if c == T::zero() {
                        continue;
                    }
                    let mut row = dgathered.row_mut(r);
                    row.scaled_add(c, &ds.row(q));
                }
            }
        }
        Ok(geo.scatter_features(&dgathered))
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grad_weights {
            g.fill(T::zero());
        }
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        for (j, (w, g)) in self.weights.iter_mut().zip(&mut self.grad_weights).enumerate() {
            f(ParamSlot {
                key: format!("{prefix}.w{j}"),
                value: w.as_slice_mut().unwrap(),
                grad: Some(g.as_slice_mut().unwrap()),
                decay: true,
            });
        }
    }
}

/// MLP that regresses a D′×D weight matrix from each neighbor's coordinates.
#[derive(Debug, Clone)]
pub struct ContinuousConv<T: Real> {
    w1: Array2<T>,
    b1: Array1<T>,
    w2: Array2<T>,
    b2: Array1<T>,
    d_in: usize,
    d_out: usize,
    grad_w1: Array2<T>,
    grad_b1: Array1<T>,
    grad_w2: Array2<T>,
    grad_b2: Array1<T>,
}

#[derive(Debug)]
pub struct ContinuousTape<T: Real> {
    gathered: Array2<T>,
    hidden_pre: Array2<T>,
    regressed: Array2<T>,
    rows: usize,
}

impl<T: Real> ContinuousConv<T> {
    pub fn new(
        w1: Array2<T>,
        b1: Array1<T>,
        w2: Array2<T>,
        b2: Array1<T>,
        d_in: usize,
        d_out: usize,
    ) -> Result<Self> {
        if w1.dim() != (CONTINUOUS_HIDDEN, 3) || b1.len() != CONTINUOUS_HIDDEN {
            return Err(Error::invalid(format!(
                "first layer must be {CONTINUOUS_HIDDEN}x3 with matching bias"
            )));
        }
        if w2.dim() != (d_in * d_out, CONTINUOUS_HIDDEN) || b2.len() != d_in * d_out {
            return Err(Error::invalid(
                "second layer must map hidden width to D'·D weight entries",
            ));
        }
        let all_finite = w1
            .iter()
            .chain(b1.iter())
            .chain(w2.iter())
            .chain(b2.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("non-finite kernel parameter"));
        }
        Ok(Self {
            grad_w1: Array2::zeros(w1.dim()),
            grad_b1: Array1::zeros(b1.len()),
            grad_w2: Array2::zeros(w2.dim()),
            grad_b2: Array1::zeros(b2.len()),
            w1,
            b1,
            w2,
            b2,
            d_in,
            d_out,
        })
    }

    pub fn input_width(&self) -> usize {
        self.d_in
    }

    pub fn output_width(&self) -> usize {
        self.d_out
    }

    /// `out[q] = Σ_i reshape(mlp(y_i), D′×D) · f_i`
    pub fn forward(
        &self,
        geo: &LocalGeometry<T>,
        features: &Array2<T>,
    ) -> Result<(Array2<T>, ContinuousTape<T>)> {
        if features.ncols() != self.d_in {
            return Err(Error::invalid(format!(
                "features have width {}, kernel expects {}",
                features.ncols(),
                self.d_in
            )));
        }
        let gathered = geo.gather_features(features)?;
        let leak = T::of(LEAK);
        let mut hidden_pre = geo.local().dot(&self.w1.t());
        hidden_pre += &self.b1;
        let hidden = hidden_pre.mapv(|v| if v > T::zero() { v } else { leak * v });
        let mut regressed = hidden.dot(&self.w2.t());
        regressed += &self.b2;

        let mut out = Array2::zeros((geo.queries(), self.d_out));
        for q in 0..geo.queries() {
            let mut orow = out.row_mut(q);
            let o = orow.as_slice_mut().expect("row is contiguous");
            for r in geo.segment(q) {
                let w = regressed.row(r);
                let w = w.as_slice().expect("row is contiguous");
                let g = gathered.row(r);
                let g = g.as_slice().expect("row is contiguous");
                for (k, chunk) in w.chunks_exact(self.d_in).enumerate() {
                    let mut acc = T::zero();
                    for (a, b) in chunk.iter().zip(g) {
                        acc += *a * *b;
                    }
                    o[k] += acc;
                }
            }
        }
        let tape = ContinuousTape { gathered, hidden_pre, regressed, rows: geo.rows() };
        Ok((out, tape))
    }

    pub fn backward(
        &mut self,
        geo: &LocalGeometry<T>,
        tape: ContinuousTape<T>,
        dout: &Array2<T>,
    ) -> Result<Array2<T>> {
        if tape.rows != geo.rows() {
            return Err(Error::structural("tape does not match this geometry"));
        }
        if dout.dim() != (geo.queries(), self.d_out) {
            return Err(Error::structural("upstream gradient shape mismatch"));
        }
        let rows = geo.rows();
        let mut dregressed = Array2::zeros((rows, self.d_out * self.d_in));
        let mut dgathered: Array2<T> = Array2::zeros((rows, self.d_in));
        for q in 0..geo.queries() {
            let dout_row = dout.row(q);
            let go_all = dout_row.as_slice().expect("row is contiguous");
            for r in geo.segment(q) {
                let g_row = tape.gathered.row(r);
                let g = g_row.as_slice().expect("row is contiguous");
                let w_row = tape.regressed.row(r);
                let w = w_row.as_slice().expect("row is contiguous");
                let mut dw_row = dregressed.row_mut(r);
                let dw = dw_row.as_slice_mut().expect("row is contiguous");
                let mut dg_row = dgathered.row_mut(r);
                let dg = dg_row.as_slice_mut().expect("row is contiguous");
                for (k, &go) in go_all.iter().enumerate() {
                    let base = k * self.d_in;
                    for d in 0..self.d_in {
                        dw[base + d] = go * g[d];
                        dg[d] += go * w[base + d];
                    }
                }
            }
        }

        let leak = T::of(LEAK);
        let hidden = tape.hidden_pre.mapv(|v| if v > T::zero() { v } else { leak * v });
        self.grad_w2 = &self.grad_w2 + &dregressed.t().dot(&hidden);
        self.grad_b2 = &self.grad_b2 + &dregressed.sum_axis(Axis(0));
        let mut dhidden = dregressed.dot(&self.w2);
        dhidden.zip_mut_with(&tape.hidden_pre, |g, &z| {
            if z <= T::zero() {
                *g *= leak;
            }
        });
        self.grad_w1 = &self.grad_w1 + &dhidden.t().dot(geo.local());
        self.grad_b1 = &self.grad_b1 + &dhidden.sum_axis(Axis(0));
        Ok(geo.scatter_features(&dgathered))
    }

    pub fn zero_grads(&mut self) {
        self.grad_w1.fill(T::zero());
        self.grad_b1.fill(T::zero());
        self.grad_w2.fill(T::zero());
        self.grad_b2.fill(T::zero());
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        f(ParamSlot {
            key: format!("{prefix}.mlp_w1"),
            value: self.w1.as_slice_mut().unwrap(),
            grad: Some(self.grad_w1.as_slice_mut().unwrap()),
            decay: true,
        });
        f(ParamSlot {
            key: format!("{prefix}.mlp_b1"),
            value: self.b1.as_slice_mut().unwrap(),
            grad: Some(self.grad_b1.as_slice_mut().unwrap()),
            decay: false,
        });
        f(ParamSlot {
            key: format!("{prefix}.mlp_w2"),
            value: self.w2.as_slice_mut().unwrap(),
            grad: Some(self.grad_w2.as_slice_mut().unwrap()),
            decay: true,
        });
        f(ParamSlot {
            key: format!("{prefix}.mlp_b2"),
            value: self.b2.as_slice_mut().unwrap(),
            grad: Some(self.grad_b2.as_slice_mut().unwrap()),
            decay: false,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{radius_neighbors, PointCloud};
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dispositions_single_point_is_origin() {
        let pts = make_rigid_dispositions::<f64>(1, 0.5).unwrap();
        assert_eq!(pts, vec![[0.0; 3]]);
    }

    #[test]
    fn dispositions_shell_radius_is_066r() {
        let r = 0.8;
        let pts = make_rigid_dispositions::<f64>(15, r).unwrap();
        assert_eq!(pts.len(), 15);
        for p in &pts[1..] {
            let d = vec3::norm(*p);
            assert!((d - 0.66 * r).abs() < 1e-9, "shell point at distance {d}");
        }
    }

    #[test]
    fn dispositions_are_deterministic_and_validate_m() {
        let a = make_rigid_dispositions::<f64>(15, 1.0).unwrap();
        let b = make_rigid_dispositions::<f64>(15, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(make_rigid_dispositions::<f64>(4, 1.0).is_err());
    }

    fn self_only_geometry() -> (PointCloud<f64>, Vec<[f64; 3]>, LocalGeometry<f64>) {
        let cloud = PointCloud::new(vec![[0.2, 0.1, -0.3]]).unwrap();
        let queries = vec![[0.2, 0.1, -0.3]];
        let nbrs = radius_neighbors(&cloud, &queries, 1.0, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        (cloud, queries, geo)
    }

    #[test]
    fn neighbor_on_kernel_point_contributes_exactly_wf() {
        // The self neighbor (y = 0) hits the center kernel point with h = 1;
        // a second kernel point sits out of reach.
        let (_, _, geo) = self_only_geometry();
        let kp = vec![[0.0, 0.0, 0.0], [0.9, 0.0, 0.0]];
        let w0 = array![[2.0, -1.0], [0.5, 0.25]];
        let w1 = array![[100.0, 100.0], [100.0, 100.0]];
        let conv = DiscreteConv::new(kp, vec![w0.clone(), w1], 0.15).unwrap();
        let f = array![[1.0, 3.0]];
        let (out, _) = conv.forward(&geo, &f).unwrap();
        let expect = w0.dot(&f.row(0));
        assert!((out[[0, 0]] - expect[0]).abs() < 1e-12);
        assert!((out[[0, 1]] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn all_neighbors_outside_influence_give_zero() {
        // Kernel shell far from the only neighbor: the coverage failure mode.
        let (_, _, geo) = self_only_geometry();
        let kp = vec![[0.5, 0.0, 0.0]];
        let w = array![[2.0, -1.0], [0.5, 0.25]];
        let conv = DiscreteConv::new(kp, vec![w], 0.1).unwrap();
        let f = array![[1.0, 3.0]];
        let (out, _) = conv.forward(&geo, &f).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn discrete_output_is_continuous_off_the_kink_set() {
        let base = [0.05f64, 0.07, -0.02];
        let make = |p: [f64; 3]| {
            let cloud = PointCloud::new(vec![[0.0; 3], p]).unwrap();
            let queries = vec![[0.0, 0.0, 0.0]];
            let nbrs = radius_neighbors(&cloud, &queries, 1.0, None).unwrap();
            LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap()
        };
        let kp = make_rigid_dispositions::<f64>(15, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ws: Vec<Array2<f64>> = (0..15)
            .map(|_| Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.0..1.0)))
            .collect();
        let conv = DiscreteConv::new(kp, ws, 0.09).unwrap();
        let f = array![[1.0, -2.0], [0.5, 0.7]];
        let (out_a, _) = conv.forward(&make(base), &f).unwrap();
        let eps = 1e-6;
        let (out_b, _) = conv
            .forward(&make([base[0] + eps, base[1], base[2]]), &f)
            .unwrap();
        // Away from the kinks the correlation has slope ≤ 1/σ_d, so the output
        // moves by O(eps); a loose Lipschitz bound suffices.
        for (a, b) in out_a.iter().zip(out_b.iter()) {
            assert!((a - b).abs() < 1e-3, "jump {} exceeds continuity bound", (a - b).abs());
        }
    }

    #[test]
    fn continuous_zero_output_layer_gives_zero_features() {
        let (_, _, geo) = self_only_geometry();
        let conv = ContinuousConv::new(
            Array2::from_elem((CONTINUOUS_HIDDEN, 3), 0.3),
            Array1::from_elem(CONTINUOUS_HIDDEN, 0.1),
            Array2::zeros((2 * 2, CONTINUOUS_HIDDEN)),
            Array1::zeros(2 * 2),
            2,
            2,
        )
        .unwrap();
        let f = array![[1.0, 3.0]];
        let (out, _) = conv.forward(&geo, &f).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn continuous_single_neighbor_matches_reshaped_mlp() {
        let (_, _, geo) = self_only_geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w1 = Array2::from_shape_fn((CONTINUOUS_HIDDEN, 3), |_| rng.random_range(-1.0..1.0));
        let b1 = Array1::from_shape_fn(CONTINUOUS_HIDDEN, |_| rng.random_range(-1.0..1.0));
        let w2 = Array2::from_shape_fn((6, CONTINUOUS_HIDDEN), |_| rng.random_range(-1.0..1.0));
        let b2 = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
        let conv = ContinuousConv::new(w1.clone(), b1.clone(), w2.clone(), b2.clone(), 2, 3)
            .unwrap();
        let f = array![[1.5, -0.5]];
        let (out, _) = conv.forward(&geo, &f).unwrap();

        // Oracle: evaluate the MLP at y = 0 by hand and reshape.
        let hidden: Vec<f64> = (0..CONTINUOUS_HIDDEN)
            .map(|j| {
                let z = b1[j];
                if z > 0.0 {
                    z
                } else {
                    0.1 * z
                }
            })
            .collect();
        for k in 0..3 {
            let mut acc = 0.0;
            for d in 0..2 {
                let idx = k * 2 + d;
                let mut wv = b2[idx];
                for (j, h) in hidden.iter().enumerate() {
                    wv += w2[[idx, j]] * h;
                }
                acc += wv * f[[0, d]];
            }
            assert!((out[[0, k]] - acc).abs() < 1e-12);
        }
    }
}
