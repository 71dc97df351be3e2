//! Potential convolution: the Gaussian-correlated potential fields modulate a
//! feature-mixing matrix over each radius neighborhood.
//!
//! Forward, for query x with neighbors i:
//! `out[x, k] = agg_i h(p̃_k(y_i)) · (W f_i)[k]`, with `y_i = x_i - x`.

use ndarray::{Array1, Array2, Axis};

use super::LocalGeometry;
use crate::error::{Error, Result};
use crate::fields::{FieldBank, FieldParams};
use crate::real::Real;

/// How neighbor contributions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Plain sum over the neighborhood.
    Sum,
    /// Sum divided by the neighbor count (empty neighborhoods stay zero).
    Mean,
}

/// Cached intermediates of one potential-convolution forward pass.
#[derive(Debug)]
pub struct PotConvTape<T: Real> {
    gathered: Array2<T>,
    mixed: Array2<T>,
    potentials: Array2<T>,
    correlations: Array2<T>,
    /// Pre-activation hidden values, present for the MLP field family.
    hidden_pre: Option<Array2<T>>,
    rows: usize,
    queries: usize,
}

/// Learnable potential convolution layer.
#[derive(Debug, Clone)]
pub struct PotentialConv<T: Real> {
    bank: FieldBank<T>,
    w: Array2<T>,
    aggregation: Aggregation,
    grad_bank: FieldParams<T>,
    grad_w: Array2<T>,
}

fn zeros_like_params<T: Real>(p: &FieldParams<T>) -> FieldParams<T> {
    match p {
        FieldParams::Linear { a, bias } => FieldParams::Linear {
            a: Array2::zeros(a.dim()),
            bias: Array1::zeros(bias.len()),
        },
        FieldParams::LinearNormal { a, bias } => FieldParams::LinearNormal {
            a: Array2::zeros(a.dim()),
            bias: Array1::zeros(bias.len()),
        },
        FieldParams::Quadratic { a, b, bias } => FieldParams::Quadratic {
            a: Array2::zeros(a.dim()),
            b: Array2::zeros(b.dim()),
            bias: Array1::zeros(bias.len()),
        },
        FieldParams::Mlp { w1, b1, w2, b2 } => FieldParams::Mlp {
            w1: Array2::zeros(w1.dim()),
            b1: Array1::zeros(b1.len()),
            w2: Array2::zeros(w2.dim()),
            b2: Array1::zeros(b2.len()),
        },
    }
}

impl<T: Real> PotentialConv<T> {
    /// Builds the layer; `w` is the D′×D feature-mixing matrix and must have
    /// one row per field in the bank.
    pub fn new(bank: FieldBank<T>, w: Array2<T>, aggregation: Aggregation) -> Result<Self> {
        if w.nrows() != bank.fields() {
            return Err(Error::invalid(format!(
                "mixing matrix has {} rows but the bank holds {} fields",
                w.nrows(),
                bank.fields()
            )));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite mixing weight"));
        }
        let grad_bank = zeros_like_params(bank.params());
        let grad_w = Array2::zeros(w.dim());
        Ok(Self { bank, w, aggregation, grad_bank, grad_w })
    }

    pub fn bank(&self) -> &FieldBank<T> {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut FieldBank<T> {
        &mut self.bank
    }

    pub fn mixing(&self) -> &Array2<T> {
        &self.w
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn input_width(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.w.nrows()
    }

    /// Forward pass over flattened neighborhoods. Queries with an empty
    /// neighbor list produce a zero row.
    pub fn forward(
        &self,
        geo: &LocalGeometry<T>,
        features: &Array2<T>,
    ) -> Result<(Array2<T>, PotConvTape<T>)> {
        if features.ncols() != self.w.ncols() {
            return Err(Error::invalid(format!(
                "features have width {} but the mixing matrix expects {}",
                features.ncols(),
                self.w.ncols()
            )));
        }
        if self.bank.kind().needs_normals() && geo.normals().is_none() {
            return Err(Error::invalid(
                "normal-augmented kernel needs neighbor normals in the local geometry",
            ));
        }

        let gathered = geo.gather_features(features)?;
        let mixed = gathered.dot(&self.w.t());
        let normals = geo.normals().map(|n| n.view());
        let potentials = self.bank.eval_potentials(geo.local().view(), normals)?;
        let (hidden_pre, potentials) = match self.bank.params() {
            // Recompute the pre-activation for the tape; eval_potentials only
            // returns the final values.
            FieldParams::Mlp { w1, b1, .. } => {
                let mut z = geo.local().dot(&w1.t());
                z += b1;
                (Some(z), potentials)
            }
            _ => (None, potentials),
        };
        let correlations = potentials.mapv(crate::fields::correlation);

        let d_out = self.w.nrows();
        let weighted = &correlations * &mixed;
        let mut out = Array2::zeros((geo.queries(), d_out));
        for q in 0..geo.queries() {
            let seg = geo.segment(q);
            if seg.is_empty() {
                continue;
            }
            let scale = match self.aggregation {
                Aggregation::Sum => T::one(),
                Aggregation::Mean => T::one() / T::of(seg.len() as f64),
            };
            let mut row = out.row_mut(q);
            for r in seg {
                row += &weighted.row(r);
            }
            if scale != T::one() {
                row.mapv_inplace(|v| v * scale);
            }
        }

        let tape = PotConvTape {
            gathered,
            mixed,
            potentials,
            correlations,
            hidden_pre,
            rows: geo.rows(),
            queries: geo.queries(),
        };
        Ok((out, tape))
    }

    /// Backward pass. Accumulates gradients for the field bank and the mixing
    /// matrix, and returns the gradient with respect to the input features.
    /// Point positions receive no gradient.
    pub fn backward(
        &mut self,
        geo: &LocalGeometry<T>,
        tape: PotConvTape<T>,
        dout: &Array2<T>,
    ) -> Result<Array2<T>> {
        if tape.rows != geo.rows() || tape.queries != geo.queries() {
            return Err(Error::structural(
                "tape does not match the geometry of this invocation",
            ));
        }
        if dout.dim() != (geo.queries(), self.w.nrows()) {
            return Err(Error::structural(format!(
                "upstream gradient is {:?}, expected ({}, {})",
                dout.dim(),
                geo.queries(),
                self.w.nrows()
            )));
        }

        let d_out = self.w.nrows();
        // Expand upstream rows onto neighbor rows with the aggregation scale.
        let mut dexp = Array2::zeros((geo.rows(), d_out));
        for q in 0..geo.queries() {
            let seg = geo.segment(q);
            if seg.is_empty() {
                continue;
            }
            let scale = match self.aggregation {
                Aggregation::Sum => T::one(),
                Aggregation::Mean => T::one() / T::of(seg.len() as f64),
            };
            let src = dout.row(q);
            for r in seg {
                let mut dst = dexp.row_mut(r);
                dst.assign(&src);
                if scale != T::one() {
                    dst.mapv_inplace(|v| v * scale);
                }
            }
        }

        // d/dH and d/dM of out = Σ H ⊙ M.
        let dh = &dexp * &tape.mixed;
        let dmixed = &dexp * &tape.correlations;
        // dh/dp = -2 p h.
        let minus_two = T::of(-2.0);
        let mut dp = dh;
        dp.zip_mut_with(&tape.potentials, |g, &p| *g *= minus_two * p);
        dp *= &tape.correlations;

        self.accumulate_field_grads(geo, &tape, &dp)?;

        // Mixing matrix and input features.
        self.grad_w = &self.grad_w + &dmixed.t().dot(&tape.gathered);
        let dgathered = dmixed.dot(&self.w);
        Ok(geo.scatter_features(&dgathered))
    }

    fn accumulate_field_grads(
        &mut self,
        geo: &LocalGeometry<T>,
        tape: &PotConvTape<T>,
        dp: &Array2<T>,
    ) -> Result<()> {
        match (&mut self.grad_bank, self.bank.params()) {
            (FieldParams::Linear { a: ga, bias: gb }, FieldParams::Linear { .. }) => {
                *ga = &*ga + &dp.t().dot(geo.local());
                *gb = &*gb + &dp.sum_axis(Axis(0));
            }
            (
                FieldParams::LinearNormal { a: ga, bias: gb },
                FieldParams::LinearNormal { .. },
            ) => {
                let n = geo
                    .normals()
                    .ok_or_else(|| Error::structural("geometry lost its normals"))?;
                let shifted = geo.local() + n;
                *ga = &*ga + &dp.t().dot(&shifted);
                *gb = &*gb + &dp.sum_axis(Axis(0));
            }
            (
                FieldParams::Quadratic { a: ga, b: gbq, bias: gb },
                FieldParams::Quadratic { .. },
            ) => {
                *ga = &*ga + &dp.t().dot(geo.local());
                let sq = geo.local().mapv(|v| v * v);
                *gbq = &*gbq + &dp.t().dot(&sq);
                *gb = &*gb + &dp.sum_axis(Axis(0));
            }
            (
                FieldParams::Mlp { w1: gw1, b1: gb1, w2: gw2, b2: gb2 },
                FieldParams::Mlp { w2, .. },
            ) => {
                let z = tape
                    .hidden_pre
                    .as_ref()
                    .ok_or_else(|| Error::structural("mlp tape lacks hidden activations"))?;
                let leak = T::of(crate::fields::MLP_LEAK);
                let hidden = z.mapv(|v| if v > T::zero() { v } else { leak * v });
                *gw2 = &*gw2 + &dp.t().dot(&hidden);
                *gb2 = &*gb2 + &dp.sum_axis(Axis(0));
                let mut dz = dp.dot(w2);
                dz.zip_mut_with(z, |g, &zv| {
                    if zv <= T::zero() {
                        *g *= leak;
                    }
                });
                *gw1 = &*gw1 + &dz.t().dot(geo.local());
                *gb1 = &*gb1 + &dz.sum_axis(Axis(0));
            }
            _ => return Err(Error::structural("gradient bank diverged from parameter bank")),
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.grad_bank = zeros_like_params(self.bank.params());
        self.grad_w.fill(T::zero());
    }

    /// Visits every parameter/gradient pair under `prefix`.
    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(super::ParamSlot<'_, T>),
    ) {
        use super::ParamSlot;
        let grad = &mut self.grad_bank;
        match (self.bank.params_mut(), grad) {
            (FieldParams::Linear { a, bias }, FieldParams::Linear { a: ga, bias: gb })
            | (
                FieldParams::LinearNormal { a, bias },
                FieldParams::LinearNormal { a: ga, bias: gb },
            ) => {
                f(ParamSlot {
                    key: format!("{prefix}.field.a"),
                    value: a.as_slice_mut().unwrap(),
                    grad: Some(ga.as_slice_mut().unwrap()),
                    decay: false,
                });
                f(ParamSlot {
                    key: format!("{prefix}.field.bias"),
                    value: bias.as_slice_mut().unwrap(),
                    grad: Some(gb.as_slice_mut().unwrap()),
                    decay: false,
                });
            }
            (
                FieldParams::Quadratic { a, b, bias },
                FieldParams::Quadratic { a: ga, b: gbq, bias: gb },
            ) => {
                f(ParamSlot {
                    key: format!("{prefix}.field.a"),
                    value: a.as_slice_mut().unwrap(),
                    grad: Some(ga.as_slice_mut().unwrap()),
                    decay: false,
                });
                f(ParamSlot {
                    key: format!("{prefix}.field.b"),
                    value: b.as_slice_mut().unwrap(),
                    grad: Some(gbq.as_slice_mut().unwrap()),
                    decay: false,
                });
                f(ParamSlot {
                    key: format!("{prefix}.field.bias"),
                    value: bias.as_slice_mut().unwrap(),
                    grad: Some(gb.as_slice_mut().unwrap()),
                    decay: false,
                });
            }
            (
                FieldParams::Mlp { w1, b1, w2, b2 },
                FieldParams::Mlp { w1: gw1, b1: gb1, w2: gw2, b2: gb2 },
            ) => {
                f(ParamSlot {
                    key: format!("{prefix}.field.w1"),
                    value: w1.as_slice_mut().unwrap(),
                    grad: Some(gw1.as_slice_mut().unwrap()),
                    decay: false,
                });
                f(ParamSlot {
                    key: format!("{prefix}.field.b1"),
                    value: b1.as_slice_mut().unwrap(),
                    grad: Some(gb1.as_slice_mut().unwrap()),
                    decay: false,
                });
                f(ParamSlot {
                    key: format!("{prefix}.field.w2"),
                    value: w2.as_slice_mut().unwrap(),
                    grad: Some(gw2.as_slice_mut().unwrap()),
                    decay: false,
                });
                f(ParamSlot {
                    key: format!("{prefix}.field.b2"),
                    value: b2.as_slice_mut().unwrap(),
                    grad: Some(gb2.as_slice_mut().unwrap()),
                    decay: false,
                });
            }
            _ => unreachable!("gradient bank mirrors parameter bank by construction"),
        }
        f(super::ParamSlot {
            key: format!("{prefix}.mix_w"),
            value: self.w.as_slice_mut().unwrap(),
            grad: Some(self.grad_w.as_slice_mut().unwrap()),
            decay: true,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::correlation;
    use crate::geometry::{radius_neighbors, PointCloud};
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    fn small_instance(
        seed: u64,
        n: usize,
        d_in: usize,
        d_out: usize,
    ) -> (PointCloud<f64>, Vec<[f64; 3]>, LocalGeometry<f64>, Array2<f64>, FieldBank<f64>, Array2<f64>)
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ]
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let queries: Vec<[f64; 3]> = cloud.positions()[..n / 2].to_vec();
        let nbrs = radius_neighbors(&cloud, &queries, 0.6, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        let features = rng_mat(n, d_in, &mut rng);
        let a = rng_mat(d_out, 3, &mut rng);
        let b = rng_mat(d_out, 3, &mut rng);
        let bias = ndarray::Array1::from_shape_fn(d_out, |_| rng.random_range(-0.5..0.5));
        let bank = FieldBank::quadratic(a, b, bias).unwrap();
        let w = rng_mat(d_out, d_in, &mut rng);
        (cloud, queries, geo, features, bank, w)
    }

    /// Direct transcription of the convolution definition: for every query,
    /// sum over neighbors of h(p̃_k(y_i)) · (W f_i)[k], with scalar loops all
    /// the way down.
    fn scalar_loop_oracle(
        cloud: &PointCloud<f64>,
        queries: &[[f64; 3]],
        nbrs: &crate::geometry::NeighborIndex,
        features: &Array2<f64>,
        bank: &FieldBank<f64>,
        w: &Array2<f64>,
    ) -> Array2<f64> {
        let d_out = w.nrows();
        let d_in = w.ncols();
        let mut out = Array2::zeros((queries.len(), d_out));
        for (q, qpos) in queries.iter().enumerate() {
            for &i in nbrs.list(q) {
                let y = [
                    cloud.positions()[i][0] - qpos[0],
                    cloud.positions()[i][1] - qpos[1],
                    cloud.positions()[i][2] - qpos[2],
                ];
                let normal = cloud.normals().map(|ns| ns[i]);
                let p = bank.eval_point(y, normal).unwrap();
                for k in 0..d_out {
                    let h = correlation(p[k]);
                    let mut wf = 0.0;
                    for d in 0..d_in {
                        wf += w[[k, d]] * features[[i, d]];
                    }
                    out[[q, k]] += h * wf;
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_scalar_loop_oracle() {
        let (cloud, queries, geo, features, bank, w) = small_instance(10, 10, 4, 6);
        let nbrs = radius_neighbors(&cloud, &queries, 0.6, None).unwrap();
        let conv = PotentialConv::new(bank.clone(), w.clone(), Aggregation::Sum).unwrap();
        let (out, _) = conv.forward(&geo, &features).unwrap();
        let expect = scalar_loop_oracle(&cloud, &queries, &nbrs, &features, &bank, &w);
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn huge_bias_suppresses_output() {
        let (_, _, geo, features, _, w) = small_instance(11, 10, 4, 6);
        let bank = FieldBank::linear(
            Array2::zeros((6, 3)),
            ndarray::Array1::from_elem(6, 1e4),
        )
        .unwrap();
        let conv = PotentialConv::new(bank, w, Aggregation::Sum).unwrap();
        let (out, _) = conv.forward(&geo, &features).unwrap();
        for v in out.iter() {
            assert!(v.abs() < 1e-30);
        }
    }

    #[test]
    fn single_self_neighbor_reduces_to_pointwise() {
        // One neighbor exactly at the query center with zero-bias fields:
        // h(0) = 1, so the convolution is just W f.
        let cloud = PointCloud::<f64>::new(vec![[0.25, -0.5, 0.75]]).unwrap();
        let queries = [[0.25f64, -0.5, 0.75]];
        let nbrs = radius_neighbors(&cloud, &queries, 0.1, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        let bank =
            FieldBank::linear(array![[0.3, -1.0, 2.0], [1.0, 1.0, 1.0]], array![0.0, 0.0])
                .unwrap();
        let w = array![[2.0, 3.0], [-1.0, 0.5]];
        let f = array![[1.5, -2.0]];
        let conv = PotentialConv::new(bank, w.clone(), Aggregation::Sum).unwrap();
        let (out, _) = conv.forward(&geo, &f).unwrap();
        let wf = w.dot(&f.row(0));
        assert!((out[[0, 0]] - wf[0]).abs() < 1e-15);
        assert!((out[[0, 1]] - wf[1]).abs() < 1e-15);
    }

    #[test]
    fn empty_neighborhood_outputs_zero_row() {
        let cloud = PointCloud::new(vec![[0.0; 3]]).unwrap();
        // Off-cloud query with no point in range.
        let queries = [[10.0, 0.0, 0.0]];
        let nbrs = radius_neighbors(&cloud, &queries, 0.5, None).unwrap();
        assert!(nbrs.list(0).is_empty());
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        let bank = FieldBank::linear(array![[1.0, 0.0, 0.0]], array![0.0]).unwrap();
        let conv =
            PotentialConv::new(bank, array![[1.0]], Aggregation::Mean).unwrap();
        let f = array![[3.0]];
        let (out, _) = conv.forward(&geo, &f).unwrap();
        assert_eq!(out[[0, 0]], 0.0);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let (_, _, geo, features, bank, w) = small_instance(12, 10, 4, 6);
        let mut conv = PotentialConv::new(bank, w, Aggregation::Sum).unwrap();
        let (out, tape) = conv.forward(&geo, &features).unwrap();
        let dout = Array2::zeros(out.dim());
        let df = conv.backward(&geo, tape, &dout).unwrap();
        assert!(df.iter().all(|v| *v == 0.0));
        conv.visit_params("conv", &mut |slot| {
            assert!(slot.grad.unwrap().iter().all(|g| *g == 0.0), "{}", slot.key);
        });
    }

    #[test]
    fn neighbor_order_does_not_change_output() {
        let (cloud, queries, _, features, bank, w) = small_instance(13, 12, 3, 5);
        let nbrs = radius_neighbors(&cloud, &queries, 0.6, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        let conv = PotentialConv::new(bank, w, Aggregation::Sum).unwrap();
        let (out, _) = conv.forward(&geo, &features).unwrap();

        // Reverse every neighbor list.
        let reversed_lists: Vec<Vec<usize>> =
            nbrs.lists().iter().map(|l| l.iter().rev().copied().collect()).collect();
        let rev = crate::geometry::NeighborIndex::from_lists(
            nbrs.radius(),
            reversed_lists,
            nbrs.max_k(),
        )
        .unwrap();
        let geo_rev = LocalGeometry::build(cloud.positions(), None, &rev, &queries).unwrap();
        let (out_rev, _) = conv.forward(&geo_rev, &features).unwrap();
        for (a, b) in out.iter().zip(out_rev.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn df_accumulates_across_shared_neighborhoods() {
        // A point that appears in two neighborhoods receives the sum of both
        // contributions; masking one neighborhood isolates each share.
        let cloud =
            PointCloud::<f64>::new(vec![[0.0; 3], [0.05, 0.0, 0.0], [0.1, 0.0, 0.0]]).unwrap();
        let queries = [[0.0f64, 0.0, 0.0], [0.1, 0.0, 0.0]];
        let nbrs = radius_neighbors(&cloud, &queries, 0.2, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let features = rng_mat(3, 2, &mut rng);
        let bank = FieldBank::linear(rng_mat(4, 3, &mut rng), ndarray::Array1::zeros(4)).unwrap();
        let w = rng_mat(4, 2, &mut rng);
        let mut conv = PotentialConv::new(bank, w, Aggregation::Sum).unwrap();

        let (out, tape) = conv.forward(&geo, &features).unwrap();
        let dout = Array2::from_elem(out.dim(), 1.0);
        let df_full = conv.backward(&geo, tape, &dout).unwrap();

        let mut df_parts = Array2::<f64>::zeros(df_full.dim());
        for q in 0..2 {
            let (_, tape) = conv.forward(&geo, &features).unwrap();
            let mut masked = dout.clone();
            for qq in 0..2 {
                if qq != q {
                    masked.row_mut(qq).fill(0.0);
                }
            }
            conv.zero_grads();
            df_parts = df_parts + conv.backward(&geo, tape, &masked).unwrap();
        }
        for (a, b) in df_full.iter().zip(df_parts.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
