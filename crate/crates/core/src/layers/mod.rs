//! Differentiable layers with explicit forward/backward passes.
//!
//! Every layer follows the same tape pattern: `forward` returns the output
//! together with a tape of cached intermediates, and `backward` consumes that
//! tape (by value, so a tape feeds exactly one backward call) and accumulates
//! parameter gradients into the layer. There is no general autograd; each
//! chain rule is written out and verified against finite differences.

pub mod activation;
pub mod loss;
pub mod norm;
pub mod pointwise;
pub mod pool;
pub mod potential;

pub use activation::{leaky_relu_backward, leaky_relu_forward, relu_backward, relu_forward};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use norm::BatchNorm1d;
pub use pointwise::PointwiseConv;
pub use pool::{max_pool_global, max_pool_global_backward};
pub use potential::{Aggregation, PotentialConv};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::NeighborIndex;
use crate::real::Real;
use crate::vec3;

/// A mutable view of one named parameter tensor and its gradient
/// accumulator. Stateful-but-untrained buffers (running statistics) carry no
/// gradient.
pub struct ParamSlot<'a, T> {
    pub key: String,
    pub value: &'a mut [T],
    pub grad: Option<&'a mut [T]>,
    /// Whether weight decay applies (feature-mixing matrices only; never
    /// biases or potential-field parameters).
    pub decay: bool,
}

/// Flattened per-query neighborhoods for one convolution invocation.
///
/// Neighbor rows of all queries are concatenated so field evaluation and
/// feature mixing run as single matrix products; `offsets` delimits each
/// query's segment.
#[derive(Debug, Clone)]
pub struct LocalGeometry<T: Real> {
    offsets: Vec<usize>,
    source: Vec<usize>,
    local: Array2<T>,
    normals: Option<Array2<T>>,
    source_len: usize,
}

impl<T: Real> LocalGeometry<T> {
    /// Gathers and re-centers neighbor coordinates (`y_i = x_i - x`), and
    /// optionally gathers per-neighbor normals.
    pub fn build(
        source_positions: &[[T; 3]],
        source_normals: Option<&[[T; 3]]>,
        neighbors: &NeighborIndex,
        query_positions: &[[T; 3]],
    ) -> Result<Self> {
        if neighbors.queries() != query_positions.len() {
            return Err(Error::structural(format!(
                "neighbor index has {} queries, got {} query positions",
                neighbors.queries(),
                query_positions.len()
            )));
        }
        if let Some(ns) = source_normals {
            if ns.len() != source_positions.len() {
                return Err(Error::structural("normal count does not match source points"));
            }
        }
        let total = neighbors.total_neighbors();
        let mut offsets = Vec::with_capacity(neighbors.queries() + 1);
        let mut source = Vec::with_capacity(total);
        let mut local = Array2::zeros((total, 3));
        let mut normals = source_normals.map(|_| Array2::zeros((total, 3)));

        offsets.push(0);
        let mut row = 0;
        for (list, q) in neighbors.lists().iter().zip(query_positions) {
            for &j in list {
                let p = *source_positions.get(j).ok_or_else(|| {
                    Error::structural(format!(
                        "neighbor index {j} out of bounds for {} source points",
                        source_positions.len()
                    ))
                })?;
                let y = vec3::sub(p, *q);
                for c in 0..3 {
                    local[[row, c]] = y[c];
                }
                if let (Some(nmat), Some(ns)) = (normals.as_mut(), source_normals) {
                    for c in 0..3 {
                        nmat[[row, c]] = ns[j][c];
                    }
                }
                source.push(j);
                row += 1;
            }
            offsets.push(row);
        }
        Ok(Self { offsets, source, local, normals, source_len: source_positions.len() })
    }

    pub fn queries(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.source.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Row range of query `q` in the flat arrays.
    pub fn segment(&self, q: usize) -> std::ops::Range<usize> {
        self.offsets[q]..self.offsets[q + 1]
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source
    }

    pub fn local(&self) -> &Array2<T> {
        &self.local
    }

    pub fn normals(&self) -> Option<&Array2<T>> {
        self.normals.as_ref()
    }

    /// Gathers feature rows for every flat neighbor row: ΣK×D.
    pub fn gather_features(&self, features: &Array2<T>) -> Result<Array2<T>> {
        if features.nrows() != self.source_len {
            return Err(Error::invalid(format!(
                "feature rows {} do not match source points {}",
                features.nrows(),
                self.source_len
            )));
        }
        let d = features.ncols();
        let mut out = Array2::zeros((self.rows(), d));
        for (row, &j) in self.source.iter().enumerate() {
            out.row_mut(row).assign(&features.row(j));
        }
        Ok(out)
    }

    /// Scatter-adds per-row gradients back onto source features: N×D.
    pub fn scatter_features(&self, row_grads: &Array2<T>) -> Array2<T> {
        let d = row_grads.ncols();
        let mut out = Array2::zeros((self.source_len, d));
        for (row, &j) in self.source.iter().enumerate() {
            let mut dst = out.row_mut(j);
            dst += &row_grads.row(row);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{radius_neighbors, PointCloud};

    #[test]
    fn local_geometry_flattens_segments() {
        let cloud = PointCloud::new(vec![
            [0.0, 0.0, 0.0],
            [0.1, 0.0, 0.0],
            [5.0, 5.0, 5.0],
        ])
        .unwrap();
        let queries = [[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]];
        let nbrs = radius_neighbors(&cloud, &queries, 0.5, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        assert_eq!(geo.queries(), 2);
        assert_eq!(geo.rows(), 3);
        assert_eq!(geo.segment(0), 0..2);
        assert_eq!(geo.segment(1), 2..3);
        assert_eq!(geo.local()[[2, 0]], 0.0);
    }

    #[test]
    fn gather_scatter_roundtrip_accumulates() {
        let cloud = PointCloud::new(vec![[0.0; 3], [0.05, 0.0, 0.0]]).unwrap();
        let queries = [[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]];
        let nbrs = radius_neighbors(&cloud, &queries, 0.2, None).unwrap();
        let geo = LocalGeometry::build(cloud.positions(), None, &nbrs, &queries).unwrap();
        // Both points see both points: each source row appears twice.
        let f = Array2::from_shape_vec((2, 1), vec![1.0, 10.0]).unwrap();
        let g = geo.gather_features(&f).unwrap();
        assert_eq!(g.nrows(), 4);
        let back = geo.scatter_features(&g);
        assert_eq!(back[[0, 0]], 2.0);
        assert_eq!(back[[1, 0]], 20.0);
    }
}
