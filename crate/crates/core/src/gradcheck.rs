//! Finite-difference verification of every analytic gradient.
//!
//! Two suites run per kernel family, both in f64:
//!
//! - a standalone convolution layer, checking parameter gradients and the
//!   gradient with respect to input features against central differences;
//! - a full classifier (conv blocks, batch norm, activations, pooling, head,
//!   cross-entropy), checking every trainable parameter.
//!
//! Errors are reported per parameter group as
//! `max_e |analytic_e - fd_e| / max(‖analytic‖∞, ‖fd‖∞, 1e-8)`, which keeps
//! the check meaningful for groups whose entries span magnitudes.

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{make_rigid_dispositions, ContinuousConv, DiscreteConv, CONTINUOUS_HIDDEN};
use crate::error::{Error, Result};
use crate::fields::{FieldBank, MLP_HIDDEN};
use crate::geometry::{radius_neighbors, PointCloud};
use crate::layers::{loss, Aggregation, LocalGeometry, PotentialConv};
use crate::model::{KernelFamily, Model, ModelConfig, Task};

/// Central-difference step for the standalone layer suite.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference step for the full-network suite. Batch norm makes the
/// loss almost scale-invariant in the first mixing matrix, leaving true
/// gradients near the f64 cancellation floor of a 1e-6 step; a wider step
/// keeps the difference quotient meaningful there.
pub const FD_STEP_MODEL: f64 = 1e-5;

/// Default tolerance on the per-group relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub key: String,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub family: KernelFamily,
    pub groups: Vec<GroupReport>,
}

impl FamilyReport {
    pub fn max_error(&self) -> f64 {
        self.groups.iter().map(|g| g.rel_error).fold(0.0, f64::max)
    }

    pub fn worst_group(&self) -> Option<&GroupReport> {
        self.groups
            .iter()
            .max_by(|a, b| a.rel_error.partial_cmp(&b.rel_error).unwrap())
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_error() <= tolerance
    }
}

/// Groups whose analytic and difference-quotient gradients all sit below
/// this magnitude are structurally zero (batch norm's mean subtraction can
/// cancel a parameter exactly); comparing noise against noise there would
/// manufacture failures.
const ZERO_GROUP: f64 = 1e-7;

fn group_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(fd)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < ZERO_GROUP {
        return 0.0;
    }
    analytic
        .iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

fn merge_group(groups: &mut Vec<GroupReport>, key: &str, err: f64) {
    if let Some(g) = groups.iter_mut().find(|g| g.key == key) {
        g.rel_error = g.rel_error.max(err);
    } else {
        groups.push(GroupReport { key: key.to_string(), rel_error: err });
    }
}

fn ball_cloud(n: usize, seed: u64) -> PointCloud<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    while pts.len() < n {
        let p: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r > 1.0 || r < 1e-3 {
            continue;
        }
        pts.push(p);
        normals.push([p[0] / r, p[1] / r, p[2] / r]);
    }
    PointCloud::new(pts).unwrap().with_normals(normals).unwrap()
}

fn rng_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

enum AnyConv {
    Potential(PotentialConv<f64>),
    Discrete(DiscreteConv<f64>),
    Continuous(ContinuousConv<f64>),
}

impl AnyConv {
    fn forward_objective(&self, geo: &LocalGeometry<f64>, f: &Array2<f64>, proj: &Array2<f64>) -> f64 {
        let out = match self {
            AnyConv::Potential(c) => c.forward(geo, f).unwrap().0,
            AnyConv::Discrete(c) => c.forward(geo, f).unwrap().0,
            AnyConv::Continuous(c) => c.forward(geo, f).unwrap().0,
        };
        (&out * proj).sum()
    }

    fn backward_with(
        &mut self,
        geo: &LocalGeometry<f64>,
        f: &Array2<f64>,
        proj: &Array2<f64>,
    ) -> Array2<f64> {
        match self {
            AnyConv::Potential(c) => {
                c.zero_grads();
                let (_, tape) = c.forward(geo, f).unwrap();
                c.backward(geo, tape, proj).unwrap()
            }
            AnyConv::Discrete(c) => {
                c.zero_grads();
                let (_, tape) = c.forward(geo, f).unwrap();
                c.backward(geo, tape, proj).unwrap()
            }
            AnyConv::Continuous(c) => {
                c.zero_grads();
                let (_, tape) = c.forward(geo, f).unwrap();
                c.backward(geo, tape, proj).unwrap()
            }
        }
    }

    fn visit(&mut self, f: &mut dyn FnMut(crate::layers::ParamSlot<'_, f64>)) {
        match self {
            AnyConv::Potential(c) => c.visit_params("conv", f),
            AnyConv::Discrete(c) => c.visit_params("conv", f),
            AnyConv::Continuous(c) => c.visit_params("conv", f),
        }
    }
}

fn build_conv(family: KernelFamily, d_in: usize, d_out: usize, radius: f64, rng: &mut ChaCha8Rng) -> AnyConv {
    match family {
        KernelFamily::PotentialLinear => AnyConv::Potential(
            PotentialConv::new(
                FieldBank::linear(
                    rng_mat(d_out, 3, rng),
                    ndarray::Array1::from_shape_fn(d_out, |_| rng.random_range(-0.5..0.5)),
                )
                .unwrap(),
                rng_mat(d_out, d_in, rng),
                Aggregation::Sum,
            )
            .unwrap(),
        ),
        KernelFamily::PotentialLinearNormal => AnyConv::Potential(
            PotentialConv::new(
                FieldBank::linear_normal(
                    rng_mat(d_out, 3, rng),
                    ndarray::Array1::from_shape_fn(d_out, |_| rng.random_range(-0.5..0.5)),
                )
                .unwrap(),
                rng_mat(d_out, d_in, rng),
                Aggregation::Sum,
            )
            .unwrap(),
        ),
        KernelFamily::PotentialQuadratic => AnyConv::Potential(
            PotentialConv::new(
                FieldBank::quadratic(
                    rng_mat(d_out, 3, rng),
                    rng_mat(d_out, 3, rng),
                    ndarray::Array1::from_shape_fn(d_out, |_| rng.random_range(-0.5..0.5)),
                )
                .unwrap(),
                rng_mat(d_out, d_in, rng),
                Aggregation::Sum,
            )
            .unwrap(),
        ),
        KernelFamily::PotentialMlp => AnyConv::Potential(
            PotentialConv::new(
                FieldBank::mlp(
                    rng_mat(MLP_HIDDEN, 3, rng),
                    ndarray::Array1::from_shape_fn(MLP_HIDDEN, |_| rng.random_range(-0.5..0.5)),
                    rng_mat(d_out, MLP_HIDDEN, rng),
                    ndarray::Array1::from_shape_fn(d_out, |_| rng.random_range(-0.5..0.5)),
                )
                .unwrap(),
                rng_mat(d_out, d_in, rng),
                Aggregation::Sum,
            )
            .unwrap(),
        ),
        KernelFamily::Discrete => {
            let points = make_rigid_dispositions(15, radius).unwrap();
            let weights = (0..15).map(|_| rng_mat(d_out, d_in, rng)).collect();
            AnyConv::Discrete(DiscreteConv::new(points, weights, 0.3 * radius).unwrap())
        }
        KernelFamily::Continuous => AnyConv::Continuous(
            ContinuousConv::new(
                rng_mat(CONTINUOUS_HIDDEN, 3, rng),
                ndarray::Array1::from_shape_fn(CONTINUOUS_HIDDEN, |_| rng.random_range(-0.5..0.5)),
                rng_mat(d_in * d_out, CONTINUOUS_HIDDEN, rng),
                ndarray::Array1::from_shape_fn(d_in * d_out, |_| rng.random_range(-0.5..0.5)),
                d_in,
                d_out,
            )
            .unwrap(),
        ),
    }
}

/// Standalone conv-layer check: every parameter group plus the input
/// features, against central differences with the scalar objective
/// `Σ proj ⊙ out`.
fn check_conv_layer(family: KernelFamily, seed: u64, groups: &mut Vec<GroupReport>, sabotage: Option<&str>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(17));
    let (n, d_in, d_out, radius) = (12usize, 3usize, 4usize, 0.9f64);
    let cloud = ball_cloud(n, seed.wrapping_add(101));
    let queries: Vec<[f64; 3]> = cloud.positions()[..n / 2].to_vec();
    let neighbors = radius_neighbors(&cloud, &queries, radius, Some(8)).unwrap();
    let geo = LocalGeometry::build(
        cloud.positions(),
        cloud.normals(),
        &neighbors,
        &queries,
    )
    .unwrap();
    let features = rng_mat(n, d_in, &mut rng);
    let proj = rng_mat(queries.len(), d_out, &mut rng);

    let mut conv = build_conv(family, d_in, d_out, radius, &mut rng);
    let dfeatures = conv.backward_with(&geo, &features, &proj);

    // Parameter groups.
    let mut keys: Vec<(String, usize)> = Vec::new();
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    conv.visit(&mut |slot| {
        if let Some(grad) = slot.grad {
            keys.push((slot.key.clone(), grad.len()));
            analytic.push(grad.to_vec());
        }
    });
    for ((key, len), mut grads) in keys.into_iter().zip(analytic) {
        if sabotage.is_some_and(|s| key.contains(s)) {
            for g in &mut grads {
                *g = -*g;
            }
        }
        let mut fd = vec![0.0; len];
        for (e, f) in fd.iter_mut().enumerate() {
            let mut eval = |delta: f64| {
                conv.visit(&mut |slot| {
                    if slot.key == key {
                        slot.value[e] += delta;
                    }
                });
                let v = conv.forward_objective(&geo, &features, &proj);
                conv.visit(&mut |slot| {
                    if slot.key == key {
                        slot.value[e] -= delta;
                    }
                });
                v
            };
            let up = eval(FD_STEP);
            let down = eval(-FD_STEP);
            *f = (up - down) / (2.0 * FD_STEP);
        }
        merge_group(groups, &key, group_error(&grads, &fd));
    }

    // Input features.
    let mut grads = dfeatures.as_slice().unwrap().to_vec();
    if sabotage.is_some_and(|s| "input.features".contains(s)) {
        for g in &mut grads {
            *g = -*g;
        }
    }
    let mut fd = vec![0.0; grads.len()];
    let mut f2 = features.clone();
    for (e, f) in fd.iter_mut().enumerate() {
        let orig = f2.as_slice().unwrap()[e];
        f2.as_slice_mut().unwrap()[e] = orig + FD_STEP;
        let up = conv.forward_objective(&geo, &f2, &proj);
        f2.as_slice_mut().unwrap()[e] = orig - FD_STEP;
        let down = conv.forward_objective(&geo, &f2, &proj);
        f2.as_slice_mut().unwrap()[e] = orig;
        *f = (up - down) / (2.0 * FD_STEP);
    }
    merge_group(groups, "input.features", group_error(&grads, &fd));
}

fn gradcheck_model_config(family: KernelFamily) -> ModelConfig {
    ModelConfig {
        task: Task::Classify,
        kernel: family,
        widths: vec![4, 5],
        radii: vec![0.5, 0.9],
        subsample: vec![8, 5],
        classes: 3,
        max_neighbors: 8,
        seed: 0,
    }
}

/// Full-network check through loss: conv blocks, batch norm (train mode),
/// activations, global pooling, head, and softmax cross-entropy.
fn check_model(family: KernelFamily, seed: u64, groups: &mut Vec<GroupReport>, sabotage: Option<&str>) {
    let mut config = gradcheck_model_config(family);
    config.seed = seed.wrapping_add(7);
    let model = Model::<f64>::new_initialized(config).unwrap();
    let cloud = ball_cloud(16, seed.wrapping_add(301));
    let labels = vec![(seed as usize) % 3];

    let loss_of = |m: &Model<f64>| -> f64 {
        let mut work = m.clone();
        let (logits, _) = work.forward_train(&cloud).unwrap();
        loss::softmax_cross_entropy(&logits, &labels).unwrap().0
    };

    let mut work = model.clone();
    work.zero_grads();
    let (logits, tape) = work.forward_train(&cloud).unwrap();
    let (_, dlogits) = loss::softmax_cross_entropy(&logits, &labels).unwrap();
    work.backward(tape, &dlogits).unwrap();

    let mut keys: Vec<(String, usize)> = Vec::new();
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    work.visit_params(&mut |slot| {
        if let Some(grad) = slot.grad {
            keys.push((slot.key.clone(), grad.len()));
            analytic.push(grad.to_vec());
        }
    });

    for ((key, len), mut grads) in keys.into_iter().zip(analytic) {
        if sabotage.is_some_and(|s| key.contains(s)) {
            for g in &mut grads {
                *g = -*g;
            }
        }
        let mut fd = vec![0.0; len];
        let mut probe = model.clone();
        for (e, f) in fd.iter_mut().enumerate() {
            let mut eval = |delta: f64| {
                probe.visit_params(&mut |slot| {
                    if slot.key == key {
                        slot.value[e] += delta;
                    }
                });
                let v = loss_of(&probe);
                probe.visit_params(&mut |slot| {
                    if slot.key == key {
                        slot.value[e] -= delta;
                    }
                });
                v
            };
            let up = eval(FD_STEP_MODEL);
            let down = eval(-FD_STEP_MODEL);
            *f = (up - down) / (2.0 * FD_STEP_MODEL);
        }
        merge_group(groups, &key, group_error(&grads, &fd));
    }
}

/// Runs both suites across `trials` seeds and aggregates the worst error per
/// parameter group. `sabotage`, when set, flips the analytic sign of every
/// group whose key contains the value — a negative control for the harness.
pub fn run_family(
    family: KernelFamily,
    trials: usize,
    sabotage: Option<&str>,
) -> Result<FamilyReport> {
    if trials == 0 {
        return Err(Error::invalid("gradcheck needs at least one trial"));
    }
    let mut groups = Vec::new();
    for seed in 0..trials as u64 {
        check_conv_layer(family, seed, &mut groups, sabotage);
        check_model(family, seed, &mut groups, sabotage);
    }
    Ok(FamilyReport { family, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_families_pass_at_default_tolerance() {
        for family in KernelFamily::ALL {
            let report = run_family(family, 2, None).unwrap();
            assert!(
                report.passed(DEFAULT_TOLERANCE),
                "{family:?} worst group {:?}",
                report.worst_group()
            );
        }
    }

    #[test]
    fn sabotage_is_detected() {
        let report = run_family(KernelFamily::PotentialQuadratic, 1, Some("field.a")).unwrap();
        assert!(!report.passed(DEFAULT_TOLERANCE));
        let worst = report.worst_group().unwrap();
        assert!(worst.key.contains("field.a"));
    }

    #[test]
    fn zero_trials_is_invalid() {
        assert!(run_family(KernelFamily::Discrete, 0, None).is_err());
    }
}
