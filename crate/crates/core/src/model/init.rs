//! Parameter initialization policy.
//!
//! - Feature-mixing matrices (mix_w, discrete kernel weights, point-wise
//!   heads): uniform in ±√(6 / (fan_in + fan_out)).
//! - Field directions (rows of A and of the 3-input MLP layers): random unit
//!   vectors scaled by 1/r of the block, so potential values stay O(1) over
//!   the neighborhood ball.
//! - Quadratic coefficients B: zero, so a quadratic bank starts exactly as
//!   the linear bank drawn from the same seed.
//! - Field biases: uniform in ±0.5.
//!
//! All draws happen in f64 and are converted, so f32 and f64 models built
//! from one seed hold the same values.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Model, INPUT_FEATURE_WIDTH};
use crate::baselines::CONTINUOUS_HIDDEN;
use crate::error::Result;
use crate::fields::{FieldBank, FieldKind, MLP_HIDDEN};
use crate::real::Real;

/// Zero-valued bank of the requested kind, used by `Model::build` as a
/// placeholder until `init_params` runs.
pub(super) fn zero_bank<T: Real>(kind: FieldKind, width: usize) -> Result<FieldBank<T>> {
    use ndarray::{Array1, Array2};
    match kind {
        FieldKind::Linear => FieldBank::linear(Array2::zeros((width, 3)), Array1::zeros(width)),
        FieldKind::LinearNormal => {
            FieldBank::linear_normal(Array2::zeros((width, 3)), Array1::zeros(width))
        }
        FieldKind::Quadratic => FieldBank::quadratic(
            Array2::zeros((width, 3)),
            Array2::zeros((width, 3)),
            Array1::zeros(width),
        ),
        FieldKind::Mlp => FieldBank::mlp(
            Array2::zeros((MLP_HIDDEN, 3)),
            Array1::zeros(MLP_HIDDEN),
            Array2::zeros((width, MLP_HIDDEN)),
            Array1::zeros(width),
        ),
    }
}

fn unit_rows<T: Real>(slot: &mut [T], inv_scale: f64, rng: &mut ChaCha8Rng) {
    debug_assert_eq!(slot.len() % 3, 0);
    for row in slot.chunks_mut(3) {
        loop {
            let v: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-9 {
                for (dst, src) in row.iter_mut().zip(v) {
                    *dst = T::of(src / n * inv_scale);
                }
                break;
            }
        }
    }
}

fn uniform<T: Real>(slot: &mut [T], bound: f64, rng: &mut ChaCha8Rng) {
    for v in slot {
        *v = T::of(rng.random_range(-bound..bound));
    }
}

fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn fill<T: Real>(slot: &mut [T], value: f64) {
    for v in slot {
        *v = T::of(value);
    }
}

pub(super) fn init_model<T: Real>(model: &mut Model<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = model.config().clone();

    // (fan_in, fan_out, radius) per block.
    let mut dims = Vec::with_capacity(cfg.widths.len());
    let mut d_in = INPUT_FEATURE_WIDTH;
    for (&w, &r) in cfg.widths.iter().zip(&cfg.radii) {
        dims.push((d_in, w, r));
        d_in = w;
    }
    let hidden = cfg.head_hidden();
    let last = *cfg.widths.last().unwrap();

    model.visit_params(&mut |slot| {
        let key = slot.key.as_str();
        let block = key
            .strip_prefix("block")
            .and_then(|rest| rest.split('.').next())
            .and_then(|s| s.parse::<usize>().ok());
        let (fan_in, fan_out, radius) = block
            .map(|b| dims[b])
            .unwrap_or((last, hidden, 1.0));

        if key.ends_with(".field.a") || key.ends_with(".field.w1") || key.ends_with(".mlp_w1")
        {
            unit_rows(slot.value, 1.0 / radius, &mut rng);
        } else if key.ends_with(".field.b") {
            fill(slot.value, 0.0);
        } else if key.ends_with(".field.bias")
            || key.ends_with(".field.b1")
            || key.ends_with(".field.b2")
            || key.ends_with(".mlp_b1")
        {
            uniform(slot.value, 0.5, &mut rng);
        } else if key.ends_with(".mlp_b2") {
            fill(slot.value, 0.0);
        } else if key.ends_with(".field.w2") {
            uniform(slot.value, xavier_bound(MLP_HIDDEN, fan_out), &mut rng);
        } else if key.ends_with(".mlp_w2") {
            uniform(
                slot.value,
                xavier_bound(CONTINUOUS_HIDDEN, fan_in * fan_out),
                &mut rng,
            );
        } else if key.ends_with(".mix_w") {
            uniform(slot.value, xavier_bound(fan_in, fan_out), &mut rng);
        } else if block.is_some() && key.contains(".conv.w") {
            // Discrete kernel weight matrices w0..w{M-1}.
            uniform(slot.value, xavier_bound(fan_in, fan_out), &mut rng);
        } else if key.ends_with(".bn.gamma") || key.ends_with(".bn.running_var") {
            fill(slot.value, 1.0);
        } else if key.ends_with(".bn.beta") || key.ends_with(".bn.running_mean") {
            fill(slot.value, 0.0);
        } else if key == "head0.w" {
            uniform(slot.value, xavier_bound(last, hidden), &mut rng);
        } else if key == "head1.w" {
            uniform(slot.value, xavier_bound(hidden, cfg.classes), &mut rng);
        } else if key.ends_with(".bias") {
            fill(slot.value, 0.0);
        } else {
            unreachable!("unhandled parameter key {key}");
        }
    });
    model.set_step(0);
}
