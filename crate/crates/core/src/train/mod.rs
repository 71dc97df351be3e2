//! Training: optimizers, metrics, the synthetic shape benchmark, the epoch
//! loop, and the sparse-input evaluation sweep.

mod metrics;
mod optim;
mod run;
mod synth;
mod sweep;

pub use metrics::{compute_metrics, Metrics};
pub use optim::{OptimKind, Optimizer};
pub use run::{evaluate, train_loop, write_metrics_csv, EpochRecord, Split};
pub use synth::{gen_synthetic, ShapeClass, SynthSpec};
pub use sweep::{sparse_sweep, write_sweep_csv, SweepRow, SweepTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// A labeled collection of clouds sharing one class vocabulary.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub clouds: Vec<PointCloud<f32>>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }
}

/// Optional per-sample augmentations applied during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AugmentConfig {
    /// Random rotation about the up (z) axis.
    pub rotate_z: bool,
    /// Anisotropic per-axis scale in [0.9, 1.1].
    pub scale: bool,
    /// Gaussian positional jitter with σ = 0.005.
    pub jitter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimKind,
    /// Initial learning rate.
    pub lr: f64,
    /// Multiplicative decay applied every `decay_every` epochs.
    pub decay_factor: f64,
    pub decay_every: usize,
    /// L2 penalty on feature-mixing matrices only.
    pub weight_decay: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            optimizer: OptimKind::Adam,
            lr: 1e-3,
            decay_factor: 0.7,
            decay_every: 10,
            weight_decay: 1e-4,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("train.epochs: must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train.batch_size: must be positive"));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::invalid("train.lr: must be finite and non-negative"));
        }
        if !self.decay_factor.is_finite() || self.decay_factor <= 0.0 || self.decay_factor > 1.0 {
            return Err(Error::invalid("train.decay_factor: must lie in (0, 1]"));
        }
        if self.decay_every == 0 {
            return Err(Error::invalid("train.decay_every: must be positive"));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::invalid("train.weight_decay: must be finite and non-negative"));
        }
        Ok(())
    }

    /// Step-decayed learning rate for an epoch.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

/// Splitmix-style mixing for deriving independent sub-seeds.
pub(crate) fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a
        .wrapping_add(b.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(c.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
