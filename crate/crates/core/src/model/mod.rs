//! Host networks: a PointNet-style classifier trunk (conv → batch norm →
//! leaky-ReLU blocks with farthest-point subsampling, global max pool, and a
//! two-layer point-wise head) and a per-point segmenter variant that keeps
//! every point.

pub mod checkpoint;
mod init;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::baselines::{ContinuousConv, ContinuousTape, DiscreteConv, DiscreteTape};
use crate::error::{Error, Result};
use crate::fields::FieldKind;
use crate::geometry::{farthest_point_sampling, radius_neighbors, PointCloud};
use crate::layers::{
    activation, loss, pool, Aggregation, BatchNorm1d, LocalGeometry, ParamSlot, PointwiseConv,
    PotentialConv,
};
use crate::real::Real;

/// Negative slope of the leaky-ReLU between blocks and in the head.
pub const BLOCK_LEAK: f64 = 0.1;

/// Width of the constant input feature each point starts with.
pub const INPUT_FEATURE_WIDTH: usize = 1;

/// Default kernel-point count for the discrete baseline.
pub const DISCRETE_KERNEL_POINTS: usize = 15;

/// Kernel influence for the discrete baseline, as a fraction of the block radius.
pub const DISCRETE_INFLUENCE_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Segment,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(Task::Classify),
            "segment" => Ok(Task::Segment),
            other => Err(Error::invalid(format!("unknown task `{other}`"))),
        }
    }
}

/// Which convolution kernel the host network uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    PotentialLinear,
    PotentialLinearNormal,
    PotentialQuadratic,
    PotentialMlp,
    Discrete,
    Continuous,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::PotentialLinear,
        KernelFamily::PotentialLinearNormal,
        KernelFamily::PotentialQuadratic,
        KernelFamily::PotentialMlp,
        KernelFamily::Discrete,
        KernelFamily::Continuous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::PotentialLinear => "potential_linear",
            KernelFamily::PotentialLinearNormal => "potential_linear_normal",
            KernelFamily::PotentialQuadratic => "potential_quadratic",
            KernelFamily::PotentialMlp => "potential_mlp",
            KernelFamily::Discrete => "discrete",
            KernelFamily::Continuous => "continuous",
        }
    }

    pub fn field_kind(self) -> Option<FieldKind> {
        match self {
            KernelFamily::PotentialLinear => Some(FieldKind::Linear),
            KernelFamily::PotentialLinearNormal => Some(FieldKind::LinearNormal),
            KernelFamily::PotentialQuadratic => Some(FieldKind::Quadratic),
            KernelFamily::PotentialMlp => Some(FieldKind::Mlp),
            _ => None,
        }
    }

    pub fn needs_normals(self) -> bool {
        matches!(self, KernelFamily::PotentialLinearNormal)
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown kernel family `{s}`")))
    }
}

/// Architecture description. Clouds are assumed normalized to zero centroid
/// and unit max radius at ingestion, so radii are scale-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    pub kernel: KernelFamily,
    /// Output width per conv block.
    pub widths: Vec<usize>,
    /// Neighborhood radius per block; must be non-decreasing.
    pub radii: Vec<f64>,
    /// Query count per block (classify only; clamped to the available points).
    pub subsample: Vec<usize>,
    pub classes: usize,
    /// Per-query neighbor cap with nearest-first truncation.
    pub max_neighbors: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            task: Task::Classify,
            kernel: KernelFamily::PotentialQuadratic,
            widths: vec![64, 128, 256],
            radii: vec![0.2, 0.4, 0.8],
            subsample: vec![256, 128, 64],
            classes: 4,
            max_neighbors: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::invalid("widths: must name at least one block"));
        }
        if self.widths.len() != self.radii.len() || self.widths.len() != self.subsample.len() {
            return Err(Error::invalid(format!(
                "widths/radii/subsample: lengths differ ({}, {}, {})",
                self.widths.len(),
                self.radii.len(),
                self.subsample.len()
            )));
        }
        if let Some(i) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::invalid(format!("widths: block {i} has zero width")));
        }
        if let Some(i) = self.subsample.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("subsample: block {i} keeps zero points")));
        }
        if let Some(i) = self.radii.iter().position(|r| !(r > &0.0) || !r.is_finite()) {
            return Err(Error::invalid(format!("radii: block {i} is not positive and finite")));
        }
        if self.radii.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("radii: must be non-decreasing across blocks"));
        }
        if self.classes < 2 {
            return Err(Error::invalid("classes: need at least two"));
        }
        if self.max_neighbors == 0 {
            return Err(Error::invalid("max_neighbors: must be positive"));
        }
        Ok(())
    }

    fn head_hidden(&self) -> usize {
        let last = *self.widths.last().unwrap();
        (last / 2).max(self.classes).max(1)
    }
}

#[derive(Debug, Clone)]
enum ConvKernel<T: Real> {
    Potential(PotentialConv<T>),
    Discrete(DiscreteConv<T>),
    Continuous(ContinuousConv<T>),
}

#[derive(Debug)]
enum ConvTape<T: Real> {
    Potential(crate::layers::potential::PotConvTape<T>),
    Discrete(DiscreteTape<T>),
    Continuous(ContinuousTape<T>),
}

#[derive(Debug, Clone)]
struct Block<T: Real> {
    conv: ConvKernel<T>,
    bn: BatchNorm1d<T>,
    radius: f64,
    subsample: usize,
}

struct BlockTape<T: Real> {
    geo: LocalGeometry<T>,
    conv: ConvTape<T>,
    bn: crate::layers::norm::BatchNormTape<T>,
    act: crate::layers::activation::ActivationTape<T>,
}

/// Tape of one whole-model forward pass, consumed by exactly one backward.
pub struct ModelTape<T: Real> {
    blocks: Vec<BlockTape<T>>,
    pool: Option<pool::PoolTape>,
    head0: crate::layers::pointwise::PointwiseTape<T>,
    head_act: crate::layers::activation::ActivationTape<T>,
    head1: crate::layers::pointwise::PointwiseTape<T>,
}

/// A host network with explicit forward/backward.
#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    config: ModelConfig,
    blocks: Vec<Block<T>>,
    head0: PointwiseConv<T>,
    head1: PointwiseConv<T>,
    step: u64,
}

impl<T: Real> Model<T> {
    /// Builds the architecture with zeroed parameters; call
    /// [`Model::init_params`] (or [`Model::new_initialized`]) before use.
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::with_capacity(config.widths.len());
        let mut d_in = INPUT_FEATURE_WIDTH;
        for (b, (&width, &radius)) in config.widths.iter().zip(&config.radii).enumerate() {
            let conv = match config.kernel {
                KernelFamily::PotentialLinear
                | KernelFamily::PotentialLinearNormal
                | KernelFamily::PotentialQuadratic
                | KernelFamily::PotentialMlp => {
                    let bank = init::zero_bank(config.kernel.field_kind().unwrap(), width)?;
                    ConvKernel::Potential(PotentialConv::new(
                        bank,
                        Array2::zeros((width, d_in)),
                        Aggregation::Sum,
                    )?)
                }
                KernelFamily::Discrete => {
                    let points = crate::baselines::make_rigid_dispositions(
                        DISCRETE_KERNEL_POINTS,
                        T::of(radius),
                    )?;
                    let weights =
                        vec![Array2::zeros((width, d_in)); DISCRETE_KERNEL_POINTS];
                    ConvKernel::Discrete(DiscreteConv::new(
                        points,
                        weights,
                        T::of(radius * DISCRETE_INFLUENCE_FRACTION),
                    )?)
                }
                KernelFamily::Continuous => ConvKernel::Continuous(ContinuousConv::new(
                    Array2::zeros((crate::baselines::CONTINUOUS_HIDDEN, 3)),
                    Array1::zeros(crate::baselines::CONTINUOUS_HIDDEN),
                    Array2::zeros((d_in * width, crate::baselines::CONTINUOUS_HIDDEN)),
                    Array1::zeros(d_in * width),
                    d_in,
                    width,
                )?),
            };
            blocks.push(Block {
                conv,
                bn: BatchNorm1d::new(width),
                radius,
                subsample: config.subsample[b],
            });
            d_in = width;
        }
        let hidden = config.head_hidden();
        let head0 = PointwiseConv::new(Array2::zeros((hidden, d_in)), Some(Array1::zeros(hidden)))?;
        let head1 =
            PointwiseConv::new(Array2::zeros((config.classes, hidden)), Some(Array1::zeros(config.classes)))?;
        Ok(Self { config, blocks, head0, head1, step: 0 })
    }

    /// Builds and initializes from the config's own seed.
    pub fn new_initialized(config: ModelConfig) -> Result<Self> {
        let seed = config.seed;
        let mut model = Self::build(config)?;
        model.init_params(seed);
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// Field bank of conv block `index`, when that block is a potential conv.
    pub fn field_bank(&self, index: usize) -> Option<&crate::fields::FieldBank<T>> {
        match &self.blocks.get(index)?.conv {
            ConvKernel::Potential(p) => Some(p.bank()),
            _ => None,
        }
    }

    pub fn block_radius(&self, index: usize) -> Option<f64> {
        self.blocks.get(index).map(|b| b.radius)
    }

    pub fn blocks_len(&self) -> usize {
        self.blocks.len()
    }

    fn check_input(&self, cloud: &PointCloud<T>) -> Result<()> {
        if self.config.kernel.needs_normals() && cloud.normals().is_none() {
            return Err(Error::invalid(
                "kernel family potential_linear_normal requires cloud normals",
            ));
        }
        Ok(())
    }

    fn block_io(
        &self,
        block_idx: usize,
        positions: &[[T; 3]],
        normals: Option<&[[T; 3]]>,
    ) -> Result<(Vec<[T; 3]>, Option<Vec<[T; 3]>>, LocalGeometry<T>)> {
        let block = &self.blocks[block_idx];
        let source = PointCloud::new(positions.to_vec())?;
        let query_idx: Vec<usize> = match self.config.task {
            Task::Classify => {
                let m = block.subsample.min(positions.len());
                farthest_point_sampling(&source, m, 0)?
            }
            Task::Segment => (0..positions.len()).collect(),
        };
        let query_positions: Vec<[T; 3]> = query_idx.iter().map(|&i| positions[i]).collect();
        let neighbors = radius_neighbors(
            &source,
            &query_positions,
            T::of(block.radius),
            Some(self.config.max_neighbors),
        )?;
        let need_normals = self.config.kernel.needs_normals();
        let geo = LocalGeometry::build(
            positions,
            if need_normals { normals } else { None },
            &neighbors,
            &query_positions,
        )?;
        let query_normals = normals
            .map(|ns| query_idx.iter().map(|&i| ns[i]).collect::<Vec<_>>());
        Ok((query_positions, query_normals, geo))
    }

    fn conv_forward(
        conv: &ConvKernel<T>,
        geo: &LocalGeometry<T>,
        features: &Array2<T>,
    ) -> Result<(Array2<T>, ConvTape<T>)> {
        Ok(match conv {
            ConvKernel::Potential(c) => {
                let (out, tape) = c.forward(geo, features)?;
                (out, ConvTape::Potential(tape))
            }
            ConvKernel::Discrete(c) => {
                let (out, tape) = c.forward(geo, features)?;
                (out, ConvTape::Discrete(tape))
            }
            ConvKernel::Continuous(c) => {
                let (out, tape) = c.forward(geo, features)?;
                (out, ConvTape::Continuous(tape))
            }
        })
    }

    /// Training-mode forward: returns logits (1×classes for classify,
    /// N×classes for segment) and the tape for backward.
    pub fn forward_train(
        &mut self,
        cloud: &PointCloud<T>,
    ) -> Result<(Array2<T>, ModelTape<T>)> {
        self.check_input(cloud)?;
        let mut positions = cloud.positions().to_vec();
        let mut normals = cloud.normals().map(|n| n.to_vec());
        let mut features = Array2::ones((positions.len(), INPUT_FEATURE_WIDTH));
        let mut block_tapes = Vec::with_capacity(self.blocks.len());

        for b in 0..self.blocks.len() {
            let (qpos, qnorm, geo) = self.block_io(b, &positions, normals.as_deref())?;
            let (conv_out, conv_tape) = Self::conv_forward(&self.blocks[b].conv, &geo, &features)?;
            let (bn_out, bn_tape) = self.blocks[b].bn.forward_train(&conv_out)?;
            let (act_out, act_tape) = activation::leaky_relu_forward(&bn_out, T::of(BLOCK_LEAK));
            block_tapes.push(BlockTape { geo, conv: conv_tape, bn: bn_tape, act: act_tape });
            features = act_out;
            positions = qpos;
            normals = qnorm;
        }

        let (head_in, pool_tape) = match self.config.task {
            Task::Classify => {
                let (pooled, tape) = pool::max_pool_global(&features)?;
                (pooled.insert_axis(ndarray::Axis(0)), Some(tape))
            }
            Task::Segment => (features, None),
        };
        let (h0, head0_tape) = self.head0.forward(&head_in)?;
        let (ha, head_act_tape) = activation::leaky_relu_forward(&h0, T::of(BLOCK_LEAK));
        let (logits, head1_tape) = self.head1.forward(&ha)?;

        Ok((
            logits,
            ModelTape {
                blocks: block_tapes,
                pool: pool_tape,
                head0: head0_tape,
                head_act: head_act_tape,
                head1: head1_tape,
            },
        ))
    }

    /// Inference forward using running normalization statistics.
    pub fn forward_eval(&self, cloud: &PointCloud<T>) -> Result<Array2<T>> {
        self.check_input(cloud)?;
        let mut positions = cloud.positions().to_vec();
        let mut normals = cloud.normals().map(|n| n.to_vec());
        let mut features = Array2::ones((positions.len(), INPUT_FEATURE_WIDTH));

        for b in 0..self.blocks.len() {
            let (qpos, qnorm, geo) = self.block_io(b, &positions, normals.as_deref())?;
            let (conv_out, _) = Self::conv_forward(&self.blocks[b].conv, &geo, &features)?;
            // Per-cloud statistics at inference: each cloud is normalized the
            // way training normalized it, instead of against running averages
            // that mix statistics across shapes.
            let bn_out = self.blocks[b].bn.forward_instance(&conv_out)?;
            let (act_out, _) = activation::leaky_relu_forward(&bn_out, T::of(BLOCK_LEAK));
            features = act_out;
            positions = qpos;
            normals = qnorm;
        }

        let head_in = match self.config.task {
            Task::Classify => {
                let (pooled, _) = pool::max_pool_global(&features)?;
                pooled.insert_axis(ndarray::Axis(0))
            }
            Task::Segment => features,
        };
        let (h0, _) = self.head0.forward(&head_in)?;
        let (ha, _) = activation::leaky_relu_forward(&h0, T::of(BLOCK_LEAK));
        let (logits, _) = self.head1.forward(&ha)?;
        Ok(logits)
    }

    /// Backward from the logits gradient; accumulates parameter gradients.
    pub fn backward(&mut self, tape: ModelTape<T>, dlogits: &Array2<T>) -> Result<()> {
        let d = self.head1.backward(tape.head1, dlogits)?;
        let d = activation::leaky_relu_backward(tape.head_act, &d);
        let d = self.head0.backward(tape.head0, &d)?;

        let mut d = match (self.config.task, tape.pool) {
            (Task::Classify, Some(pool_tape)) => {
                let row = d.row(0).to_owned();
                pool::max_pool_global_backward(pool_tape, &row)?
            }
            (Task::Segment, None) => d,
            _ => return Err(Error::structural("tape does not match the model task")),
        };

        for (block, tape) in self.blocks.iter_mut().zip(tape.blocks).rev() {
            let d_bn = activation::leaky_relu_backward(tape.act, &d);
            let d_conv = block.bn.backward(tape.bn, &d_bn)?;
            d = match (&mut block.conv, tape.conv) {
                (ConvKernel::Potential(c), ConvTape::Potential(t)) => {
                    c.backward(&tape.geo, t, &d_conv)?
                }
                (ConvKernel::Discrete(c), ConvTape::Discrete(t)) => {
                    c.backward(&tape.geo, t, &d_conv)?
                }
                (ConvKernel::Continuous(c), ConvTape::Continuous(t)) => {
                    c.backward(&tape.geo, t, &d_conv)?
                }
                _ => return Err(Error::structural("tape kernel does not match the model")),
            };
        }
        Ok(())
    }

    /// Convenience for training: forward, loss, backward in one call.
    /// Returns the loss and the predicted class per logit row.
    pub fn train_step(
        &mut self,
        cloud: &PointCloud<T>,
        labels: &[usize],
    ) -> Result<(T, Vec<usize>)> {
        let (logits, tape) = self.forward_train(cloud)?;
        let (loss_value, dlogits) = loss::softmax_cross_entropy(&logits, labels)?;
        let preds = loss::argmax_rows(&logits);
        self.backward(tape, &dlogits)?;
        Ok((loss_value, preds))
    }

    pub fn zero_grads(&mut self) {
        for block in &mut self.blocks {
            match &mut block.conv {
                ConvKernel::Potential(c) => c.zero_grads(),
                ConvKernel::Discrete(c) => c.zero_grads(),
                ConvKernel::Continuous(c) => c.zero_grads(),
            }
            block.bn.zero_grads();
        }
        self.head0.zero_grads();
        self.head1.zero_grads();
    }

    /// Visits every parameter (and stateful buffer) in a fixed, documented
    /// order: blocks first (conv then norm), then the head.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        for (b, block) in self.blocks.iter_mut().enumerate() {
            let prefix = format!("block{b}.conv");
            match &mut block.conv {
                ConvKernel::Potential(c) => c.visit_params(&prefix, f),
                ConvKernel::Discrete(c) => c.visit_params(&prefix, f),
                ConvKernel::Continuous(c) => c.visit_params(&prefix, f),
            }
            block.bn.visit_params(&format!("block{b}.bn"), f);
        }
        self.head0.visit_params("head0", f);
        self.head1.visit_params("head1", f);
    }

    /// Count of trainable parameters (excludes running statistics).
    pub fn param_count(&self) -> usize {
        let mut clone = self.clone();
        let mut count = 0;
        clone.visit_params(&mut |slot| {
            if slot.grad.is_some() {
                count += slot.value.len();
            }
        });
        count
    }

    /// Initializes all parameters from the seed; deterministic.
    pub fn init_params(&mut self, seed: u64) {
        init::init_model(self, seed);
    }
}

#[cfg(test)]
mod tests;
