//! Synthetic surface-sampled shape benchmark with exact analytic normals and
//! per-point part labels. Deterministic per seed, byte for byte.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{mix_seed, Dataset};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Sphere,
    Cube,
    Torus,
    Cylinder,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] =
        [ShapeClass::Sphere, ShapeClass::Cube, ShapeClass::Torus, ShapeClass::Cylinder];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Sphere => "sphere",
            ShapeClass::Cube => "cube",
            ShapeClass::Torus => "torus",
            ShapeClass::Cylinder => "cylinder",
        }
    }

    /// Number of part labels the segmentation variant of this shape carries.
    pub fn part_count(self) -> usize {
        match self {
            ShapeClass::Sphere => 2,
            ShapeClass::Cube => 6,
            ShapeClass::Torus => 2,
            ShapeClass::Cylinder => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<ShapeClass>,
    pub per_class: usize,
    pub n_points: usize,
    /// Gaussian positional noise.
    pub noise: f64,
    /// Concentrate sampling toward the upper hemisphere.
    pub density_bias: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn four_class(per_class: usize, n_points: usize, seed: u64) -> Self {
        Self {
            classes: ShapeClass::ALL.to_vec(),
            per_class,
            n_points,
            noise: 0.01,
            density_bias: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::invalid("synthetic.classes: must name at least one shape"));
        }
        if self.per_class == 0 {
            return Err(Error::invalid("synthetic.per_class: must be positive"));
        }
        if self.n_points < 16 {
            return Err(Error::invalid("synthetic.n_points: need at least 16 points"));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::invalid("synthetic.noise: must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Radius of the torus center circle; tube radius makes the outer edge 1.
const TORUS_MAJOR: f64 = 0.7;
const TORUS_MINOR: f64 = 0.3;
/// Cylinder radius; the half-height follows so corners sit at distance 1.
const CYL_RADIUS: f64 = 0.5;

/// One surface point: position, unit normal, part label.
type Sample = ([f64; 3], [f64; 3], usize);

fn sample_sphere(rng: &mut ChaCha8Rng) -> Sample {
    // Marsaglia: normalize a Gaussian triple.
    let n = Normal::new(0.0, 1.0).unwrap();
    loop {
        let v: [f64; 3] = [n.sample(rng), n.sample(rng), n.sample(rng)];
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if len > 1e-9 {
            let p = [v[0] / len, v[1] / len, v[2] / len];
            let label = if p[2] >= 0.0 { 0 } else { 1 };
            return (p, p, label);
        }
    }
}

fn sample_cube(rng: &mut ChaCha8Rng) -> Sample {
    // Half-side a so the corners touch the unit sphere.
    let a = 1.0 / 3.0f64.sqrt();
    let axis = rng.random_range(0..3usize);
    let negative = rng.random_range(0..2usize) == 1;
    let u = rng.random_range(-a..a);
    let v = rng.random_range(-a..a);
    let mut p = [0.0; 3];
    let mut normal = [0.0; 3];
    p[axis] = if negative { -a } else { a };
    normal[axis] = if negative { -1.0 } else { 1.0 };
    let (other1, other2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    p[other1] = u;
    p[other2] = v;
    (p, normal, axis * 2 + usize::from(negative))
}

fn sample_torus(rng: &mut ChaCha8Rng) -> Sample {
    // Rejection on the tube angle keeps the area measure uniform.
    let theta = loop {
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        let accept = (TORUS_MAJOR + TORUS_MINOR * t.cos()) / (TORUS_MAJOR + TORUS_MINOR);
        if rng.random_range(0.0..1.0) < accept {
            break t;
        }
    };
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let ring = TORUS_MAJOR + TORUS_MINOR * theta.cos();
    let p = [ring * phi.cos(), ring * phi.sin(), TORUS_MINOR * theta.sin()];
    let normal = [theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin()];
    let label = if theta.cos() >= 0.0 { 0 } else { 1 };
    (p, normal, label)
}

fn sample_cylinder(rng: &mut ChaCha8Rng) -> Sample {
    let half_h = (1.0 - CYL_RADIUS * CYL_RADIUS).sqrt();
    let side_area = std::f64::consts::TAU * CYL_RADIUS * 2.0 * half_h;
    let cap_area = 2.0 * std::f64::consts::PI * CYL_RADIUS * CYL_RADIUS;
    let pick = rng.random_range(0.0..side_area + cap_area);
    if pick < side_area {
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let z = rng.random_range(-half_h..half_h);
        (
            [CYL_RADIUS * phi.cos(), CYL_RADIUS * phi.sin(), z],
            [phi.cos(), phi.sin(), 0.0],
            1,
        )
    } else {
        let top = rng.random_range(0..2usize) == 0;
        let r = CYL_RADIUS * rng.random_range(0.0..1.0f64).sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let z = if top { half_h } else { -half_h };
        (
            [r * phi.cos(), r * phi.sin(), z],
            [0.0, 0.0, if top { 1.0 } else { -1.0 }],
            0,
        )
    }
}

fn sample_shape(class: ShapeClass, rng: &mut ChaCha8Rng) -> Sample {
    match class {
        ShapeClass::Sphere => sample_sphere(rng),
        ShapeClass::Cube => sample_cube(rng),
        ShapeClass::Torus => sample_torus(rng),
        ShapeClass::Cylinder => sample_cylinder(rng),
    }
}

fn gen_cloud(spec: &SynthSpec, class_idx: usize, sample_idx: usize) -> PointCloud<f32> {
    let class = spec.classes[class_idx];
    let mut rng =
        ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, class_idx as u64, sample_idx as u64));
    let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE)).unwrap();

    let mut positions = Vec::with_capacity(spec.n_points);
    let mut normals = Vec::with_capacity(spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    while positions.len() < spec.n_points {
        let (p, n, label) = sample_shape(class, &mut rng);
        if spec.density_bias && p[2] < 0.0 && rng.random_range(0.0..1.0f64) > 0.25 {
            continue;
        }
        let p = if spec.noise > 0.0 {
            [
                p[0] + noise.sample(&mut rng),
                p[1] + noise.sample(&mut rng),
                p[2] + noise.sample(&mut rng),
            ]
        } else {
            p
        };
        positions.push([p[0] as f32, p[1] as f32, p[2] as f32]);
        normals.push([n[0] as f32, n[1] as f32, n[2] as f32]);
        labels.push(label);
    }
    PointCloud::new(positions)
        .unwrap()
        .with_normals(normals)
        .unwrap()
        .with_labels(labels)
        .unwrap()
        .with_class_id(class_idx)
}

/// Generates `per_class` clouds for every class in the spec. Clouds carry
/// analytic normals, per-point part labels, and the class id.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut clouds = Vec::with_capacity(spec.classes.len() * spec.per_class);
    for class_idx in 0..spec.classes.len() {
        for sample_idx in 0..spec.per_class {
            clouds.push(gen_cloud(spec, class_idx, sample_idx));
        }
    }
    Ok(Dataset { clouds, classes: spec.classes.len() })
}
