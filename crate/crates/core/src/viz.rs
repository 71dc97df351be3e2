//! Field visualization exports: argmax coloring of probe clouds and
//! isosurface point sets.
//!
//! Normal-augmented banks are evaluated with zero normals here, which shows
//! the positional part of the field.

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::FieldBank;
use crate::real::Real;

/// Fixed color palette size for argmax coloring; field k maps to k mod 64.
pub const PALETTE_SIZE: usize = 64;

/// Grid resolution per axis for isosurface extraction.
pub const ISO_GRID: usize = 48;

/// Half-width of the band kept around the isosurface level.
pub const ISO_BAND: f64 = 0.02;

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = (h % 360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

/// The fixed 64-color palette (golden-angle hue wheel).
pub fn palette() -> [[u8; 3]; PALETTE_SIZE] {
    let mut colors = [[0u8; 3]; PALETTE_SIZE];
    for (i, c) in colors.iter_mut().enumerate() {
        let hue = (i as f64 * 0.618_033_988_749_895).fract() * 360.0;
        *c = hsv_to_rgb(hue, 0.8, 0.95);
    }
    colors
}

/// `n` points uniform in the ball of the given radius, deterministic per seed.
pub fn probe_ball<T: Real>(n: usize, radius: T, seed: u64) -> Vec<[T; 3]> {
    let r = radius.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = [
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= r * r {
            out.push([T::of(p[0]), T::of(p[1]), T::of(p[2])]);
        }
    }
    out
}

fn points_matrix<T: Real>(points: &[[T; 3]]) -> Array2<T> {
    let mut m = Array2::zeros((points.len(), 3));
    for (i, p) in points.iter().enumerate() {
        for c in 0..3 {
            m[[i, c]] = p[c];
        }
    }
    m
}

fn zero_normals_if_needed<T: Real>(bank: &FieldBank<T>, rows: usize) -> Option<Array2<T>> {
    bank.kind().needs_normals().then(|| Array2::zeros((rows, 3)))
}

/// Colors each point by its most-correlated field.
pub fn argmax_colors<T: Real>(bank: &FieldBank<T>, points: &[[T; 3]]) -> Result<Vec<[u8; 3]>> {
    let m = points_matrix(points);
    let normals = zero_normals_if_needed(bank, points.len());
    let idx = bank.argmax_field(m.view(), normals.as_ref().map(|n| n.view()))?;
    let colors = palette();
    Ok(idx.into_iter().map(|k| colors[k % PALETTE_SIZE]).collect())
}

/// Points of a regular grid over the ball whose absolute potential under
/// field `field` lies within `band` of `eta`: `| |p̃_k(y)| − η | ≤ band`.
pub fn isosurface_points<T: Real>(
    bank: &FieldBank<T>,
    field: usize,
    radius: T,
    eta: f64,
    band: f64,
    grid: usize,
) -> Result<Vec<[T; 3]>> {
    if field >= bank.fields() {
        return Err(Error::invalid(format!(
            "field index {field} out of range for {} fields",
            bank.fields()
        )));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("isosurface level must be positive"));
    }
    if grid < 2 {
        return Err(Error::invalid("grid must have at least two steps per axis"));
    }
    let r = radius.to_f64();
    if !(r > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }

    let mut candidates = Vec::new();
    let step = 2.0 * r / (grid - 1) as f64;
    for ix in 0..grid {
        let x = -r + ix as f64 * step;
        for iy in 0..grid {
            let y = -r + iy as f64 * step;
            for iz in 0..grid {
                let z = -r + iz as f64 * step;
                if x * x + y * y + z * z <= r * r {
                    candidates.push([T::of(x), T::of(y), T::of(z)]);
                }
            }
        }
    }
    let m = points_matrix(&candidates);
    let normals = zero_normals_if_needed(bank, candidates.len());
    let potentials = bank.eval_potentials(m.view(), normals.as_ref().map(|n| n.view()))?;
    Ok(candidates
        .into_iter()
        .enumerate()
        .filter(|(i, _)| {
            let p = potentials[[*i, field]].to_f64();
            (p.abs() - eta).abs() <= band
        })
        .map(|(_, p)| p)
        .collect())
}

/// Mean fraction of each point's k nearest neighbors sharing its color.
/// A quantitative proxy for spatial coherence of an argmax coloring.
pub fn color_coherence<T: Real>(points: &[[T; 3]], colors: &[[u8; 3]], k: usize) -> f64 {
    assert_eq!(points.len(), colors.len());
    let n = points.len();
    if n <= 1 || k == 0 {
        return 1.0;
    }
    let k = k.min(n - 1);
    let mut total = 0.0;
    for i in 0..n {
        // Track the k nearest by squared distance.
        let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2 = crate::vec3::dist_sq(points[i], points[j]).to_f64();
            if nearest.len() < k {
                nearest.push((d2, j));
                if nearest.len() == k {
                    nearest.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                }
            } else if d2 < nearest[k - 1].0 {
                nearest[k - 1] = (d2, j);
                let mut idx = k - 1;
                while idx > 0 && nearest[idx].0 < nearest[idx - 1].0 {
                    nearest.swap(idx, idx - 1);
                    idx -= 1;
                }
            }
        }
        let same = nearest.iter().filter(|(_, j)| colors[*j] == colors[i]).count();
        total += same as f64 / k as f64;
    }
    total / n as f64
}

/// ASCII PLY bytes for a colored point set (the viz export format).
pub fn ply_bytes<T: Real>(points: &[[T; 3]], colors: &[[u8; 3]]) -> Result<Vec<u8>> {
    crate::io::write_ply(points, colors)
}

/// Uniform gray used for isosurface exports.
pub const ISO_GRAY: [u8; 3] = [128, 128, 128];

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn palette_is_fixed_and_distinct_enough() {
        let p = palette();
        assert_eq!(p, palette());
        let unique: std::collections::HashSet<[u8; 3]> = p.into_iter().collect();
        assert!(unique.len() >= 60, "palette collapsed to {} colors", unique.len());
    }

    #[test]
    fn probe_ball_stays_inside_and_is_deterministic() {
        let a = probe_ball::<f64>(500, 0.4, 7);
        let b = probe_ball::<f64>(500, 0.4, 7);
        assert_eq!(a, b);
        for p in &a {
            assert!(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 0.16 + 1e-12);
        }
    }

    #[test]
    fn single_field_argmax_colors_uniformlyple() {
        let bank = FieldBank::linear(array![[0.0, 0.0, 1.0]], array![0.0]).unwrap();
        let points = probe_ball::<f64>(100, 1.0, 3);
        let colors = argmax_colors(&bank, &points).unwrap();
        assert!(colors.iter().all(|c| *c == colors[0]));
    }

    #[test]
    fn linear_isosurface_hugs_both_planes() {
        // |z| = 0.5 inside the unit ball.
        let bank = FieldBank::linear(array![[0.0, 0.0, 1.0]], array![0.0]).unwrap();
        let pts = isosurface_points(&bank, 0, 1.0f64, 0.5, ISO_BAND, ISO_GRID).unwrap();
        assert!(!pts.is_empty());
        let mut saw_positive = false;
        let mut saw_negative = false;
        for p in &pts {
            let dist = (p[2].abs() - 0.5).abs();
            assert!(dist < 0.03, "point {p:?} strays {dist} from the planes");
            saw_positive |= p[2] > 0.0;
            saw_negative |= p[2] < 0.0;
        }
        assert!(saw_positive && saw_negative);
    }

    #[test]
    fn quadratic_isosurface_near_unit_sphere() {
        // a = 0, b = 1, d = -1: |p| small near ‖y‖ = 1.
        let bank = FieldBank::quadratic(
            array![[0.0, 0.0, 0.0]],
            array![[1.0, 1.0, 1.0]],
            array![-1.0],
        )
        .unwrap();
        // Small positive level stands in for the η → 0 limit.
        let pts = isosurface_points(&bank, 0, 1.2f64, 0.05, ISO_BAND, ISO_GRID).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 0.05, "radius {r}");
        }
    }

    #[test]
    fn isosurface_rejects_bad_arguments() {
        let bank = FieldBank::linear(array![[0.0, 0.0, 1.0]], array![0.0]).unwrap();
        assert!(isosurface_points(&bank, 1, 1.0f64, 0.5, ISO_BAND, ISO_GRID).is_err());
        assert!(isosurface_points(&bank, 0, 1.0f64, 0.0, ISO_BAND, ISO_GRID).is_err());
        assert!(isosurface_points(&bank, 0, 1.0f64, -0.5, ISO_BAND, ISO_GRID).is_err());
    }

    #[test]
    fn coherence_of_halfspace_coloring_is_high() {
        let points = probe_ball::<f64>(800, 1.0, 5);
        let colors: Vec<[u8; 3]> = points
            .iter()
            .map(|p| if p[2] >= 0.0 { [255, 0, 0] } else { [0, 0, 255] })
            .collect();
        let c = color_coherence(&points, &colors, 8);
        assert!(c > 0.85, "coherence {c}");
        let noisy: Vec<[u8; 3]> = points
            .iter()
            .enumerate()
            .map(|(i, _)| if i % 2 == 0 { [255, 0, 0] } else { [0, 0, 255] })
            .collect();
        let cn = color_coherence(&points, &noisy, 8);
        assert!(cn < 0.7, "checkerboard coherence {cn}");
    }
}
