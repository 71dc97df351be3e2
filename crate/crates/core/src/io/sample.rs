//! Area-weighted surface sampling of triangle meshes.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::off::MeshOff;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::real::Real;

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Samples `n` surface points without normalization: area-weighted triangle
/// selection, uniform barycentric placement, face normals. Deterministic per
/// seed.
pub fn sample_mesh_surface_raw<T: Real>(
    mesh: &MeshOff,
    n: usize,
    seed: u64,
) -> Result<PointCloud<T>> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if mesh.faces.is_empty() {
        return Err(Error::invalid("mesh has no faces to sample"));
    }

    // Cumulative areas and unit face normals.
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut face_normals = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0f64;
    for face in &mesh.faces {
        let [a, b, c] = [mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]];
        let cr = cross(sub(b, a), sub(c, a));
        let len = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
        total += 0.5 * len;
        cumulative.push(total);
        if len > 0.0 {
            face_normals.push([cr[0] / len, cr[1] / len, cr[2] / len]);
        } else {
            face_normals.push([0.0, 0.0, 0.0]);
        }
    }
    if total <= 0.0 {
        return Err(Error::invalid("zero-area mesh"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(0.0..total);
        let mut fi = cumulative.partition_point(|&c| c <= t);
        // Degenerate faces carry zero area mass but guard the index anyway.
        if fi >= mesh.faces.len() {
            fi = mesh.faces.len() - 1;
        }
        let face = mesh.faces[fi];
        let [a, b, c] = [mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]];
        let r1: f64 = rng.random_range(0.0..1.0);
        let r2: f64 = rng.random_range(0.0..1.0);
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        positions.push([
            T::of(wa * a[0] + wb * b[0] + wc * c[0]),
            T::of(wa * a[1] + wb * b[1] + wc * c[1]),
            T::of(wa * a[2] + wb * b[2] + wc * c[2]),
        ]);
        let nrm = face_normals[fi];
        normals.push([T::of(nrm[0]), T::of(nrm[1]), T::of(nrm[2])]);
    }
    PointCloud::new(positions)?.with_normals(normals)
}

/// Samples `n` surface points and normalizes the cloud to zero centroid and
/// unit max radius, the form the models ingest.
pub fn sample_mesh_surface<T: Real>(mesh: &MeshOff, n: usize, seed: u64) -> Result<PointCloud<T>> {
    let mut cloud = sample_mesh_surface_raw(mesh, n, seed)?;
    cloud.normalize_unit_ball();
    Ok(cloud)
}
