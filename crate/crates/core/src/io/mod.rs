//! File ingestion and export: OFF meshes, XYZ point clouds, colored ASCII
//! PLY, and mesh surface sampling.
//!
//! Parsers are total over arbitrary bytes: any input produces either a value
//! or a structured error with a 1-based line number, and allocations are
//! bounded by the input size (header counts are never trusted for
//! preallocation).

mod off;
mod ply;
mod sample;
mod xyz;

pub use off::{parse_off, MeshOff};
pub use ply::write_ply_colored;
pub(crate) use ply::write_ply;
pub use sample::{sample_mesh_surface, sample_mesh_surface_raw};
pub use xyz::{parse_xyz, write_xyz};

use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to `path` atomically: a sibling temp file is written and
/// renamed over the target, so an interrupted run never leaves a truncated
/// file behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = path.with_file_name(format!(".{file_name}.tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}
