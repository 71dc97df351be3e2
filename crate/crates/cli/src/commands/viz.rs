//! `viz-fields`: export argmax colorings and isosurface point sets of a
//! checkpoint's potential fields as ASCII PLY.

use std::path::PathBuf;

use potconv::io::atomic_write;
use potconv::model::load_checkpoint;
use potconv::viz;

use crate::{CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Checkpoint with potential-field conv blocks.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Conv block index whose field bank is visualized.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// argmax or isosurface.
    #[arg(long)]
    pub mode: Mode,
    /// Isosurface level (η > 0); isosurface mode only.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Field index for isosurface mode.
    #[arg(long, default_value_t = 0)]
    pub field: usize,
    /// Output PLY path.
    #[arg(long)]
    pub out: PathBuf,
    /// Probe point count for argmax mode.
    #[arg(long, default_value_t = 4096)]
    pub probe_points: usize,
    /// Optional XYZ cloud to color instead of the uniform probe ball
    /// (coordinates are used as local offsets of the kernel domain).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Argmax,
    Isosurface,
}

const PROBE_SEED: u64 = 0x5EED;

pub fn run(args: Args) -> CmdResult {
    if !args.ckpt.exists() {
        return Err(Failure::config(format!("checkpoint {} does not exist", args.ckpt.display())));
    }
    let model = load_checkpoint(&args.ckpt).map_err(Failure::from)?;
    if args.layer >= model.blocks_len() {
        return Err(Failure::config(format!(
            "layer {} out of range: model has {} conv blocks",
            args.layer,
            model.blocks_len()
        )));
    }
    let bank = model.field_bank(args.layer).ok_or_else(|| {
        Failure::config(format!(
            "block {} uses a {} kernel, which has no potential fields",
            args.layer,
            model.config().kernel.as_str()
        ))
    })?;
    let radius = model.block_radius(args.layer).expect("checked above") as f32;

    let (points, colors) = match args.mode {
        Mode::Argmax => {
            let points: Vec<[f32; 3]> = match &args.input {
                Some(path) => {
                    let bytes = std::fs::read(path).map_err(potconv::Error::from)?;
                    potconv::io::parse_xyz::<f32>(&bytes)
                        .map_err(Failure::from)?
                        .positions()
                        .to_vec()
                }
                None => viz::probe_ball(args.probe_points, radius, PROBE_SEED),
            };
            let colors = viz::argmax_colors(bank, &points).map_err(Failure::from)?;
            let coherence = viz::color_coherence(&points, &colors, 8);
            eprintln!(
                "argmax coloring: {} points, {} fields, 8-NN color coherence {:.3}",
                points.len(),
                bank.fields(),
                coherence
            );
            (points, colors)
        }
        Mode::Isosurface => {
            let eta = args
                .eta
                .ok_or_else(|| Failure::config("isosurface mode needs --eta"))?;
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Failure::config("--eta must be positive and finite"));
            }
            let points = viz::isosurface_points(
                bank,
                args.field,
                radius,
                eta,
                viz::ISO_BAND,
                viz::ISO_GRID,
            )
            .map_err(Failure::from)?;
            eprintln!(
                "isosurface |p̃_{}| = {eta} ± {}: {} grid points inside the band",
                args.field,
                viz::ISO_BAND,
                points.len()
            );
            let colors = vec![viz::ISO_GRAY; points.len()];
            (points, colors)
        }
    };

    let ply = viz::ply_bytes(&points, &colors).map_err(Failure::from)?;
    atomic_write(&args.out, &ply).map_err(Failure::from)?;
    eprintln!("ply: {}", args.out.display());
    Ok(())
}
