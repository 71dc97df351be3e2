//! `eval`: metrics of a checkpoint on a dataset's test split.

use std::path::PathBuf;

use potconv::io::atomic_write;
use potconv::model::load_checkpoint;
use potconv::train::evaluate;

use crate::data::DataSource;
use crate::{CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Data source: a dataset directory or a synthetic spec.
    #[arg(long)]
    pub data: String,
    /// Optional CSV output: one `split,loss,oa,macc,miou` row.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for synthetic data sources.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Point count when sampling OFF meshes.
    #[arg(long, default_value_t = 1024)]
    pub off_points: usize,
}

pub fn run(args: Args) -> CmdResult {
    if !args.ckpt.exists() {
        return Err(Failure::config(format!("checkpoint {} does not exist", args.ckpt.display())));
    }
    let model = load_checkpoint(&args.ckpt).map_err(Failure::from)?;
    let source = DataSource::parse(&args.data).map_err(Failure::from)?;
    let (_, test) = source.load(args.seed, args.off_points)?;

    let (loss, metrics) = evaluate(&model, &test).map_err(Failure::from)?;
    eprintln!(
        "test: loss {:.4}, oa {:.4}, macc {:.4}, miou {:.4} over {} clouds",
        loss,
        metrics.oa,
        metrics.macc,
        metrics.miou,
        test.len()
    );
    if let Some(path) = args.out {
        let csv = format!(
            "split,loss,oa,macc,miou\ntest,{},{},{},{}\n",
            loss, metrics.oa, metrics.macc, metrics.miou
        );
        atomic_write(&path, csv.as_bytes()).map_err(Failure::from)?;
        eprintln!("metrics: {}", path.display());
    }
    Ok(())
}
