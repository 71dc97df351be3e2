//! `train`: fit a model on a data source, write checkpoint + metrics CSV.

use std::path::PathBuf;

use potconv::io::atomic_write;
use potconv::model::{save_checkpoint, Model, Task};
use potconv::train::{train_loop, write_metrics_csv};

use crate::commands::{echo_config, parse_kernel, FileConfig};
use crate::data::DataSource;
use crate::{CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Data source: a dataset directory or a synthetic spec.
    #[arg(long)]
    pub data: String,
    /// Kernel family (potential_linear, potential_linear_normal,
    /// potential_quadratic, potential_mlp, discrete, continuous).
    #[arg(long, default_value = "potential_quadratic")]
    pub kernel: String,
    /// classify or segment.
    #[arg(long, default_value = "classify")]
    pub task: String,
    /// Optional TOML config with [model] and [train] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV path (default: the checkpoint path with .metrics.csv).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Seed for data, initialization, and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Point count when sampling OFF meshes from a directory source.
    #[arg(long, default_value_t = 1024)]
    pub off_points: usize,
}

pub fn run(args: Args) -> CmdResult {
    let file = FileConfig::load(args.config.as_deref())?;
    let task: Task = args.task.parse().map_err(|e: potconv::Error| Failure::config(e.to_string()))?;
    let kernel = parse_kernel(&args.kernel)?;

    let source = DataSource::parse(&args.data).map_err(Failure::from)?;
    let (train, test) = source.load(args.seed, args.off_points)?;

    let classes = match task {
        Task::Classify => train.classes,
        Task::Segment => {
            // Part vocabulary: the largest label seen across both splits.
            let max_label = train
                .clouds
                .iter()
                .chain(&test.clouds)
                .filter_map(|c| c.labels().and_then(|l| l.iter().max().copied()))
                .max()
                .ok_or_else(|| Failure::config("segmentation data carries no labels"))?;
            max_label + 1
        }
    };

    let model_config = file.model_config(task, kernel, classes, args.seed);
    model_config.validate().map_err(Failure::from)?;
    let mut train_config = file.train.clone();
    train_config.seed = args.seed;
    train_config.validate().map_err(Failure::from)?;
    echo_config(&model_config, Some(&train_config), &args.data);

    let mut model = Model::<f32>::new_initialized(model_config).map_err(Failure::from)?;
    let records = train_loop(&mut model, &train, &test, &train_config).map_err(Failure::from)?;

    save_checkpoint(&model, &args.out).map_err(Failure::from)?;
    let metrics_path = args
        .metrics
        .unwrap_or_else(|| args.out.with_extension("metrics.csv"));
    atomic_write(&metrics_path, &write_metrics_csv(&records)).map_err(Failure::from)?;

    if let Some(last) = records.last() {
        eprintln!(
            "final epoch {}: test loss {:.4}, oa {:.4}, macc {:.4}, miou {:.4}",
            last.epoch, last.loss, last.oa, last.macc, last.miou
        );
    }
    eprintln!("checkpoint: {}", args.out.display());
    eprintln!("metrics: {}", metrics_path.display());
    Ok(())
}
