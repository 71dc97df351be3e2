//! `gen-data`: write a synthetic dataset as XYZ files plus a manifest.

use std::fmt::Write as _;
use std::path::PathBuf;

use potconv::io::{atomic_write, write_xyz};
use potconv::train::Dataset;

use crate::data::DataSource;
use crate::{CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Synthetic spec, e.g. synthetic:4class:points=256:train=2000:test=400
    #[arg(long, default_value = "synthetic:4class")]
    pub spec: String,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Generation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: Args) -> CmdResult {
    let source = DataSource::parse(&args.spec).map_err(Failure::from)?;
    if !matches!(source, DataSource::Synthetic(_)) {
        return Err(Failure::config("gen-data needs a synthetic spec"));
    }
    let (train, test) = source.load(args.seed, 0)?;
    std::fs::create_dir_all(&args.out).map_err(potconv::Error::from)?;

    let mut manifest = String::from("file,class_id,split\n");
    let mut write_split = |split: &str, ds: &Dataset, start: usize| -> Result<usize, Failure> {
        let mut index = start;
        for cloud in &ds.clouds {
            let name = format!("cloud_{index:05}.xyz");
            atomic_write(&args.out.join(&name), &write_xyz(cloud))?;
            writeln!(manifest, "{name},{},{split}", cloud.class_id().unwrap_or(0))
                .expect("string write");
            index += 1;
        }
        Ok(index)
    };
    let next = write_split("train", &train, 0)?;
    write_split("test", &test, next)?;
    atomic_write(&args.out.join("manifest.csv"), manifest.as_bytes())?;
    eprintln!(
        "wrote {} train and {} test clouds to {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}
