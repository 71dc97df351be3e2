pub mod eval;
pub mod gen_data;
pub mod gradcheck;
pub mod sweep;
pub mod train;
pub mod viz;

use potconv::model::{KernelFamily, ModelConfig, Task};
use potconv::train::TrainConfig;
use serde::Deserialize;

use crate::Failure;

/// Optional TOML config file: `[model]` and `[train]` sections, both
/// defaulting field-by-field. Command-line flags override the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelFileConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

/// `[model]` section; `task`, `kernel`, and `seed` come from flags.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelFileConfig {
    pub widths: Vec<usize>,
    pub radii: Vec<f64>,
    pub subsample: Vec<usize>,
    pub classes: usize,
    pub max_neighbors: usize,
}

impl Default for ModelFileConfig {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            widths: d.widths,
            radii: d.radii,
            subsample: d.subsample,
            classes: d.classes,
            max_neighbors: d.max_neighbors,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::config(format!("bad config {}: {e}", path.display())))
    }

    pub fn model_config(
        &self,
        task: Task,
        kernel: KernelFamily,
        classes: usize,
        seed: u64,
    ) -> ModelConfig {
        ModelConfig {
            task,
            kernel,
            widths: self.model.widths.clone(),
            radii: self.model.radii.clone(),
            subsample: self.model.subsample.clone(),
            classes,
            max_neighbors: self.model.max_neighbors,
            seed,
        }
    }
}

/// Echoes the fully resolved configuration to stderr, one line per field
/// group, so every run is reproducible from its log.
pub fn echo_config(model: &ModelConfig, train: Option<&TrainConfig>, data: &str) {
    eprintln!("config.data: {data}");
    eprintln!(
        "config.model: task={:?} kernel={} widths={:?} radii={:?} subsample={:?} classes={} max_neighbors={} seed={}",
        model.task,
        model.kernel.as_str(),
        model.widths,
        model.radii,
        model.subsample,
        model.classes,
        model.max_neighbors,
        model.seed
    );
    if let Some(t) = train {
        eprintln!(
            "config.train: epochs={} batch={} optimizer={:?} lr={} decay={}x every {} weight_decay={} seed={} augment={:?}",
            t.epochs,
            t.batch_size,
            t.optimizer,
            t.lr,
            t.decay_factor,
            t.decay_every,
            t.weight_decay,
            t.seed,
            t.augment
        );
    }
}

pub fn parse_kernel(raw: &str) -> Result<KernelFamily, Failure> {
    raw.parse::<KernelFamily>().map_err(|e| Failure::config(e.to_string()))
}
