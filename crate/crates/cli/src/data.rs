//! Data sources shared by the subcommands: inline synthetic specs and
//! dataset directories with a manifest.
//!
//! A synthetic spec looks like
//! `synthetic:4class[:points=256][:train=2000][:test=400][:noise=0.01][:bias]`.
//! A directory must hold `manifest.csv` with the header `file,class_id,split`
//! and one row per `.xyz` (or `.off`) file.

use std::path::{Path, PathBuf};

use potconv::train::{gen_synthetic, Dataset, ShapeClass, SynthSpec};
use potconv::{Error, PointCloud, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub n_points: usize,
    pub noise: f64,
    pub density_bias: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSource),
    Directory(PathBuf),
}

impl DataSource {
    pub fn parse(raw: &str) -> Result<Self> {
        if let Some(rest) = raw.strip_prefix("synthetic:") {
            let mut parts = rest.split(':');
            let family = parts.next().unwrap_or_default();
            if family != "4class" {
                return Err(Error::invalid(format!(
                    "unknown synthetic family `{family}` (supported: 4class)"
                )));
            }
            let mut source = SyntheticSource {
                train_per_class: 500,
                test_per_class: 100,
                n_points: 256,
                noise: 0.01,
                density_bias: false,
            };
            for part in parts {
                if part == "bias" {
                    source.density_bias = true;
                    continue;
                }
                let (key, value) = part.split_once('=').ok_or_else(|| {
                    Error::invalid(format!("bad synthetic option `{part}`, expected key=value"))
                })?;
                let int = |v: &str| -> Result<usize> {
                    v.parse()
                        .map_err(|_| Error::invalid(format!("bad value for `{key}`: `{v}`")))
                };
                match key {
                    "points" => source.n_points = int(value)?,
                    "train" => {
                        let total = int(value)?;
                        source.train_per_class = total.div_ceil(ShapeClass::ALL.len());
                    }
                    "test" => {
                        let total = int(value)?;
                        source.test_per_class = total.div_ceil(ShapeClass::ALL.len());
                    }
                    "noise" => {
                        source.noise = value.parse().map_err(|_| {
                            Error::invalid(format!("bad value for `noise`: `{value}`"))
                        })?;
                    }
                    other => {
                        return Err(Error::invalid(format!("unknown synthetic option `{other}`")))
                    }
                }
            }
            Ok(DataSource::Synthetic(source))
        } else {
            Ok(DataSource::Directory(PathBuf::from(raw)))
        }
    }

    /// Loads both splits. Synthetic sources derive split seeds from `seed`;
    /// directory sources use the manifest's split column.
    pub fn load(&self, seed: u64, off_points: usize) -> Result<(Dataset, Dataset)> {
        match self {
            DataSource::Synthetic(s) => {
                let train = gen_synthetic(&SynthSpec {
                    classes: ShapeClass::ALL.to_vec(),
                    per_class: s.train_per_class,
                    n_points: s.n_points,
                    noise: s.noise,
                    density_bias: s.density_bias,
                    seed: seed.wrapping_mul(2).wrapping_add(1),
                })?;
                let test = gen_synthetic(&SynthSpec {
                    classes: ShapeClass::ALL.to_vec(),
                    per_class: s.test_per_class,
                    n_points: s.n_points,
                    noise: s.noise,
                    density_bias: s.density_bias,
                    seed: seed.wrapping_mul(2).wrapping_add(0x5EED_0002),
                })?;
                Ok((train, test))
            }
            DataSource::Directory(dir) => load_directory(dir, off_points),
        }
    }
}

fn load_directory(dir: &Path, off_points: usize) -> Result<(Dataset, Dataset)> {
    let manifest_path = dir.join("manifest.csv");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        Error::invalid(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut max_class = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let number = idx + 1;
        if idx == 0 {
            if line.trim() != "file,class_id,split" {
                return Err(Error::parse(number, "manifest header must be `file,class_id,split`"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::parse(number, format!("expected 3 columns, got {}", cols.len())));
        }
        let class_id: usize = cols[1]
            .parse()
            .map_err(|_| Error::parse(number, format!("bad class id `{}`", cols[1])))?;
        max_class = max_class.max(class_id);
        let cloud = load_cloud(&dir.join(cols[0]), class_id, off_points, idx as u64)?;
        match cols[2] {
            "train" => train.push(cloud),
            "test" => test.push(cloud),
            other => {
                return Err(Error::parse(
                    number,
                    format!("split must be `train` or `test`, got `{other}`"),
                ))
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("manifest must list both train and test clouds"));
    }
    let classes = max_class + 1;
    Ok((Dataset { clouds: train, classes }, Dataset { clouds: test, classes }))
}

fn load_cloud(path: &Path, class_id: usize, off_points: usize, seed: u64) -> Result<PointCloud<f32>> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let mut cloud = match ext {
        "off" => {
            let mesh = potconv::io::parse_off(&bytes)?;
            potconv::io::sample_mesh_surface::<f32>(&mesh, off_points, seed)?
        }
        _ => {
            let mut cloud = potconv::io::parse_xyz::<f32>(&bytes)?;
            cloud.normalize_unit_ball();
            cloud
        }
    };
    cloud = cloud.with_class_id(class_id);
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_synthetic_spec_options() {
        let s = DataSource::parse("synthetic:4class:points=128:train=40:test=8:bias").unwrap();
        match s {
            DataSource::Synthetic(s) => {
                assert_eq!(s.n_points, 128);
                assert_eq!(s.train_per_class, 10);
                assert_eq!(s.test_per_class, 2);
                assert!(s.density_bias);
            }
            _ => panic!("expected synthetic source"),
        }
    }

    #[test]
    fn rejects_unknown_options() {
        assert!(DataSource::parse("synthetic:4class:banana=1").is_err());
        assert!(DataSource::parse("synthetic:5class").is_err());
    }

    #[test]
    fn plain_path_is_a_directory_source() {
        match DataSource::parse("/tmp/somewhere").unwrap() {
            DataSource::Directory(p) => assert_eq!(p, PathBuf::from("/tmp/somewhere")),
            _ => panic!("expected directory source"),
        }
    }
}
