//! Sparse-input tolerance sweep: evaluate trained classifiers on farthest
//! point subsampled test clouds at decreasing point counts.

use super::{compute_metrics, Dataset};
use crate::error::{Error, Result};
use crate::geometry::farthest_point_sampling;
use crate::layers::loss::argmax_rows;
use crate::model::{KernelFamily, Model, Task};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: KernelFamily,
    pub points: usize,
    pub oa: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn oa_for(&self, family: KernelFamily, points: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.points == points)
            .map(|r| r.oa)
    }
}

/// Evaluates each model at each point count. Test clouds are downsampled by
/// farthest point sampling (seed index 0) for determinism; counts at or above
/// a cloud's size leave it untouched.
pub fn sparse_sweep(
    models: &[(KernelFamily, Model<f32>)],
    test: &Dataset,
    counts: &[usize],
) -> Result<SweepTable> {
    if models.is_empty() {
        return Err(Error::invalid("sweep needs at least one model"));
    }
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::invalid("sweep needs positive point counts"));
    }
    if test.is_empty() {
        return Err(Error::invalid("sweep needs a non-empty test set"));
    }

    let mut table = SweepTable::default();
    for (family, model) in models {
        if model.config().task != Task::Classify {
            return Err(Error::invalid("sparse sweep expects classification models"));
        }
        for &count in counts {
            let mut preds = Vec::with_capacity(test.len());
            let mut labels = Vec::with_capacity(test.len());
            for cloud in &test.clouds {
                let sub = if count < cloud.len() {
                    let idx = farthest_point_sampling(cloud, count, 0)?;
                    cloud.subset(&idx)?
                } else {
                    cloud.clone()
                };
                let logits = model.forward_eval(&sub)?;
                preds.push(argmax_rows(&logits)[0]);
                labels.push(
                    cloud
                        .class_id()
                        .ok_or_else(|| Error::invalid("sweep clouds need class ids"))?,
                );
            }
            let metrics = compute_metrics(&preds, &labels, model.config().classes)?;
            table.rows.push(SweepRow { family: *family, points: count, oa: metrics.oa });
        }
    }
    Ok(table)
}

/// Serializes the sweep as `family,points,oa`.
pub fn write_sweep_csv(table: &SweepTable) -> Vec<u8> {
    use std::fmt::Write;
    let mut out = String::from("family,points,oa\n");
    for row in &table.rows {
        writeln!(out, "{},{},{}", row.family.as_str(), row.points, row.oa).unwrap();
    }
    out.into_bytes()
}
