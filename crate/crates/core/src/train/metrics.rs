//! Classification/segmentation metrics: overall accuracy, mean per-class
//! accuracy, and mean intersection-over-union.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Metrics {
    pub oa: f64,
    pub macc: f64,
    pub miou: f64,
    /// IoU per class; NaN for classes absent from the ground truth.
    pub per_class_iou: Vec<f64>,
    /// `confusion[(truth, prediction)]`.
    pub confusion: Array2<usize>,
}

/// Computes metrics from aligned prediction/label lists.
///
/// Mean per-class accuracy and mean IoU average over the classes present in
/// the ground truth; `IoU_c = TP / (TP + FP + FN)`.
pub fn compute_metrics(
    predictions: &[usize],
    labels: &[usize],
    class_count: usize,
) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::invalid("empty prediction list"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if class_count == 0 {
        return Err(Error::invalid("class count must be positive"));
    }
    let mut confusion = Array2::zeros((class_count, class_count));
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= class_count || l >= class_count {
            return Err(Error::invalid(format!(
                "class id out of range: prediction {p}, label {l}, classes {class_count}"
            )));
        }
        confusion[[l, p]] += 1;
    }

    let total: usize = confusion.iter().sum();
    let correct: usize = (0..class_count).map(|c| confusion[[c, c]]).sum();
    let oa = correct as f64 / total as f64;

    let mut recalls = Vec::new();
    let mut ious_present = Vec::new();
    let mut per_class_iou = vec![f64::NAN; class_count];
    for c in 0..class_count {
        let tp = confusion[[c, c]];
        let truth: usize = confusion.row(c).sum();
        let predicted: usize = confusion.column(c).sum();
        if truth == 0 {
            continue; // class absent from the ground truth
        }
        recalls.push(tp as f64 / truth as f64);
        let denom = truth + predicted - tp; // TP + FN + FP
        let iou = tp as f64 / denom as f64;
        per_class_iou[c] = iou;
        ious_present.push(iou);
    }
    let macc = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let miou = ious_present.iter().sum::<f64>() / ious_present.len() as f64;

    Ok(Metrics { oa, macc, miou, per_class_iou, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let labels = vec![0, 1, 2, 1, 0];
        let m = compute_metrics(&labels, &labels, 3).unwrap();
        assert_eq!(m.oa, 1.0);
        assert_eq!(m.macc, 1.0);
        assert_eq!(m.miou, 1.0);
    }

    #[test]
    fn all_zero_predictions_on_balanced_two_class() {
        // Hand-computed confusion: [[50, 0], [50, 0]].
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let preds = vec![0usize; 100];
        let m = compute_metrics(&preds, &labels, 2).unwrap();
        assert_eq!(m.oa, 0.5);
        assert_eq!(m.macc, 0.5);
        assert_eq!(m.per_class_iou[0], 0.5);
        assert_eq!(m.per_class_iou[1], 0.0);
        assert_eq!(m.miou, 0.25);
    }

    #[test]
    fn confusion_rows_sum_to_truth_counts() {
        let labels = vec![0, 0, 1, 2, 2, 2];
        let preds = vec![0, 1, 1, 0, 2, 2];
        let m = compute_metrics(&preds, &labels, 3).unwrap();
        assert_eq!(m.confusion.row(0).sum(), 2);
        assert_eq!(m.confusion.row(1).sum(), 1);
        assert_eq!(m.confusion.row(2).sum(), 3);
        let trace: usize = (0..3).map(|c| m.confusion[[c, c]]).sum();
        assert_eq!(trace as f64 / 6.0, m.oa);
    }

    #[test]
    fn empty_and_out_of_range_are_invalid() {
        assert!(compute_metrics(&[], &[], 2).is_err());
        assert!(compute_metrics(&[2], &[0], 2).is_err());
        assert!(compute_metrics(&[0], &[5], 2).is_err());
    }

    #[test]
    fn absent_class_is_excluded_from_means() {
        // Class 2 never appears in labels.
        let labels = vec![0, 0, 1, 1];
        let preds = vec![0, 2, 1, 1];
        let m = compute_metrics(&preds, &labels, 3).unwrap();
        assert!(m.per_class_iou[2].is_nan());
        assert!((m.macc - (0.5 + 1.0) / 2.0).abs() < 1e-12);
        assert!(m.oa > 0.0 && m.miou > 0.0);
    }
}
