//! Voxel-weighted segmentation accuracy.

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Accuracy of a predicted labeling against truth, counted over voxels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Hit rate per label; `None` for labels absent from the truth.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Mean of the hit rates of labels present in the truth.
    pub average_per_class: f64,
    pub global_accuracy: f64,
    /// `confusion[truth][predicted]`, in voxels.
    pub confusion: Vec<Vec<u64>>,
}

pub fn evaluate(predicted: &[usize], truth: &[usize], sizes: &[u64], n_labels: usize) -> Result<EvalReport, CliError> {
    if predicted.len() != truth.len() || truth.len() != sizes.len() {
        return Err(CliError::Mismatch(format!(
            "prediction has {} segments, truth {}, sizes {}",
            predicted.len(),
            truth.len(),
            sizes.len()
        )));
    }
    if let Some(&l) = predicted.iter().chain(truth).find(|&&l| l >= n_labels) {
        return Err(CliError::Mismatch(format!("label {l} out of range for {n_labels} labels")));
    }
    let mut confusion = vec![vec![0u64; n_labels]; n_labels];
    for ((&p, &t), &w) in predicted.iter().zip(truth).zip(sizes) {
        confusion[t][p] += w;
    }
    let total: u64 = sizes.iter().sum();
    let correct: u64 = (0..n_labels).map(|c| confusion[c][c]).sum();
    let per_class_accuracy: Vec<Option<f64>> = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: u64 = row.iter().sum();
            (n > 0).then(|| row[c] as f64 / n as f64)
        })
        .collect();
    let present: Vec<f64> = per_class_accuracy.iter().flatten().copied().collect();
    let average_per_class = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(EvalReport {
        per_class_accuracy,
        average_per_class,
        global_accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        confusion,
    })
}
