//! Accuracy, confusion matrices, and evaluation reports.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Fraction of exact matches between predictions and truths.
pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty set".into()));
    }
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

/// C×C confusion counts; entry (i, j) counts truth i predicted j.
pub fn confusion(
    predictions: &[usize],
    truths: &[usize],
    class_count: usize,
) -> Result<Vec<Vec<u64>>> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty set".into()));
    }
    let mut matrix = vec![vec![0u64; class_count]; class_count];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= class_count || t >= class_count {
            return Err(Error::InvalidArgument(format!(
                "label ({t}, {p}) outside class count {class_count}"
            )));
        }
        matrix[t][p] += 1;
    }
    Ok(matrix)
}

/// A full evaluation: accuracy, per-class precision/recall, confusion.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Which task the report covers ("genre", "show", ...).
    pub axis: String,
    pub class_names: Vec<String>,
    pub total: usize,
    pub accuracy: f64,
    /// Per-class precision; 0 when the class was never predicted.
    pub precision: Vec<f64>,
    /// Per-class recall; 0 when the class never occurs in truth.
    pub recall: Vec<f64>,
    /// Rows = truth, columns = prediction.
    pub confusion: Vec<Vec<u64>>,
}

/// Build a report over dense class ids.
pub fn evaluate(
    axis: &str,
    predictions: &[usize],
    truths: &[usize],
    class_names: &[String],
) -> Result<EvalReport> {
    let class_count = class_names.len();
    let matrix = confusion(predictions, truths, class_count)?;
    let acc = accuracy(predictions, truths)?;
    let mut precision = vec![0.0; class_count];
    let mut recall = vec![0.0; class_count];
    for c in 0..class_count {
        let truth_total: u64 = matrix[c].iter().sum();
        let pred_total: u64 = (0..class_count).map(|t| matrix[t][c]).sum();
        if truth_total > 0 {
            recall[c] = matrix[c][c] as f64 / truth_total as f64;
        }
        if pred_total > 0 {
            precision[c] = matrix[c][c] as f64 / pred_total as f64;
        }
    }
    Ok(EvalReport {
        axis: axis.to_string(),
        class_names: class_names.to_vec(),
        total: truths.len(),
        accuracy: acc,
        precision,
        recall,
        confusion: matrix,
    })
}

impl EvalReport {
    /// Machine-readable TSV; formatting is deterministic so identical
    /// evaluations serialize to identical bytes.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("axis\t{}\n", self.axis));
        out.push_str(&format!("total\t{}\n", self.total));
        out.push_str(&format!("accuracy\t{}\n", self.accuracy));
        for (c, name) in self.class_names.iter().enumerate() {
            out.push_str(&format!(
                "class\t{c}\t{name}\t{}\t{}\n",
                self.precision[c], self.recall[c]
            ));
        }
        for (c, row) in self.confusion.iter().enumerate() {
            out.push_str(&format!("confusion\t{c}"));
            for &v in row {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Short human-readable block for logs and stdout.
    pub fn summary(&self) -> String {
        let hits: u64 = (0..self.class_names.len())
            .map(|c| self.confusion[c][c])
            .sum();
        let mut out = format!(
            "{}: accuracy {:.4} ({hits}/{})\n",
            self.axis, self.accuracy, self.total
        );
        for (c, name) in self.class_names.iter().enumerate() {
            out.push_str(&format!(
                "  {name}\tprecision {:.4}\trecall {:.4}\n",
                self.precision[c], self.recall[c]
            ));
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}
