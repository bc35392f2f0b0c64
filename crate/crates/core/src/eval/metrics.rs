//! Prediction and scoring.
//!
//! Two accuracy readings are reported: `accuracy_cell` is the fraction of
//! test cells whose argmax matches the true label (the headline number), and
//! `accuracy_label_level` expands each cell into per-label true/false
//! positives/negatives before forming (TP+TN)/(TP+TN+FP+FN) — it runs much
//! higher because every extra label in a block contributes true negatives.
//! Macro-F1 averages per-label F1 over the labels that occur in the test
//! set.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, AttributedGraph, CellMask};
use crate::numerics::DenseMatrix;

/// Per-label tallies plus derived precision/recall.
#[derive(Debug, Clone, Serialize)]
pub struct LabelStats {
    pub attribute: String,
    pub label: String,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub accuracy_cell: f64,
    pub accuracy_label_level: f64,
    pub macro_f1: f64,
    pub per_attribute_accuracy: BTreeMap<String, f64>,
    pub labels: Vec<LabelStats>,
    pub n_test_cells: usize,
}

/// Argmax within each attribute block, returned as 1-based labels in an
/// `N x L` row-major vector. Ties break to the lowest label index.
pub fn predict_labels(x_hat: &DenseMatrix, schema: &AttributeSchema) -> Vec<usize> {
    let n = x_hat.rows();
    let l = schema.n_types();
    let mut out = Vec::with_capacity(n * l);
    for u in 0..n {
        let row = x_hat.row(u);
        for j in 0..l {
            let (start, end) = schema.block(j);
            let mut best = start;
            for c in start + 1..end {
                if row[c] > row[best] {
                    best = c;
                }
            }
            out.push(best - start + 1);
        }
    }
    out
}

/// Fraction of masked cells whose prediction matches the graph's label.
pub fn cell_accuracy(
    predictions: &[usize],
    graph: &AttributedGraph,
    mask: &CellMask,
) -> Result<f64> {
    let l = graph.schema().n_types();
    let cells = mask.cells();
    if cells.is_empty() {
        return Err(Error::Config("accuracy over an empty cell mask".into()));
    }
    let mut correct = 0;
    for &(u, j) in &cells {
        if predictions[u * l + j] == graph.assignment(u, j) {
            correct += 1;
        }
    }
    Ok(correct as f64 / cells.len() as f64)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LabelTally {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Cell accuracy, label-level accuracy, and the per-label tallies backing
/// them. In the label-level expansion a correct cell yields one TP plus
/// `block - 1` TNs; an incorrect cell yields one FP, one FN, and `block - 2`
/// TNs.
pub fn accuracy(
    predictions: &[usize],
    graph: &AttributedGraph,
    test: &CellMask,
) -> Result<(f64, f64, Vec<LabelTally>)> {
    let schema = graph.schema();
    let l = schema.n_types();
    let cells = test.cells();
    if cells.is_empty() {
        return Err(Error::Config("accuracy over an empty test mask".into()));
    }
    let mut tallies = vec![LabelTally::default(); schema.n_labels()];
    let mut correct = 0;
    for &(u, j) in &cells {
        let truth = graph.assignment(u, j);
        debug_assert_ne!(truth, 0, "test mask covers an unobserved cell");
        let pred = predictions[u * l + j];
        let offset = schema.offset(j);
        let truth_col = offset + truth - 1;
        let pred_col = offset + pred - 1;
        if pred == truth {
            correct += 1;
            tallies[truth_col].tp += 1;
        } else {
            tallies[pred_col].fp += 1;
            tallies[truth_col].fn_ += 1;
        }
        for (c, tally) in tallies
            .iter_mut()
            .enumerate()
            .take(offset + schema.label_count(j))
            .skip(offset)
        {
            if c != truth_col && (pred == truth || c != pred_col) {
                tally.tn += 1;
            }
        }
    }
    let accuracy_cell = correct as f64 / cells.len() as f64;
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for t in &tallies {
        tp += t.tp;
        tn += t.tn;
        fp += t.fp;
        fn_ += t.fn_;
    }
    let accuracy_label_level = (tp + tn) as f64 / (tp + tn + fp + fn_) as f64;
    Ok((accuracy_cell, accuracy_label_level, tallies))
}

/// Macro-averaged F1 over labels present in the test set (`tp + fn > 0`).
/// Precision with an empty denominator counts as 0.
pub fn macro_f1(tallies: &[LabelTally]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0;
    for t in tallies {
        if t.tp + t.fn_ == 0 {
            continue;
        }
        let precision = if t.tp + t.fp == 0 {
            0.0
        } else {
            t.tp as f64 / (t.tp + t.fp) as f64
        };
        let recall = t.tp as f64 / (t.tp + t.fn_) as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        sum += f1;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Config(
            "macro-F1 undefined: no label occurs in the test set".into(),
        ));
    }
    Ok(sum / count as f64)
}

/// Cell accuracy restricted to each attribute type; types without test
/// cells are absent from the map.
pub fn per_attribute_accuracy(
    predictions: &[usize],
    graph: &AttributedGraph,
    test: &CellMask,
) -> BTreeMap<String, f64> {
    let schema = graph.schema();
    let l = schema.n_types();
    let mut correct = vec![0usize; l];
    let mut total = vec![0usize; l];
    for (u, j) in test.cells() {
        total[j] += 1;
        if predictions[u * l + j] == graph.assignment(u, j) {
            correct[j] += 1;
        }
    }
    let mut map = BTreeMap::new();
    for j in 0..l {
        if total[j] > 0 {
            map.insert(
                schema.types()[j].name.clone(),
                correct[j] as f64 / total[j] as f64,
            );
        }
    }
    map
}

/// Assembles the full report from predictions and a test mask.
pub fn compute_metrics(
    predictions: &[usize],
    graph: &AttributedGraph,
    test: &CellMask,
) -> Result<MetricsReport> {
    let schema = graph.schema();
    let (accuracy_cell, accuracy_label_level, tallies) = accuracy(predictions, graph, test)?;
    let macro_f1 = macro_f1(&tallies)?;
    let per_attribute = per_attribute_accuracy(predictions, graph, test);
    let mut labels = Vec::with_capacity(schema.n_labels());
    for j in 0..schema.n_types() {
        let t = &schema.types()[j];
        for (i, label_name) in t.labels.iter().enumerate() {
            let tally = &tallies[schema.offset(j) + i];
            let precision = if tally.tp + tally.fp == 0 {
                0.0
            } else {
                tally.tp as f64 / (tally.tp + tally.fp) as f64
            };
            let recall = if tally.tp + tally.fn_ == 0 {
                0.0
            } else {
                tally.tp as f64 / (tally.tp + tally.fn_) as f64
            };
            labels.push(LabelStats {
                attribute: t.name.clone(),
                label: label_name.clone(),
                tp: tally.tp,
                tn: tally.tn,
                fp: tally.fp,
                fn_: tally.fn_,
                precision,
                recall,
            });
        }
    }
    Ok(MetricsReport {
        accuracy_cell,
        accuracy_label_level,
        macro_f1,
        per_attribute_accuracy: per_attribute,
        labels,
        n_test_cells: test.count(),
    })
}
