//! Grouping accuracy and message-level accuracy.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledDataset, TokenizedMessage};
use crate::error::{Error, Result};
use crate::model::TokenClassifier;
use crate::runtime::parse_tokenized;

/// Fraction of messages whose every token label is right.
pub fn message_level_accuracy(predicted: &[Vec<Label>], truth: &[Vec<Label>]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::NoLabels);
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

fn dense_ids<K: Eq + Hash>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut ids: HashMap<&K, usize> = HashMap::new();
    let dense = keys
        .iter()
        .map(|k| {
            let next = ids.len();
            *ids.entry(k).or_insert(next)
        })
        .collect();
    (dense, ids.len())
}

/// Number of messages whose predicted group has exactly the members of their true group.
///
/// Each slice assigns a group key to message `i`; keys are compared only for equality.
pub fn group_correct<P: Eq + Hash, T: Eq + Hash>(predicted: &[P], truth: &[T]) -> Result<usize> {
    if predicted.len() != truth.len() {
        return Err(Error::PartitionMismatch);
    }
    let (p, np) = dense_ids(predicted);
    let (t, nt) = dense_ids(truth);
    let mut p_size = vec![0usize; np];
    let mut t_size = vec![0usize; nt];
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in p.iter().zip(&t) {
        p_size[a] += 1;
        t_size[b] += 1;
        *joint.entry((a, b)).or_default() += 1;
    }
    // The two groups coincide iff their intersection is as large as both.
    Ok(p.iter()
        .zip(&t)
        .filter(|&(&a, &b)| {
            let both = joint[&(a, b)];
            both == p_size[a] && both == t_size[b]
        })
        .count())
}

pub fn group_accuracy<P: Eq + Hash, T: Eq + Hash>(predicted: &[P], truth: &[T]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::NoLabels);
    }
    Ok(group_correct(predicted, truth)? as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub group_accuracy: f64,
    pub message_level_accuracy: f64,
    pub messages: usize,
    pub group_correct: usize,
    pub message_correct: usize,
    pub predicted_groups: usize,
    pub true_groups: usize,
}

/// Parses every labeled message and scores the result against the gold templates.
pub fn evaluate<C: TokenClassifier + ?Sized>(model: &C, dataset: &LabeledDataset) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::NoLabels);
    }
    let parsed = dataset
        .records
        .par_iter()
        .map(|r| parse_tokenized(model, &r.message))
        .collect::<Result<Vec<_>>>()?;
    let predicted_templates: Vec<&str> = parsed.iter().map(|p| p.template.as_str()).collect();
    let true_templates: Vec<&str> = dataset.records.iter().map(|r| r.template.as_str()).collect();
    let message_correct = parsed
        .iter()
        .zip(&dataset.records)
        .filter(|(p, r)| p.labels == r.labels)
        .count();
    let group_correct = group_correct(&predicted_templates, &true_templates)?;
    let n = dataset.len();
    Ok(MetricReport {
        dataset: dataset.source_name.clone(),
        group_accuracy: group_correct as f64 / n as f64,
        message_level_accuracy: message_correct as f64 / n as f64,
        messages: n,
        group_correct,
        message_correct,
        predicted_groups: dense_ids(&predicted_templates).1,
        true_groups: dense_ids(&true_templates).1,
    })
}

pub fn render_table(reports: &[MetricReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.dataset.len())
        .chain(std::iter::once("dataset".len()))
        .max()
        .unwrap_or(0);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>9}  {:>10}\n",
        "dataset", "GA", "MLA", "messages", "predicted", "true_groups"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>8.4}  {:>8}  {:>9}  {:>10}",
            r.dataset,
            r.group_accuracy,
            r.message_level_accuracy,
            r.messages,
            r.predicted_groups,
            r.true_groups
        );
    }
    out
}

/// Replays the gold labels of a dataset; scoring it isolates the metric code.
#[derive(Debug, Clone, Default)]
pub struct OracleClassifier {
    labels: HashMap<String, Vec<f64>>,
}

impl OracleClassifier {
    pub fn new(dataset: &LabeledDataset) -> OracleClassifier {
        let mut labels = HashMap::new();
        for r in &dataset.records {
            labels
                .entry(r.message.raw.clone())
                .or_insert_with(|| r.labels.iter().map(|l| l.target()).collect());
        }
        OracleClassifier { labels }
    }
}

impl TokenClassifier for OracleClassifier {
    fn token_probabilities(&self, m: &TokenizedMessage) -> Result<Vec<f64>> {
        Ok(self
            .labels
            .get(&m.raw)
            .cloned()
            .unwrap_or_else(|| vec![0.0; m.len()]))
    }
}

/// Labels every token with the same probability.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier(pub f64);

impl TokenClassifier for ConstantClassifier {
    fn token_probabilities(&self, m: &TokenizedMessage) -> Result<Vec<f64>> {
        Ok(vec![self.0; m.len()])
    }
}
