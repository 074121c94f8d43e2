use crate::error::{Error, Result};
use crate::kernels::tensor::{dot, log_sum_exp, softmax};

pub const PROBABILITY_CLAMP: f64 = 1e-7;
pub const DEFAULT_LAMBDA: f64 = 0.01;

fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
}

/// Binary cross-entropy of one prediction and its gradient w.r.t. the logit.
///
/// The gradient is zero where the clamp is active.
pub fn bce_with_grad(p: f64, y: f64) -> (f64, f64) {
    let pc = clamp_probability(p);
    let loss = -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
    let grad = if pc == p { p - y } else { 0.0 };
    (loss, grad)
}

/// Mean binary cross-entropy over a batch; `labels` are 1.0 for parameters, 0.0 otherwise.
pub fn classification_loss(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: probabilities.len(),
            right: labels.len(),
        });
    }
    if probabilities.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce_with_grad(p, y).0)
        .sum();
    Ok(total / probabilities.len() as f64)
}

/// An anchor context vector, one similar vector and the dissimilar set.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveSample {
    pub anchor: Vec<f64>,
    pub similar: Vec<f64>,
    pub dissimilar: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub similar: Vec<f64>,
    pub dissimilar: Vec<Vec<f64>>,
}

impl ContrastiveSample {
    fn check(&self) -> Result<()> {
        if self.dissimilar.is_empty() {
            return Err(Error::NoNegatives);
        }
        let n = self.anchor.len();
        for v in std::iter::once(&self.similar).chain(&self.dissimilar) {
            if v.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// `−log( exp(v·v_s) / Σ_d exp(v·v_d) )`.
///
/// The denominator holds only the dissimilar terms unless `include_positive` is set, so
/// the value can be negative.
pub fn contrastive_loss(sample: &ContrastiveSample, include_positive: bool) -> Result<f64> {
    Ok(contrastive_loss_grad(sample, include_positive)?.loss)
}

pub fn contrastive_loss_grad(sample: &ContrastiveSample, include_positive: bool) -> Result<ContrastiveGrad> {
    sample.check()?;
    let v = &sample.anchor;
    let pos = dot(v, &sample.similar);
    let mut scores: Vec<f64> = sample.dissimilar.iter().map(|d| dot(v, d)).collect();
    if include_positive {
        scores.push(pos);
    }
    let loss = log_sum_exp(&scores) - pos;
    let weights = softmax(&scores);

    let mut d_pos = -1.0;
    if include_positive {
        d_pos += weights[weights.len() - 1];
    }
    let mut d_anchor: Vec<f64> = sample.similar.iter().map(|x| x * d_pos).collect();
    let d_similar: Vec<f64> = v.iter().map(|x| x * d_pos).collect();
    let mut d_dissimilar = Vec::with_capacity(sample.dissimilar.len());
    for (d, w) in sample.dissimilar.iter().zip(&weights) {
        for (a, x) in d_anchor.iter_mut().zip(d) {
            *a += w * x;
        }
        d_dissimilar.push(v.iter().map(|x| x * w).collect());
    }
    Ok(ContrastiveGrad {
        loss,
        anchor: d_anchor,
        similar: d_similar,
        dissimilar: d_dissimilar,
    })
}

pub fn total_loss(classification: f64, contrastive: f64, lambda: f64) -> f64 {
    classification + lambda * contrastive
}
