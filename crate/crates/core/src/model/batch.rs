//! Batch objective: mean token BCE plus λ times the mean contrastive loss.
//!
//! Work is split into a fixed number of contiguous chunks whose partial sums are
//! combined in chunk order, so results do not depend on the rayon thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::{context_backward, context_forward, encode_token, token_loss_backward};
use super::loss::{contrastive_loss_grad, ContrastiveSample, DEFAULT_LAMBDA};
use super::params::ModelParameters;
use crate::corpus::TokenizedMessage;
use crate::error::{Error, Result};

const REDUCTION_CHUNKS: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct TokenExample<'a> {
    pub message: &'a TokenizedMessage,
    pub index: usize,
    /// 1.0 for parameter, 0.0 for template.
    pub label: f64,
}

/// Messages whose first-token context encodings form one contrastive sample.
#[derive(Debug, Clone)]
pub struct ContrastTriple<'a> {
    pub anchor: &'a TokenizedMessage,
    pub similar: &'a TokenizedMessage,
    pub dissimilar: Vec<&'a TokenizedMessage>,
}

#[derive(Debug, Clone, Default)]
pub struct Batch<'a> {
    pub tokens: Vec<TokenExample<'a>>,
    pub contrast: Vec<ContrastTriple<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    pub lambda: f64,
    pub include_positive_in_denominator: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            lambda: DEFAULT_LAMBDA,
            include_positive_in_denominator: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchLoss {
    pub classification: f64,
    /// Mean over contrastive samples; 0 when the batch has none.
    pub contrastive: f64,
    pub total: f64,
}

fn embeddings(params: &ModelParameters, message: &TokenizedMessage) -> Result<Vec<Vec<f64>>> {
    message.token_texts().map(|t| encode_token(params, t)).collect()
}

fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    let chunks = REDUCTION_CHUNKS.min(n.max(1));
    (0..chunks)
        .map(|c| (c * n / chunks)..((c + 1) * n / chunks))
        .collect()
}

fn contrast_backward(
    params: &ModelParameters,
    triple: &ContrastTriple<'_>,
    weight: f64,
    include_positive: bool,
    grads: &mut ModelParameters,
) -> Result<f64> {
    let k = params.arch.k;
    let messages: Vec<&TokenizedMessage> = [triple.anchor, triple.similar]
        .into_iter()
        .chain(triple.dissimilar.iter().copied())
        .collect();
    let mut traces = Vec::with_capacity(messages.len());
    for m in &messages {
        let emb = embeddings(params, m)?;
        traces.push(context_forward(params, m, &emb, 0, k)?);
    }
    let sample = ContrastiveSample {
        anchor: traces[0].output.clone(),
        similar: traces[1].output.clone(),
        dissimilar: traces[2..].iter().map(|t| t.output.clone()).collect(),
    };
    let g = contrastive_loss_grad(&sample, include_positive)?;
    let upstream = std::iter::once(&g.anchor)
        .chain(std::iter::once(&g.similar))
        .chain(&g.dissimilar);
    for ((m, trace), d) in messages.iter().zip(&traces).zip(upstream) {
        let d: Vec<f64> = d.iter().map(|x| x * weight).collect();
        context_backward(params, m, trace, &d, grads)?;
    }
    Ok(g.loss)
}

/// Loss and gradient of the batch objective.
pub fn batch_loss_and_grad(
    params: &ModelParameters,
    batch: &Batch<'_>,
    opts: &LossOptions,
) -> Result<(BatchLoss, ModelParameters)> {
    if batch.tokens.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_tok = batch.tokens.len();
    let cls_weight = 1.0 / n_tok as f64;
    let use_contrast = opts.lambda != 0.0 && !batch.contrast.is_empty();
    let n_con = if use_contrast { batch.contrast.len() } else { 0 };
    let con_weight = if n_con > 0 {
        opts.lambda / n_con as f64
    } else {
        0.0
    };

    let token_parts: Vec<Result<(f64, ModelParameters)>> = chunk_ranges(n_tok)
        .into_par_iter()
        .map(|range| {
            let mut grads = params.zeros_like();
            let mut sum = 0.0;
            for ex in &batch.tokens[range] {
                let emb = embeddings(params, ex.message)?;
                let (loss, _) = token_loss_backward(
                    params, ex.message, &emb, ex.index, ex.label, cls_weight, &mut grads,
                )?;
                sum += loss;
            }
            Ok((sum, grads))
        })
        .collect();

    let contrast_parts: Vec<Result<(f64, ModelParameters)>> = if n_con > 0 {
        chunk_ranges(n_con)
            .into_par_iter()
            .map(|range| {
                let mut grads = params.zeros_like();
                let mut sum = 0.0;
                for triple in &batch.contrast[range] {
                    sum += contrast_backward(
                        params,
                        triple,
                        con_weight,
                        opts.include_positive_in_denominator,
                        &mut grads,
                    )?;
                }
                Ok((sum, grads))
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut grads = params.zeros_like();
    let mut cls_sum = 0.0;
    for part in token_parts {
        let (s, g) = part?;
        cls_sum += s;
        grads.add_assign(&g);
    }
    let mut con_sum = 0.0;
    for part in contrast_parts {
        let (s, g) = part?;
        con_sum += s;
        grads.add_assign(&g);
    }
    let classification = cls_sum / n_tok as f64;
    let contrastive = if n_con > 0 { con_sum / n_con as f64 } else { 0.0 };
    let loss = BatchLoss {
        classification,
        contrastive,
        total: super::loss::total_loss(classification, contrastive, opts.lambda),
    };
    Ok((loss, grads))
}

pub fn batch_loss(params: &ModelParameters, batch: &Batch<'_>, opts: &LossOptions) -> Result<BatchLoss> {
    Ok(batch_loss_and_grad(params, batch, opts)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::kernels::{grad_check, GradCheck};
    use crate::model::params::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chunking_covers_everything() {
        for n in [0, 1, 5, 8, 9, 100] {
            let ranges = chunk_ranges(n);
            assert_eq!(ranges.first().unwrap().start, 0);
            assert_eq!(ranges.last().unwrap().end, n);
            for w in ranges.windows(2) {
                assert_eq!(w[0].end, w[1].start);
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let p = ModelParameters::zeros(Architecture::default());
        assert!(matches!(
            batch_loss(&p, &Batch::default(), &LossOptions::default()),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn total_composes_parts() {
        let arch = Architecture {
            d_emb: 4,
            d_h: 3,
            k: 2,
            use_context: true,
        };
        let p = ModelParameters::init(arch, &mut ChaCha8Rng::seed_from_u64(1));
        let a = tokenize("job 17 done");
        let b = tokenize("job 99 done");
        let c = tokenize("disk full on sda1");
        let batch = Batch {
            tokens: vec![
                TokenExample { message: &a, index: 1, label: 1.0 },
                TokenExample { message: &c, index: 0, label: 0.0 },
            ],
            contrast: vec![ContrastTriple {
                anchor: &a,
                similar: &b,
                dissimilar: vec![&c],
            }],
        };
        let opts = LossOptions {
            lambda: 0.3,
            include_positive_in_denominator: false,
        };
        let l = batch_loss(&p, &batch, &opts).unwrap();
        assert!((l.total - (l.classification + 0.3 * l.contrastive)).abs() < 1e-12);

        let flat = p.flatten();
        let (_, g) = batch_loss_and_grad(&p, &batch, &opts).unwrap();
        let r = grad_check(
            |v| {
                let mut q = p.clone();
                q.load_flat(v);
                batch_loss(&q, &batch, &opts).unwrap().total
            },
            &flat,
            &g.flatten(),
            &GradCheck::default(),
        );
        assert!(r.worst_relative < 1e-4, "{r:?}");
    }
}
