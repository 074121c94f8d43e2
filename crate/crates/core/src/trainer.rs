//! Offline training: leave-one-out pooling, contrastive sampling, the seeded
//! shuffle-batch-step loop, and few-shot fine-tuning.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_groups, Groups, LabeledDataset, LabeledMessage};
use crate::error::{Error, Result};
use crate::kernels::{adam_step, AdamState};
use crate::model::{
    batch_loss_and_grad, Architecture, Batch, BatchLoss, ContrastTriple, LossOptions,
    ModelParameters, TokenExample, DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_LAMBDA,
    DEFAULT_WINDOW,
};

pub const DEFAULT_LEARNING_RATE: f64 = 0.002;
pub const DEFAULT_TRAIN_BATCH: usize = 256;
pub const DEFAULT_EPOCHS: usize = 4;
pub const DEFAULT_NEGATIVES: usize = 3;
pub const DEFAULT_FINE_TUNE_EPOCHS: usize = 16;

// Independent ChaCha streams per purpose, so e.g. λ = 0 does not perturb the shuffle.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_CONTRAST: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Token examples per optimizer step.
    pub batch_size: usize,
    pub epochs: usize,
    pub k: usize,
    /// Dissimilar messages per contrastive sample.
    pub negatives: usize,
    pub lambda: f64,
    pub seed: u64,
    pub d_emb: usize,
    pub d_h: usize,
    /// Keep at most this many messages from each source.
    pub max_per_source: Option<usize>,
    /// Token-encoder-only variant when false.
    pub use_context: bool,
    pub include_positive_in_denominator: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_TRAIN_BATCH,
            epochs: DEFAULT_EPOCHS,
            k: DEFAULT_WINDOW,
            negatives: DEFAULT_NEGATIVES,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            d_emb: DEFAULT_EMBEDDING_DIM,
            d_h: DEFAULT_HIDDEN_DIM,
            max_per_source: None,
            use_context: true,
            include_positive_in_denominator: false,
        }
    }
}

impl TrainConfig {
    /// Defaults for adapting an existing model to a handful of labeled lines.
    pub fn fine_tune() -> Self {
        TrainConfig {
            epochs: DEFAULT_FINE_TUNE_EPOCHS,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("k", self.k),
            ("negatives", self.negatives),
            ("d_emb", self.d_emb),
            ("d_h", self.d_h),
            ("max_per_source", self.max_per_source.unwrap_or(1)),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be finite and non-negative".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            d_emb: self.d_emb,
            d_h: self.d_h,
            k: self.k,
            use_context: self.use_context,
        }
    }

    fn loss_options(&self) -> LossOptions {
        LossOptions {
            lambda: self.lambda,
            include_positive_in_denominator: self.include_positive_in_denominator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub cls_loss: f64,
    pub contrast_loss: f64,
    pub total_loss: f64,
    pub seconds: f64,
    pub batches: Vec<BatchLoss>,
}

impl fmt::Display for EpochReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} cls_loss={:.6} contrast_loss={:.6} total_loss={:.6} seconds={:.3}",
            self.epoch, self.cls_loss, self.contrast_loss, self.total_loss, self.seconds
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Token examples seen per epoch.
    pub token_count: usize,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.epochs {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Labeled messages from several sources with groups rebuilt over the union.
#[derive(Debug, Clone)]
pub struct TrainingPool {
    pub sources: Vec<String>,
    pub records: Vec<LabeledMessage>,
    pub groups: Groups,
}

impl TrainingPool {
    pub fn from_records(records: Vec<LabeledMessage>) -> TrainingPool {
        let groups = build_groups(&records);
        TrainingPool {
            sources: Vec::new(),
            records,
            groups,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Pools every dataset except `exclude`, keeping at most `cap` messages per source.
pub fn build_training_pool(
    datasets: &[LabeledDataset],
    exclude: Option<&str>,
    cap: Option<usize>,
) -> Result<TrainingPool> {
    if let Some(name) = exclude {
        if !datasets.iter().any(|d| d.source_name == name) {
            return Err(Error::UnknownSource {
                name: name.to_string(),
                valid: datasets.iter().map(|d| d.source_name.clone()).collect(),
            });
        }
    }
    let mut sources = Vec::new();
    let mut records = Vec::new();
    for d in datasets {
        if Some(d.source_name.as_str()) == exclude {
            continue;
        }
        sources.push(d.source_name.clone());
        let take = cap.unwrap_or(usize::MAX);
        records.extend(d.records.iter().take(take).cloned());
    }
    let groups = build_groups(&records);
    Ok(TrainingPool {
        sources,
        records,
        groups,
    })
}

/// Draws similar and dissimilar messages for contrastive anchors.
#[derive(Debug, Clone)]
pub struct ContrastiveSampler<'a> {
    groups: &'a Groups,
    /// Message indices ordered group by group.
    order: Vec<usize>,
    /// Start of each group's block in `order`.
    starts: Vec<usize>,
}

impl<'a> ContrastiveSampler<'a> {
    pub fn new(groups: &'a Groups) -> Self {
        let mut order = Vec::with_capacity(groups.message_count());
        let mut starts = Vec::with_capacity(groups.len());
        for g in 0..groups.len() {
            starts.push(order.len());
            order.extend_from_slice(groups.members(g));
        }
        ContrastiveSampler {
            groups,
            order,
            starts,
        }
    }

    /// `(similar, dissimilar)` for `anchor`, or `None` when no other group exists.
    ///
    /// The similar message is drawn from the anchor's group excluding the anchor itself
    /// (the anchor when it is alone). Dissimilar messages come uniformly from all other
    /// groups, without repeats when there are enough of them.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        anchor: usize,
        negatives: usize,
        rng: &mut R,
    ) -> Option<(usize, Vec<usize>)> {
        let g = self.groups.group_of(anchor);
        let members = self.groups.members(g);
        let others = self.order.len() - members.len();
        if others == 0 || negatives == 0 {
            return None;
        }
        let similar = if members.len() >= 2 {
            let pick = rng.gen_range(0..members.len() - 1);
            let pos = members.iter().position(|&m| m == anchor).unwrap_or(0);
            members[if pick >= pos { pick + 1 } else { pick }]
        } else {
            anchor
        };
        let start = self.starts[g];
        let outside = |r: usize| {
            if r < start {
                self.order[r]
            } else {
                self.order[r + members.len()]
            }
        };
        let dissimilar = if others >= negatives {
            rand::seq::index::sample(rng, others, negatives)
                .into_iter()
                .map(outside)
                .collect()
        } else {
            (0..negatives).map(|_| outside(rng.gen_range(0..others))).collect()
        };
        Some((similar, dissimilar))
    }
}

pub fn sample_contrastive<R: Rng + ?Sized>(
    groups: &Groups,
    anchor: usize,
    negatives: usize,
    rng: &mut R,
) -> Option<(usize, Vec<usize>)> {
    ContrastiveSampler::new(groups).sample(anchor, negatives, rng)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains a fresh model on the pool.
pub fn train(pool: &TrainingPool, config: &TrainConfig) -> Result<(ModelParameters, TrainReport)> {
    config.validate()?;
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let params = ModelParameters::init(config.architecture(), &mut stream(config.seed, STREAM_INIT));
    train_from(params, &pool.records, &pool.groups, config)
}

/// Continues training `params` on `records`; architecture comes from `params`.
pub fn train_from(
    mut params: ModelParameters,
    records: &[LabeledMessage],
    groups: &Groups,
    config: &TrainConfig,
) -> Result<(ModelParameters, TrainReport)> {
    config.validate()?;
    params.check_shapes()?;
    if records.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut contrast_rng = stream(config.seed, STREAM_CONTRAST);
    let sampler = ContrastiveSampler::new(groups);
    let contrast_enabled = config.lambda > 0.0 && params.arch.use_context && groups.len() >= 2;
    let opts = config.loss_options();
    let mut adam = AdamState::new(&params);

    let mut examples: Vec<(usize, usize)> = records
        .iter()
        .enumerate()
        .flat_map(|(m, r)| (0..r.message.len()).map(move |t| (m, t)))
        .collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        token_count: examples.len(),
    };

    for epoch in 0..config.epochs {
        let started = Instant::now();
        examples.shuffle(&mut shuffle_rng);
        let mut batches = Vec::new();
        for (b, chunk) in examples.chunks(config.batch_size).enumerate() {
            let tokens: Vec<TokenExample<'_>> = chunk
                .iter()
                .map(|&(m, t)| TokenExample {
                    message: &records[m].message,
                    index: t,
                    label: records[m].labels[t].target(),
                })
                .collect();
            let mut contrast = Vec::new();
            if contrast_enabled {
                let mut seen: HashMap<usize, ()> = HashMap::new();
                for &(m, _) in chunk {
                    if seen.insert(m, ()).is_some() {
                        continue;
                    }
                    if let Some((s, ds)) = sampler.sample(m, config.negatives, &mut contrast_rng) {
                        contrast.push(ContrastTriple {
                            anchor: &records[m].message,
                            similar: &records[s].message,
                            dissimilar: ds.into_iter().map(|d| &records[d].message).collect(),
                        });
                    }
                }
            }
            let batch = Batch { tokens, contrast };
            let (loss, grads) = batch_loss_and_grad(&params, &batch, &opts)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam_step(&mut params, &grads, &mut adam, config.learning_rate)?;
            batches.push(loss);
        }
        let n = batches.len() as f64;
        let mean = |f: fn(&BatchLoss) -> f64| batches.iter().map(f).sum::<f64>() / n;
        report.epochs.push(EpochReport {
            epoch: epoch + 1,
            cls_loss: mean(|b| b.classification),
            contrast_loss: mean(|b| b.contrastive),
            total_loss: mean(|b| b.total),
            seconds: started.elapsed().as_secs_f64(),
            batches,
        });
    }
    Ok((params, report))
}

/// Adapts a trained model to a few labeled lines from a new source.
///
/// An empty sample returns the model unchanged. With fewer than two similarity groups
/// only the classification loss is used.
pub fn fine_tune(
    model: &ModelParameters,
    labeled: &[LabeledMessage],
    config: &TrainConfig,
) -> Result<ModelParameters> {
    if labeled.is_empty() {
        return Ok(model.clone());
    }
    let groups = build_groups(labeled);
    Ok(train_from(model.clone(), labeled, &groups, config)?.0)
}
