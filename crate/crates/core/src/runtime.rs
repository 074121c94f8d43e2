//! Online parsing with a trained classifier.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{render_template, tokenize, Label, TokenizedMessage};
use crate::error::{Error, Result};
use crate::model::TokenClassifier;

pub const DEFAULT_PARSE_BATCH: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseResult {
    pub raw: String,
    pub labels: Vec<Label>,
    /// `raw` with each run of parameter tokens replaced by `<*>`.
    pub template: String,
    /// The replaced substrings, left to right.
    pub parameters: Vec<String>,
}

/// Byte ranges of maximal parameter runs. Consecutive parameter tokens join a run when
/// only whitespace separates them.
pub fn parameter_runs(message: &TokenizedMessage, labels: &[Label]) -> Vec<Range<usize>> {
    let mut runs: Vec<Range<usize>> = Vec::new();
    let mut prev_param = false;
    for (tok, label) in message.tokens.iter().zip(labels) {
        if label.is_parameter() {
            let joins = prev_param
                && runs.last().is_some_and(|r| {
                    message.raw[r.end..tok.span.start]
                        .chars()
                        .all(char::is_whitespace)
                });
            if joins {
                runs.last_mut().expect("run exists").end = tok.span.end;
            } else {
                runs.push(tok.span.clone());
            }
        }
        prev_param = label.is_parameter();
    }
    runs
}

impl ParseResult {
    pub fn from_labels(message: &TokenizedMessage, labels: Vec<Label>) -> ParseResult {
        let runs = parameter_runs(message, &labels);
        ParseResult {
            raw: message.raw.clone(),
            template: render_template(&message.raw, &runs),
            parameters: runs.iter().map(|r| message.raw[r.clone()].to_string()).collect(),
            labels,
        }
    }
}

/// Tokenizes and classifies one message; a token is a parameter when ŷ ≥ 0.5.
pub fn parse_message<C: TokenClassifier + ?Sized>(model: &C, raw: &str) -> Result<ParseResult> {
    let message = tokenize(raw);
    if message.is_empty() {
        return Err(Error::EmptyMessage);
    }
    parse_tokenized(model, &message)
}

pub fn parse_tokenized<C: TokenClassifier + ?Sized>(
    model: &C,
    message: &TokenizedMessage,
) -> Result<ParseResult> {
    let labels = model
        .token_probabilities(message)?
        .into_iter()
        .map(Label::from_probability)
        .collect();
    Ok(ParseResult::from_labels(message, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub batch_size: usize,
    pub workers: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            batch_size: DEFAULT_PARSE_BATCH,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub messages: usize,
    pub seconds: f64,
    pub messages_per_second: f64,
}

impl ThroughputReport {
    pub fn new(messages: usize, elapsed: Duration) -> ThroughputReport {
        // Clamp to one nanosecond so the rate is always defined.
        let seconds = elapsed.as_secs_f64().max(1e-9);
        ThroughputReport {
            messages,
            seconds,
            messages_per_second: messages as f64 / seconds,
        }
    }
}

impl fmt::Display for ThroughputReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "throughput messages={} seconds={:.3} messages_per_second={:.1}",
            self.messages, self.seconds, self.messages_per_second
        )
    }
}

/// Parses `messages` in batches spread over `workers` threads.
///
/// Results keep input order and do not depend on the worker count. The report covers the
/// time since `started`, so callers can include input loading.
pub fn parse_batch_since<C, S>(
    model: &C,
    messages: &[S],
    opts: BatchOptions,
    started: Instant,
) -> Result<(Vec<Result<ParseResult>>, ThroughputReport)>
where
    C: TokenClassifier + ?Sized,
    S: AsRef<str> + Sync,
{
    if opts.batch_size == 0 || opts.workers == 0 {
        return Err(Error::Config("batch size and workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<ParseResult>> = pool.install(|| {
        messages
            .par_chunks(opts.batch_size)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|m| parse_message(model, m.as_ref()))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let report = ThroughputReport::new(messages.len(), started.elapsed());
    Ok((results, report))
}

pub fn parse_batch<C, S>(
    model: &C,
    messages: &[S],
    opts: BatchOptions,
) -> Result<(Vec<Result<ParseResult>>, ThroughputReport)>
where
    C: TokenClassifier + ?Sized,
    S: AsRef<str> + Sync,
{
    parse_batch_since(model, messages, opts, Instant::now())
}

/// Exact-string grouping on the reconstructed template; indices in input order.
pub fn group_by_template(results: &[ParseResult]) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in results.iter().enumerate() {
        groups.entry(r.template.clone()).or_default().push(i);
    }
    groups
}

/// One line of parse output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRecord {
    pub line: usize,
    pub content: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ParseRecord {
    pub fn new(line: usize, content: &str, result: &Result<ParseResult>) -> ParseRecord {
        match result {
            Ok(r) => ParseRecord {
                line,
                content: content.to_string(),
                template: Some(r.template.clone()),
                parameters: Some(r.parameters.clone()),
                error: None,
            },
            Err(e) => ParseRecord {
                line,
                content: content.to_string(),
                template: None,
                parameters: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
