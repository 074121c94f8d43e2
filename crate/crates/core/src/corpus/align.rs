use std::ops::Range;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::tokenize::TokenizedMessage;
use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "<*>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Template,
    Parameter,
}

impl Label {
    pub fn is_parameter(self) -> bool {
        matches!(self, Label::Parameter)
    }

    /// 1.0 for parameters, 0.0 for template tokens.
    pub fn target(self) -> f64 {
        if self.is_parameter() {
            1.0
        } else {
            0.0
        }
    }

    pub fn from_probability(p: f64) -> Label {
        if p >= 0.5 {
            Label::Parameter
        } else {
            Label::Template
        }
    }
}

/// Compiled character-level matcher for one ground-truth template.
#[derive(Debug, Clone)]
pub struct TemplateMatcher {
    template: String,
    regex: Regex,
}

impl TemplateMatcher {
    pub fn new(template: &str) -> Result<Self> {
        let mut pattern = String::from(r"(?s)\A\s*");
        for (i, literal) in template.trim().split(PLACEHOLDER).enumerate() {
            if i > 0 {
                pattern.push_str("(.*?)");
            }
            let mut in_ws = false;
            for c in literal.chars() {
                if c.is_whitespace() {
                    if !in_ws {
                        pattern.push_str(r"\s+");
                    }
                    in_ws = true;
                } else {
                    in_ws = false;
                    let mut buf = [0u8; 4];
                    pattern.push_str(&regex::escape(c.encode_utf8(&mut buf)));
                }
            }
        }
        pattern.push_str(r"\s*\z");
        let regex = Regex::new(&pattern).map_err(|e| Error::BadTemplate {
            template: template.to_string(),
            reason: e.to_string(),
        })?;
        Ok(TemplateMatcher {
            template: template.to_string(),
            regex,
        })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Byte ranges of `raw` captured by the placeholders, leftmost-shortest.
    pub fn captures(&self, raw: &str) -> Result<Vec<Range<usize>>> {
        let caps = self
            .regex
            .captures(raw)
            .ok_or_else(|| Error::Alignment {
                raw: raw.to_string(),
                template: self.template.clone(),
            })?;
        Ok(caps
            .iter()
            .skip(1)
            .flatten()
            .map(|m| m.range())
            .filter(|r| !r.is_empty())
            .collect())
    }

    pub fn align(&self, message: &TokenizedMessage) -> Result<Alignment> {
        let captures = self.captures(&message.raw)?;
        let labels = message
            .tokens
            .iter()
            .map(|t| {
                let hit = captures
                    .iter()
                    .any(|c| c.start < t.span.end && t.span.start < c.end);
                if hit {
                    Label::Parameter
                } else {
                    Label::Template
                }
            })
            .collect();
        Ok(Alignment { captures, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// Non-empty placeholder captures, in order.
    pub captures: Vec<Range<usize>>,
    pub labels: Vec<Label>,
}

/// Per-token labels for `message` given its ground-truth template.
///
/// A token is a parameter when at least one of its bytes falls inside a placeholder capture.
pub fn derive_token_labels(message: &TokenizedMessage, template: &str) -> Result<Vec<Label>> {
    Ok(TemplateMatcher::new(template)?.align(message)?.labels)
}

/// Replaces each byte range of `raw` with the placeholder.
pub fn render_template(raw: &str, ranges: &[Range<usize>]) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last = 0;
    for r in ranges {
        out.push_str(&raw[last..r.start]);
        out.push_str(PLACEHOLDER);
        last = r.end;
    }
    out.push_str(&raw[last..]);
    out
}
