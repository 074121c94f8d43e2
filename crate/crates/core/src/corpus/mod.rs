//! Labeled log corpora: tokenization, token-label derivation from message templates,
//! and similarity groups used for contrastive sampling.

mod align;
mod dataset;
mod synthetic;
mod tokenize;

pub use align::{derive_token_labels, render_template, Alignment, Label, TemplateMatcher, PLACEHOLDER};
pub use dataset::{
    build_groups, build_groups_from, load_dataset, read_records, source_name_for, GroupKey, Groups,
    LabeledDataset, LabeledMessage, RawRecord, Skipped, DEFAULT_CONTENT_COLUMN,
    DEFAULT_TEMPLATE_COLUMN,
};
pub use tokenize::{is_delimiter, tokenize, Token, TokenizedMessage, DELIMITERS};
pub use synthetic::{synthetic_corpus, synthetic_record, SYNTHETIC_TEMPLATES};
