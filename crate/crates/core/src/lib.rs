//! Token-level log parser.
//!
//! Each token of a log message is classified as template text or as a parameter from
//! two views: the token's own characters (summed char embeddings) and its masked
//! surrounding window (a bidirectional LSTM). Training adds a contrastive term that
//! pulls together context encodings of structurally similar messages.

pub mod corpus;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod runtime;
pub mod trainer;

pub use error::{Error, Result};
