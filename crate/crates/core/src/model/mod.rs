//! The parser network: char-level token encoder, masked BiLSTM context encoder,
//! logistic classification head and the training losses.

mod batch;
mod encoder;
mod io;
mod loss;
mod params;
mod vocab;

pub use batch::{batch_loss, batch_loss_and_grad, Batch, BatchLoss, ContrastTriple, LossOptions, TokenExample};
pub use encoder::{
    context_backward, context_forward, context_window, encode_context, encode_token,
    predict_message, predict_token, token_loss_backward, ContextTrace, MessageCache, Slot,
};
pub use io::FORMAT_VERSION;
pub use loss::{
    bce_with_grad, classification_loss, contrastive_loss, contrastive_loss_grad, total_loss,
    ContrastiveGrad, ContrastiveSample, DEFAULT_LAMBDA, PROBABILITY_CLAMP,
};
pub use params::{Architecture, ModelParameters, DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_WINDOW};
pub use vocab::CharVocabulary;

use crate::corpus::TokenizedMessage;
use crate::error::Result;

/// Anything that assigns a parameter probability to every token of a message.
pub trait TokenClassifier: Sync {
    fn token_probabilities(&self, message: &TokenizedMessage) -> Result<Vec<f64>>;
}

impl TokenClassifier for ModelParameters {
    fn token_probabilities(&self, message: &TokenizedMessage) -> Result<Vec<f64>> {
        predict_message(self, message)
    }
}
