//! Small numeric layer set with hand-derived backward passes.

pub mod adam;
pub mod gradcheck;
pub mod lstm;
pub mod tensor;

pub use adam::{adam_step, AdamState, TensorSet};
pub use gradcheck::{grad_check, GradCheck, GradCheckReport};
pub use lstm::{
    lstm_backward, lstm_backward_into, lstm_forward, lstm_forward_projected,
    lstm_forward_projected_trace, lstm_forward_trace, Direction, LstmCellParams, LstmTrace,
};
pub use tensor::Matrix;
