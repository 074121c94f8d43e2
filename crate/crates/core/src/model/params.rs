use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::CharVocabulary;
use crate::error::{Error, Result};
use crate::kernels::tensor::{add_assign, Matrix};
use crate::kernels::{LstmCellParams, TensorSet};

pub const DEFAULT_EMBEDDING_DIM: usize = 64;
pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub d_emb: usize,
    pub d_h: usize,
    /// Context tokens taken on each side of the target.
    pub k: usize,
    /// When false the context vector is all zeros (token-encoder-only variant).
    #[serde(default = "default_true")]
    pub use_context: bool,
}

fn default_true() -> bool {
    true
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            d_emb: DEFAULT_EMBEDDING_DIM,
            d_h: DEFAULT_HIDDEN_DIM,
            k: DEFAULT_WINDOW,
            use_context: true,
        }
    }
}

impl Architecture {
    pub fn context_dim(&self) -> usize {
        2 * self.d_h
    }

    pub fn feature_dim(&self) -> usize {
        self.d_emb + self.context_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.d_h == 0 || self.k == 0 {
            return Err(Error::Config("d_emb, d_h and k must all be at least 1".into()));
        }
        Ok(())
    }
}

/// All learned tensors of the parser. Also used, zero-initialized, as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub arch: Architecture,
    /// `96 × d_emb`, one row per vocabulary slot.
    pub char_embedding: Matrix,
    /// Stands in for the target token inside its own context window.
    pub mask: Vec<f64>,
    /// Fills window positions that fall outside the message.
    pub pad: Vec<f64>,
    pub lstm_forward: LstmCellParams,
    pub lstm_backward: LstmCellParams,
    /// `d_emb + 2·d_h`
    pub classifier_weight: Vec<f64>,
    /// Single element.
    pub classifier_bias: Vec<f64>,
}

impl ModelParameters {
    pub fn zeros(arch: Architecture) -> ModelParameters {
        ModelParameters {
            arch,
            char_embedding: Matrix::zeros(CharVocabulary::SIZE, arch.d_emb),
            mask: vec![0.0; arch.d_emb],
            pad: vec![0.0; arch.d_emb],
            lstm_forward: LstmCellParams::zeros(arch.d_emb, arch.d_h),
            lstm_backward: LstmCellParams::zeros(arch.d_emb, arch.d_h),
            classifier_weight: vec![0.0; arch.feature_dim()],
            classifier_bias: vec![0.0],
        }
    }

    /// Xavier-uniform matrices; the mask and pad vectors are drawn like embedding rows.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> ModelParameters {
        let char_embedding = Matrix::xavier(CharVocabulary::SIZE, arch.d_emb, rng);
        let row_bound = (6.0 / (CharVocabulary::SIZE + arch.d_emb) as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-row_bound..row_bound)).collect()
        };
        let mask = draw(arch.d_emb);
        let pad = draw(arch.d_emb);
        let lstm_forward = LstmCellParams::init(arch.d_emb, arch.d_h, rng);
        let lstm_backward = LstmCellParams::init(arch.d_emb, arch.d_h, rng);
        let classifier_weight = Matrix::xavier(1, arch.feature_dim(), rng).as_slice().to_vec();
        ModelParameters {
            arch,
            char_embedding,
            mask,
            pad,
            lstm_forward,
            lstm_backward,
            classifier_weight,
            classifier_bias: vec![0.0],
        }
    }

    pub fn zeros_like(&self) -> ModelParameters {
        Self::zeros(self.arch)
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.arch.validate()?;
        let expected = Self::zeros(self.arch);
        for ((_, a), (_, b)) in expected.tensors().iter().zip(self.tensors()) {
            if a.len() != b.len() {
                return Err(Error::Dimension {
                    expected: a.len(),
                    actual: b.len(),
                });
            }
        }
        if self.char_embedding.cols() != self.arch.d_emb {
            return Err(Error::Dimension {
                expected: self.arch.d_emb,
                actual: self.char_embedding.cols(),
            });
        }
        self.lstm_forward.check_shapes()?;
        self.lstm_backward.check_shapes()
    }

    pub fn add_assign(&mut self, other: &ModelParameters) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            add_assign(a, b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// All values concatenated in tensor order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    pub fn load_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

impl TensorSet for ModelParameters {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("char_embedding", self.char_embedding.as_slice()),
            ("mask", &self.mask),
            ("pad", &self.pad),
            ("lstm_forward.w_x", self.lstm_forward.w_x.as_slice()),
            ("lstm_forward.w_h", self.lstm_forward.w_h.as_slice()),
            ("lstm_forward.bias", &self.lstm_forward.bias),
            ("lstm_backward.w_x", self.lstm_backward.w_x.as_slice()),
            ("lstm_backward.w_h", self.lstm_backward.w_h.as_slice()),
            ("lstm_backward.bias", &self.lstm_backward.bias),
            ("classifier.weight", &self.classifier_weight),
            ("classifier.bias", &self.classifier_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("char_embedding", self.char_embedding.as_mut_slice()),
            ("mask", &mut self.mask),
            ("pad", &mut self.pad),
            ("lstm_forward.w_x", self.lstm_forward.w_x.as_mut_slice()),
            ("lstm_forward.w_h", self.lstm_forward.w_h.as_mut_slice()),
            ("lstm_forward.bias", &mut self.lstm_forward.bias),
            ("lstm_backward.w_x", self.lstm_backward.w_x.as_mut_slice()),
            ("lstm_backward.w_h", self.lstm_backward.w_h.as_mut_slice()),
            ("lstm_backward.bias", &mut self.lstm_backward.bias),
            ("classifier.weight", &mut self.classifier_weight),
            ("classifier.bias", &mut self.classifier_bias),
        ]
    }
}
