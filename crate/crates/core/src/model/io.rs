//! JSON model file.
//!
//! ```json
//! {"format_version":1,
//!  "char_vocabulary":{"printable":" !\"#…~","oov_index":95,"size":96},
//!  "architecture":{"d_emb":64,"d_h":64,"k":3,"use_context":true},
//!  "tensors":{"char_embedding":[[…],…],"mask":[…],"pad":[…],
//!             "lstm_forward":{"w_x":[[…]],"w_h":[[…]],"bias":[…]},
//!             "lstm_backward":{…},
//!             "classifier":{"weight":[…],"bias":…}}}
//! ```
//!
//! Numbers are written in scientific notation with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::params::{Architecture, ModelParameters};
use super::vocab::CharVocabulary;
use crate::error::{Error, Result};
use crate::kernels::{LstmCellParams, Matrix};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Exact(f64);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite parameter value"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Exact)
    }
}

fn vector(v: &[f64]) -> Vec<Exact> {
    v.iter().copied().map(Exact).collect()
}

fn rows(m: &Matrix) -> Vec<Vec<Exact>> {
    (0..m.rows()).map(|r| vector(m.row(r))).collect()
}

fn unvector(v: Vec<Exact>) -> Vec<f64> {
    v.into_iter().map(|e| e.0).collect()
}

fn unrows(name: &str, rows: Vec<Vec<Exact>>, cols: usize) -> Result<Matrix> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * cols);
    for r in rows {
        if r.len() != cols {
            return Err(Error::ModelFormat(format!(
                "{name}: expected rows of {cols} values, found {}",
                r.len()
            )));
        }
        data.extend(unvector(r));
    }
    Matrix::from_vec(n, cols, data)
}

#[derive(Serialize, Deserialize)]
struct VocabularyRecord {
    printable: String,
    oov_index: usize,
    size: usize,
}

#[derive(Serialize, Deserialize)]
struct LstmRecord {
    w_x: Vec<Vec<Exact>>,
    w_h: Vec<Vec<Exact>>,
    bias: Vec<Exact>,
}

#[derive(Serialize, Deserialize)]
struct ClassifierRecord {
    weight: Vec<Exact>,
    bias: Exact,
}

#[derive(Serialize, Deserialize)]
struct TensorsRecord {
    char_embedding: Vec<Vec<Exact>>,
    mask: Vec<Exact>,
    pad: Vec<Exact>,
    lstm_forward: LstmRecord,
    lstm_backward: LstmRecord,
    classifier: ClassifierRecord,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    char_vocabulary: VocabularyRecord,
    architecture: Architecture,
    tensors: TensorsRecord,
}

impl LstmRecord {
    fn from_params(p: &LstmCellParams) -> Self {
        LstmRecord {
            w_x: rows(&p.w_x),
            w_h: rows(&p.w_h),
            bias: vector(&p.bias),
        }
    }

    fn into_params(self, name: &str, arch: &Architecture) -> Result<LstmCellParams> {
        let p = LstmCellParams {
            input_dim: arch.d_emb,
            hidden_dim: arch.d_h,
            w_x: unrows(name, self.w_x, arch.d_emb)?,
            w_h: unrows(name, self.w_h, arch.d_h)?,
            bias: unvector(self.bias),
        };
        p.check_shapes()?;
        Ok(p)
    }
}

impl ModelParameters {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            char_vocabulary: VocabularyRecord {
                printable: CharVocabulary::printable(),
                oov_index: CharVocabulary::OOV,
                size: CharVocabulary::SIZE,
            },
            architecture: self.arch,
            tensors: TensorsRecord {
                char_embedding: rows(&self.char_embedding),
                mask: vector(&self.mask),
                pad: vector(&self.pad),
                lstm_forward: LstmRecord::from_params(&self.lstm_forward),
                lstm_backward: LstmRecord::from_params(&self.lstm_backward),
                classifier: ClassifierRecord {
                    weight: vector(&self.classifier_weight),
                    bias: Exact(self.classifier_bias[0]),
                },
            },
        };
        serde_json::to_string(&file).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<ModelParameters> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        let v = &file.char_vocabulary;
        if v.size != CharVocabulary::SIZE
            || v.oov_index != CharVocabulary::OOV
            || v.printable != CharVocabulary::printable()
        {
            return Err(Error::ModelFormat("character vocabulary does not match".into()));
        }
        let arch = file.architecture;
        arch.validate()?;
        let t = file.tensors;
        let params = ModelParameters {
            arch,
            char_embedding: unrows("char_embedding", t.char_embedding, arch.d_emb)?,
            mask: unvector(t.mask),
            pad: unvector(t.pad),
            lstm_forward: t.lstm_forward.into_params("lstm_forward", &arch)?,
            lstm_backward: t.lstm_backward.into_params("lstm_backward", &arch)?,
            classifier_weight: unvector(t.classifier.weight),
            classifier_bias: vec![t.classifier.bias.0],
        };
        params
            .check_shapes()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelParameters> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
