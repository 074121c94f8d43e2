//! Token encoder, masked context encoder and the classification head.

use super::params::ModelParameters;
use super::vocab::CharVocabulary;
use crate::corpus::TokenizedMessage;
use crate::error::{Error, Result};
use crate::kernels::tensor::{add_assign, axpy, dot, sigmoid};
use crate::kernels::{
    lstm_backward_into, lstm_forward_projected, lstm_forward_projected_trace, Direction,
    LstmCellParams, LstmTrace,
};

/// Sum of the character embedding rows; characters outside printable ASCII use the OOV row.
pub fn encode_token(params: &ModelParameters, token: &str) -> Result<Vec<f64>> {
    if token.is_empty() {
        return Err(Error::EmptyToken);
    }
    let mut out = vec![0.0; params.arch.d_emb];
    for c in token.chars() {
        add_assign(&mut out, params.char_embedding.row(CharVocabulary::index(c)));
    }
    Ok(out)
}

fn accumulate_token_grad(grads: &mut ModelParameters, token: &str, d: &[f64]) {
    for c in token.chars() {
        add_assign(grads.char_embedding.row_mut(CharVocabulary::index(c)), d);
    }
}

/// What occupies one position of a context window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Pad,
    Mask,
    Token(usize),
}

/// The `2k + 1` window centred on `target`, with the target masked.
pub fn context_window(len: usize, target: usize, k: usize) -> Vec<Slot> {
    (0..=2 * k)
        .map(|w| {
            let pos = target as isize + w as isize - k as isize;
            if pos == target as isize {
                Slot::Mask
            } else if pos < 0 || pos >= len as isize {
                Slot::Pad
            } else {
                Slot::Token(pos as usize)
            }
        })
        .collect()
}

fn check_target(message: &TokenizedMessage, target: usize) -> Result<()> {
    if target >= message.len() {
        return Err(Error::IndexOutOfRange {
            index: target,
            len: message.len(),
        });
    }
    Ok(())
}

fn mean_pool(states: &[Vec<f64>], out: &mut [f64]) {
    let scale = 1.0 / states.len() as f64;
    for h in states {
        add_assign(out, h);
    }
    out.iter_mut().for_each(|x| *x *= scale);
}

/// Per-message cache of token embeddings and their input projections for both LSTMs.
///
/// Every window built from the cache is evaluated with exactly the same arithmetic as
/// the uncached path, so results are bit-identical.
#[derive(Debug, Clone)]
pub struct MessageCache {
    pub embeddings: Vec<Vec<f64>>,
    fwd_proj: Vec<Vec<f64>>,
    bwd_proj: Vec<Vec<f64>>,
    special: SpecialProjections,
}

#[derive(Debug, Clone)]
struct SpecialProjections {
    fwd_pad: Vec<f64>,
    fwd_mask: Vec<f64>,
    bwd_pad: Vec<f64>,
    bwd_mask: Vec<f64>,
}

impl SpecialProjections {
    fn new(params: &ModelParameters) -> Result<Self> {
        Ok(SpecialProjections {
            fwd_pad: params.lstm_forward.project(&params.pad)?,
            fwd_mask: params.lstm_forward.project(&params.mask)?,
            bwd_pad: params.lstm_backward.project(&params.pad)?,
            bwd_mask: params.lstm_backward.project(&params.mask)?,
        })
    }
}

impl MessageCache {
    pub fn new(params: &ModelParameters, message: &TokenizedMessage) -> Result<Self> {
        let embeddings = message
            .token_texts()
            .map(|t| encode_token(params, t))
            .collect::<Result<Vec<_>>>()?;
        let (fwd_proj, bwd_proj) = if params.arch.use_context {
            (
                embeddings
                    .iter()
                    .map(|e| params.lstm_forward.project(e))
                    .collect::<Result<Vec<_>>>()?,
                embeddings
                    .iter()
                    .map(|e| params.lstm_backward.project(e))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(MessageCache {
            embeddings,
            fwd_proj,
            bwd_proj,
            special: SpecialProjections::new(params)?,
        })
    }

    fn projections<'a>(&'a self, window: &[Slot], dir: Direction) -> Vec<&'a [f64]> {
        let (tokens, pad, mask) = match dir {
            Direction::Forward => (&self.fwd_proj, &self.special.fwd_pad, &self.special.fwd_mask),
            Direction::Backward => (&self.bwd_proj, &self.special.bwd_pad, &self.special.bwd_mask),
        };
        window
            .iter()
            .map(|s| match s {
                Slot::Pad => pad.as_slice(),
                Slot::Mask => mask.as_slice(),
                Slot::Token(j) => tokens[*j].as_slice(),
            })
            .collect()
    }

    pub fn context(&self, params: &ModelParameters, target: usize, k: usize) -> Result<Vec<f64>> {
        let d_h = params.arch.d_h;
        let mut out = vec![0.0; 2 * d_h];
        if !params.arch.use_context {
            return Ok(out);
        }
        if target >= self.embeddings.len() {
            return Err(Error::IndexOutOfRange {
                index: target,
                len: self.embeddings.len(),
            });
        }
        let window = context_window(self.embeddings.len(), target, k);
        let fwd = lstm_forward_projected(
            &params.lstm_forward,
            &self.projections(&window, Direction::Forward),
            Direction::Forward,
        )?;
        let bwd = lstm_forward_projected(
            &params.lstm_backward,
            &self.projections(&window, Direction::Backward),
            Direction::Backward,
        )?;
        let (f, b) = out.split_at_mut(d_h);
        mean_pool(&fwd, f);
        mean_pool(&bwd, b);
        Ok(out)
    }

    pub fn probability(&self, params: &ModelParameters, target: usize, k: usize) -> Result<f64> {
        let context = self.context(params, target, k)?;
        Ok(sigmoid(logit(params, &self.embeddings[target], &context)))
    }
}

fn logit(params: &ModelParameters, token: &[f64], context: &[f64]) -> f64 {
    let (w_tok, w_ctx) = params.classifier_weight.split_at(params.arch.d_emb);
    dot(w_tok, token) + dot(w_ctx, context) + params.classifier_bias[0]
}

/// Mean-pooled forward and backward hidden states over the masked window around `target`.
pub fn encode_context(
    params: &ModelParameters,
    message: &TokenizedMessage,
    target: usize,
    k: usize,
) -> Result<Vec<f64>> {
    check_target(message, target)?;
    MessageCache::new(params, message)?.context(params, target, k)
}

/// Probability that the token at `target` is a parameter.
pub fn predict_token(
    params: &ModelParameters,
    message: &TokenizedMessage,
    target: usize,
    k: usize,
) -> Result<f64> {
    check_target(message, target)?;
    MessageCache::new(params, message)?.probability(params, target, k)
}

/// Parameter probabilities for every token of a message.
pub fn predict_message(params: &ModelParameters, message: &TokenizedMessage) -> Result<Vec<f64>> {
    let cache = MessageCache::new(params, message)?;
    (0..message.len())
        .map(|i| cache.probability(params, i, params.arch.k))
        .collect()
}

/// Forward intermediates of one context encoding, kept for back-propagation.
#[derive(Debug, Clone)]
pub struct ContextTrace {
    window: Vec<Slot>,
    inputs: Vec<Vec<f64>>,
    traces: Option<(LstmTrace, LstmTrace)>,
    pub output: Vec<f64>,
}

pub fn context_forward(
    params: &ModelParameters,
    message: &TokenizedMessage,
    embeddings: &[Vec<f64>],
    target: usize,
    k: usize,
) -> Result<ContextTrace> {
    check_target(message, target)?;
    let d_h = params.arch.d_h;
    let window = context_window(message.len(), target, k);
    if !params.arch.use_context {
        return Ok(ContextTrace {
            window,
            inputs: Vec::new(),
            traces: None,
            output: vec![0.0; 2 * d_h],
        });
    }
    let inputs: Vec<Vec<f64>> = window
        .iter()
        .map(|s| match s {
            Slot::Pad => params.pad.clone(),
            Slot::Mask => params.mask.clone(),
            Slot::Token(j) => embeddings[*j].clone(),
        })
        .collect();
    let run = |cell: &LstmCellParams, dir: Direction| -> Result<LstmTrace> {
        let proj = inputs
            .iter()
            .map(|x| cell.project(x))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = proj.iter().map(Vec::as_slice).collect();
        lstm_forward_projected_trace(cell, &refs, dir)
    };
    let fwd = run(&params.lstm_forward, Direction::Forward)?;
    let bwd = run(&params.lstm_backward, Direction::Backward)?;
    let mut output = vec![0.0; 2 * d_h];
    let (f, b) = output.split_at_mut(d_h);
    mean_pool(fwd.outputs(), f);
    mean_pool(bwd.outputs(), b);
    Ok(ContextTrace {
        window,
        inputs,
        traces: Some((fwd, bwd)),
        output,
    })
}

/// Adds `∂L/∂θ` into `grads` given `d_output = ∂L/∂context`.
pub fn context_backward(
    params: &ModelParameters,
    message: &TokenizedMessage,
    trace: &ContextTrace,
    d_output: &[f64],
    grads: &mut ModelParameters,
) -> Result<()> {
    let Some((fwd, bwd)) = &trace.traces else {
        return Ok(());
    };
    let d_h = params.arch.d_h;
    let steps = trace.window.len();
    let scale = 1.0 / steps as f64;
    let inputs: Vec<&[f64]> = trace.inputs.iter().map(Vec::as_slice).collect();
    let upstream = |d: &[f64]| -> Vec<Vec<f64>> {
        vec![d.iter().map(|x| x * scale).collect::<Vec<f64>>(); steps]
    };
    let (d_f, d_b) = d_output.split_at(d_h);
    let dx_f = lstm_backward_into(
        &params.lstm_forward,
        fwd,
        &inputs,
        &upstream(d_f),
        &mut grads.lstm_forward,
    )?;
    let dx_b = lstm_backward_into(
        &params.lstm_backward,
        bwd,
        &inputs,
        &upstream(d_b),
        &mut grads.lstm_backward,
    )?;
    for ((slot, a), b) in trace.window.iter().zip(&dx_f).zip(&dx_b) {
        let mut d = a.clone();
        add_assign(&mut d, b);
        match slot {
            Slot::Pad => add_assign(&mut grads.pad, &d),
            Slot::Mask => add_assign(&mut grads.mask, &d),
            Slot::Token(j) => accumulate_token_grad(grads, &message.tokens[*j].text, &d),
        }
    }
    Ok(())
}

/// Forward pass for one token plus the gradient of `weight · BCE(ŷ, label)`.
///
/// Returns the unweighted loss and probability.
pub fn token_loss_backward(
    params: &ModelParameters,
    message: &TokenizedMessage,
    embeddings: &[Vec<f64>],
    target: usize,
    label: f64,
    weight: f64,
    grads: &mut ModelParameters,
) -> Result<(f64, f64)> {
    let trace = context_forward(params, message, embeddings, target, params.arch.k)?;
    let token = &embeddings[target];
    let p = sigmoid(logit(params, token, &trace.output));
    let (loss, d_logit) = super::loss::bce_with_grad(p, label);
    let d_logit = d_logit * weight;
    if d_logit != 0.0 {
        let d_emb = params.arch.d_emb;
        let (w_tok, w_ctx) = params.classifier_weight.split_at(d_emb);
        {
            let (g_tok, g_ctx) = grads.classifier_weight.split_at_mut(d_emb);
            axpy(d_logit, token, g_tok);
            axpy(d_logit, &trace.output, g_ctx);
        }
        grads.classifier_bias[0] += d_logit;
        let d_token: Vec<f64> = w_tok.iter().map(|w| w * d_logit).collect();
        accumulate_token_grad(grads, &message.tokens[target].text, &d_token);
        let d_ctx: Vec<f64> = w_ctx.iter().map(|w| w * d_logit).collect();
        context_backward(params, message, &trace, &d_ctx, grads)?;
    }
    Ok((loss, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::model::params::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> ModelParameters {
        let arch = Architecture {
            d_emb: 6,
            d_h: 5,
            k: 3,
            use_context: true,
        };
        ModelParameters::init(arch, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn single_char_token_is_its_row() {
        let p = model(1);
        assert_eq!(
            encode_token(&p, "a").unwrap(),
            p.char_embedding.row(CharVocabulary::index('a'))
        );
    }

    #[test]
    fn token_encoding_is_order_invariant() {
        let p = model(1);
        let ab = encode_token(&p, "ab").unwrap();
        let expected: Vec<f64> = p
            .char_embedding
            .row(CharVocabulary::index('a'))
            .iter()
            .zip(p.char_embedding.row(CharVocabulary::index('b')))
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(ab, expected);
        assert_eq!(ab, encode_token(&p, "ba").unwrap());
    }

    #[test]
    fn non_ascii_uses_oov_row() {
        let p = model(2);
        let got = encode_token(&p, "é1").unwrap();
        let expected: Vec<f64> = p
            .char_embedding
            .row(CharVocabulary::OOV)
            .iter()
            .zip(p.char_embedding.row(CharVocabulary::index('1')))
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn empty_token_rejected() {
        assert!(matches!(encode_token(&model(0), ""), Err(Error::EmptyToken)));
    }

    #[test]
    fn window_layout() {
        use Slot::*;
        assert_eq!(
            context_window(1, 0, 3),
            vec![Pad, Pad, Pad, Mask, Pad, Pad, Pad]
        );
        assert_eq!(
            context_window(5, 1, 2),
            vec![Pad, Token(0), Mask, Token(2), Token(3)]
        );
    }

    #[test]
    fn motivating_path_window_has_from_left_of_mask() {
        let m = tokenize("Reading data from /etc/data/: success");
        let target = m.token_texts().position(|t| t == "/etc/data/").unwrap();
        let w = context_window(m.len(), target, 3);
        assert_eq!(w[3], Slot::Mask);
        assert_eq!(w[2], Slot::Token(target - 1));
        assert_eq!(m.tokens[target - 1].text, "from");
    }

    #[test]
    fn single_token_context_ignores_the_token() {
        let p = model(3);
        let a = encode_context(&p, &tokenize("alpha"), 0, 3).unwrap();
        let b = encode_context(&p, &tokenize("9999"), 0, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn index_out_of_range() {
        let p = model(3);
        assert!(matches!(
            encode_context(&p, &tokenize("a b"), 2, 3),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(predict_token(&p, &tokenize("a b"), 5, 3).is_err());
    }

    #[test]
    fn zero_classifier_gives_half() {
        let mut p = model(4);
        p.classifier_weight.fill(0.0);
        p.classifier_bias[0] = 0.0;
        let m = tokenize("Connected to 10.0.0.1 port 22");
        for prob in predict_message(&p, &m).unwrap() {
            assert_eq!(prob, 0.5);
        }
    }

    #[test]
    fn cached_and_traced_contexts_agree() {
        let p = model(5);
        let m = tokenize("user=root pid 4411 (sshd) closed");
        let cache = MessageCache::new(&p, &m).unwrap();
        for i in 0..m.len() {
            let traced = context_forward(&p, &m, &cache.embeddings, i, 3).unwrap();
            assert_eq!(traced.output, cache.context(&p, i, 3).unwrap());
        }
    }

    #[test]
    fn token_only_variant_has_zero_context() {
        let mut p = model(6);
        p.arch.use_context = false;
        let m = tokenize("a b c");
        assert!(encode_context(&p, &m, 1, 3).unwrap().iter().all(|x| *x == 0.0));
    }
}
