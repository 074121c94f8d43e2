//! LSTM cell with explicit forward and backward passes.
//!
//! Gate rows are stacked as `[input, forget, cell, output]`, each `hidden_dim` tall:
//!
//! ```text
//! z = W_x·x + W_h·h_prev + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```
//!
//! Outputs are position-aligned: `outputs[t]` is the hidden state right after consuming
//! `inputs[t]`, whichever direction the sequence was scanned in.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{add_assign, sigmoid, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn order(self, len: usize) -> Box<dyn Iterator<Item = usize>> {
        match self {
            Direction::Forward => Box::new(0..len),
            Direction::Backward => Box::new((0..len).rev()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4·hidden × input`
    pub w_x: Matrix,
    /// `4·hidden × hidden`
    pub w_h: Matrix,
    /// `4·hidden`
    pub bias: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCellParams {
            input_dim,
            hidden_dim,
            w_x: Matrix::zeros(4 * hidden_dim, input_dim),
            w_h: Matrix::zeros(4 * hidden_dim, hidden_dim),
            bias: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Xavier-uniform weights, zero biases except the forget gate at 1.0.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut bias = vec![0.0; 4 * hidden_dim];
        bias[hidden_dim..2 * hidden_dim].fill(1.0);
        LstmCellParams {
            input_dim,
            hidden_dim,
            w_x: Matrix::xavier(4 * hidden_dim, input_dim, rng),
            w_h: Matrix::xavier(4 * hidden_dim, hidden_dim, rng),
            bias,
        }
    }

    /// Zero-valued tensors with the same shapes, used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let rows = 4 * self.hidden_dim;
        let checks = [
            (rows * self.input_dim, self.w_x.as_slice().len()),
            (rows * self.hidden_dim, self.w_h.as_slice().len()),
            (rows, self.bias.len()),
            (self.input_dim, self.w_x.cols()),
            (self.hidden_dim, self.w_h.cols()),
        ];
        for (expected, actual) in checks {
            if expected != actual {
                return Err(Error::Dimension { expected, actual });
            }
        }
        Ok(())
    }

    /// `W_x·x`, the part of the gate pre-activation that depends only on the input.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; 4 * self.hidden_dim];
        self.w_x.matvec_add(x, &mut out);
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        add_assign(self.w_x.as_mut_slice(), other.w_x.as_slice());
        add_assign(self.w_h.as_mut_slice(), other.w_h.as_slice());
        add_assign(&mut self.bias, &other.bias);
    }

    pub fn scale(&mut self, s: f64) {
        for x in self
            .w_x
            .as_mut_slice()
            .iter_mut()
            .chain(self.w_h.as_mut_slice())
            .chain(&mut self.bias)
        {
            *x *= s;
        }
    }
}

#[derive(Debug, Clone)]
struct Step {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward-pass intermediates needed for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    direction: Direction,
    /// Indexed by sequence position.
    steps: Vec<Step>,
    outputs: Vec<Vec<f64>>,
}

impl LstmTrace {
    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn into_outputs(self) -> Vec<Vec<f64>> {
        self.outputs
    }
}

fn cell_step(
    params: &LstmCellParams,
    projection: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = params.hidden_dim;
    let mut z = projection.to_vec();
    // The first step of every sequence starts from h = 0.
    if h_prev.iter().any(|&v| v != 0.0) {
        params.w_h.matvec_add(h_prev, &mut z);
    }
    add_assign(&mut z, &params.bias);
    for (j, zj) in z.iter_mut().enumerate() {
        *zj = if (2 * hd..3 * hd).contains(&j) {
            zj.tanh()
        } else {
            sigmoid(*zj)
        };
    }
    let (i, rest) = z.split_at(hd);
    let (f, rest) = rest.split_at(hd);
    let (g, o) = rest.split_at(hd);
    let mut c = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for j in 0..hd {
        c[j] = f[j] * c_prev[j] + i[j] * g[j];
        tanh_c[j] = c[j].tanh();
        h[j] = o[j] * tanh_c[j];
    }
    (z, c, tanh_c, h)
}

/// Runs the cell over precomputed input projections (`W_x·x` per position).
fn run(
    params: &LstmCellParams,
    projections: &[&[f64]],
    direction: Direction,
    mut trace: Option<&mut Vec<Option<Step>>>,
) -> Vec<Vec<f64>> {
    let hd = params.hidden_dim;
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut outputs = vec![Vec::new(); projections.len()];
    for t in direction.order(projections.len()) {
        let (gates, c_new, tanh_c, h_new) = cell_step(params, projections[t], &h, &c);
        if let Some(tr) = trace.as_deref_mut() {
            tr[t] = Some(Step {
                h_prev: h.clone(),
                c_prev: c.clone(),
                gates,
                tanh_c,
            });
        }
        outputs[t] = h_new.clone();
        h = h_new;
        c = c_new;
    }
    outputs
}

fn check_projections(params: &LstmCellParams, projections: &[&[f64]]) -> Result<()> {
    if projections.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for p in projections {
        if p.len() != 4 * params.hidden_dim {
            return Err(Error::Dimension {
                expected: 4 * params.hidden_dim,
                actual: p.len(),
            });
        }
    }
    Ok(())
}

/// Hidden states for every position; initial hidden and cell states are zero.
pub fn lstm_forward(
    params: &LstmCellParams,
    inputs: &[&[f64]],
    direction: Direction,
) -> Result<Vec<Vec<f64>>> {
    Ok(lstm_forward_trace(params, inputs, direction)?.into_outputs())
}

pub fn lstm_forward_trace(
    params: &LstmCellParams,
    inputs: &[&[f64]],
    direction: Direction,
) -> Result<LstmTrace> {
    let projections = inputs
        .iter()
        .map(|x| params.project(x))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = projections.iter().map(Vec::as_slice).collect();
    lstm_forward_projected_trace(params, &refs, direction)
}

pub fn lstm_forward_projected_trace(
    params: &LstmCellParams,
    projections: &[&[f64]],
    direction: Direction,
) -> Result<LstmTrace> {
    check_projections(params, projections)?;
    let mut steps = vec![None; projections.len()];
    let outputs = run(params, projections, direction, Some(&mut steps));
    Ok(LstmTrace {
        direction,
        steps: steps.into_iter().map(|s| s.expect("every step visited")).collect(),
        outputs,
    })
}

/// Inference-only forward over cached projections; keeps no intermediates.
pub fn lstm_forward_projected(
    params: &LstmCellParams,
    projections: &[&[f64]],
    direction: Direction,
) -> Result<Vec<Vec<f64>>> {
    check_projections(params, projections)?;
    Ok(run(params, projections, direction, None))
}

/// Back-propagates `upstream[t] = ∂L/∂outputs[t]` through the trace.
///
/// Parameter gradients are added into `grads`; returns `∂L/∂inputs[t]` per position.
pub fn lstm_backward_into(
    params: &LstmCellParams,
    trace: &LstmTrace,
    inputs: &[&[f64]],
    upstream: &[Vec<f64>],
    grads: &mut LstmCellParams,
) -> Result<Vec<Vec<f64>>> {
    let hd = params.hidden_dim;
    if upstream.len() != trace.steps.len() || inputs.len() != trace.steps.len() {
        return Err(Error::Dimension {
            expected: trace.steps.len(),
            actual: upstream.len().min(inputs.len()),
        });
    }
    for u in upstream {
        if u.len() != hd {
            return Err(Error::Dimension {
                expected: hd,
                actual: u.len(),
            });
        }
    }

    let mut d_inputs = vec![Vec::new(); inputs.len()];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    let reverse = match trace.direction {
        Direction::Forward => Direction::Backward,
        Direction::Backward => Direction::Forward,
    };
    for t in reverse.order(inputs.len()) {
        let step = &trace.steps[t];
        let (i, rest) = step.gates.split_at(hd);
        let (f, rest) = rest.split_at(hd);
        let (g, o) = rest.split_at(hd);
        for j in 0..hd {
            let dh = upstream[t][j] + dh_next[j];
            let tc = step.tanh_c[j];
            let dc = dh * o[j] * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * g[j] * i[j] * (1.0 - i[j]);
            dz[hd + j] = dc * step.c_prev[j] * f[j] * (1.0 - f[j]);
            dz[2 * hd + j] = dc * i[j] * (1.0 - g[j] * g[j]);
            dz[3 * hd + j] = dh * tc * o[j] * (1.0 - o[j]);
            dc_next[j] = dc * f[j];
        }
        grads.w_x.add_outer(&dz, inputs[t]);
        grads.w_h.add_outer(&dz, &step.h_prev);
        add_assign(&mut grads.bias, &dz);

        let mut dx = vec![0.0; params.input_dim];
        params.w_x.matvec_t_add(&dz, &mut dx);
        d_inputs[t] = dx;
        dh_next.fill(0.0);
        params.w_h.matvec_t_add(&dz, &mut dh_next);
    }
    Ok(d_inputs)
}

/// Fresh parameter gradients and input gradients for one sequence.
pub fn lstm_backward(
    params: &LstmCellParams,
    inputs: &[&[f64]],
    direction: Direction,
    upstream: &[Vec<f64>],
) -> Result<(LstmCellParams, Vec<Vec<f64>>)> {
    let trace = lstm_forward_trace(params, inputs, direction)?;
    let mut grads = params.zeros_like();
    let d_inputs = lstm_backward_into(params, &trace, inputs, upstream, &mut grads)?;
    Ok((grads, d_inputs))
}
