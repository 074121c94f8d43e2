use crate::error::{Error, Result};

/// A fixed, ordered collection of named parameter tensors.
///
/// Gradient buffers implement this with the same tensor order and shapes as the
/// parameters they belong to.
pub trait TensorSet {
    fn tensors(&self) -> Vec<(&'static str, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: TensorSet + ?Sized>(params: &P) -> AdamState {
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        AdamState {
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is non-finite.
pub fn adam_step<P, G>(params: &mut P, grads: &G, state: &mut AdamState, lr: f64) -> Result<()>
where
    P: TensorSet + ?Sized,
    G: TensorSet + ?Sized,
{
    let grads = grads.tensors();
    if grads.len() != state.first.len() {
        return Err(Error::Dimension {
            expected: state.first.len(),
            actual: grads.len(),
        });
    }
    for ((name, g), m) in grads.iter().zip(&state.first) {
        if g.len() != m.len() {
            return Err(Error::Dimension {
                expected: m.len(),
                actual: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((_, p), (_, g)), (m, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(&grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat(Vec<f64>);

    impl TensorSet for Flat {
        fn tensors(&self) -> Vec<(&'static str, &[f64])> {
            vec![("w", &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
            vec![("w", &mut self.0)]
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Flat(vec![1.0, -2.0]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &Flat(vec![0.0, 0.0]), &mut s, 0.002).unwrap();
        assert_eq!(p.0, vec![1.0, -2.0]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1, so Δ = lr / (1 + ε).
        let mut p = Flat(vec![0.5]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &Flat(vec![1.0]), &mut s, 0.002).unwrap();
        let expected = 0.5 - 0.002 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() < 1e-15);
        assert!((0.5 - p.0[0] - 0.002).abs() < 1e-6);
    }

    #[test]
    fn constant_gradient_steps_approach_sign() {
        let mut p = Flat(vec![0.0, 0.0]);
        let mut s = AdamState::new(&p);
        let lr = 0.01;
        let mut last = p.0.clone();
        for _ in 0..500 {
            adam_step(&mut p, &Flat(vec![3.0, -0.2]), &mut s, lr).unwrap();
            let delta: Vec<f64> = p.0.iter().zip(&last).map(|(a, b)| a - b).collect();
            last = p.0.clone();
            assert!((delta[0] + lr).abs() < 1e-9);
            assert!((delta[1] - lr).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut p = Flat(vec![1.0]);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &Flat(vec![f64::NAN]), &mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "w"));
        assert_eq!(p.0, vec![1.0]);
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Flat(vec![1.0]);
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &Flat(vec![1.0, 2.0]), &mut s, 0.1).is_err());
    }
}
