//! Adam optimizer with bias correction.
//!
//! Moment buffers live in [`AdamState`], one pair per parameter, in the
//! parameter set's declaration order. The update is the standard
//! `m/(1-b1^t)`, `v/(1-b2^t)` corrected form; a zero gradient leaves both
//! the parameter and its effective update at zero, so untouched layers do
//! not drift.

use crate::params::ParamSet;
use crate::tensor::Elem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    /// The training default used across both stages: lr 2e-4, betas
    /// (0.5, 0.999), epsilon 1e-8.
    fn default() -> Self {
        AdamParams { lr: 2e-4, beta1: 0.5, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("adam lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(format!(
                "adam betas must lie in [0, 1), got ({}, {})",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("adam epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdamState<F: Elem> {
    pub hyper: AdamParams,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Elem> AdamState<F> {
    pub fn new(params: &ParamSet<F>, hyper: AdamParams) -> Result<Self> {
        hyper.validate()?;
        let m = params.iter().map(|p| vec![F::zero(); p.tensor.numel()]).collect();
        let v = params.iter().map(|p| vec![F::zero(); p.tensor.numel()]).collect();
        Ok(AdamState { hyper, step: 0, m, v })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over a whole parameter set. `grads` must align with the
/// set's declaration order (as produced by [`ParamSet::grads`]).
pub fn adam_step<F: Elem>(params: &mut ParamSet<F>, grads: &[Vec<F>], state: &mut AdamState<F>) -> Result<()> {
    if !params.trainable() {
        return Err(Error::Contract("adam_step: parameter set is frozen".into()));
    }
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} gradients / {} moment buffers for {} parameters",
            grads.len(),
            state.m.len(),
            params.len()
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        if g.len() != params.get(i).tensor.numel() {
            return Err(Error::Contract(format!(
                "adam_step: gradient {i} has {} elements, parameter '{}' has {}",
                g.len(),
                params.get(i).name,
                params.get(i).tensor.numel()
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "adam_step: non-finite gradient for parameter '{}'",
                params.get(i).name
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let h = state.hyper;
    let (b1, b2) = (F::c(h.beta1), F::c(h.beta2));
    let (ob1, ob2) = (F::c(1.0 - h.beta1), F::c(1.0 - h.beta2));
    let bc1 = F::c(1.0 - h.beta1.powi(t));
    let bc2 = F::c(1.0 - h.beta2.powi(t));
    let lr = F::c(h.lr);
    let eps = F::c(h.epsilon);

    for (i, g) in grads.iter().enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let data = params.get_mut(i).tensor.data_mut();
        for j in 0..g.len() {
            m[j] = b1 * m[j] + ob1 * g[j];
            v[j] = b2 * v[j] + ob2 * g[j] * g[j];
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            data[j] = data[j] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn minimizes_a_quadratic() {
        let mut ps = ParamSet::<f64>::new();
        ps.push("x", Tensor::scalar(10.0));
        let hyper = AdamParams { lr: 0.1, ..AdamParams::default() };
        let mut st = AdamState::new(&ps, hyper).unwrap();
        for _ in 0..500 {
            let x = ps.get(0).tensor.data()[0];
            let g = 2.0 * (x - 3.0);
            adam_step(&mut ps, &[vec![g]], &mut st).unwrap();
        }
        let x = ps.get(0).tensor.data()[0];
        assert!((x - 3.0).abs() < 1e-3, "converged to {x}");
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut ps = ParamSet::<f32>::new();
        ps.push("w", Tensor::randn(&[4], 5).unwrap());
        let before = ps.get(0).tensor.data().to_vec();
        let mut st = AdamState::new(&ps, AdamParams::default()).unwrap();
        for _ in 0..3 {
            adam_step(&mut ps, &[vec![0.0; 4]], &mut st).unwrap();
        }
        assert_eq!(before, ps.get(0).tensor.data());
    }

    #[test]
    fn first_step_moves_by_roughly_lr() {
        // With bias correction, step 1 gives delta = lr * g / (|g| + eps).
        let mut ps = ParamSet::<f64>::new();
        ps.push("x", Tensor::scalar(0.0));
        let hyper = AdamParams { lr: 1e-3, ..AdamParams::default() };
        let mut st = AdamState::new(&ps, hyper).unwrap();
        adam_step(&mut ps, &[vec![7.0]], &mut st).unwrap();
        let x = ps.get(0).tensor.data()[0];
        assert!((x + 1e-3).abs() < 1e-9, "step was {x}");
    }

    #[test]
    fn frozen_set_is_rejected() {
        let mut ps = ParamSet::<f32>::new();
        ps.push("w", Tensor::zeros(&[2]).unwrap());
        ps.set_trainable(false);
        let mut st = AdamState::new(&ps, AdamParams::default()).unwrap();
        let err = adam_step(&mut ps, &[vec![1.0, 1.0]], &mut st).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut ps = ParamSet::<f32>::new();
        ps.push("w", Tensor::zeros(&[2]).unwrap());
        let mut st = AdamState::new(&ps, AdamParams::default()).unwrap();
        assert!(adam_step(&mut ps, &[vec![1.0; 3]], &mut st).is_err());
        assert!(adam_step(&mut ps, &[], &mut st).is_err());
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut ps = ParamSet::<f32>::new();
        ps.push("w", Tensor::zeros(&[2]).unwrap());
        let mut st = AdamState::new(&ps, AdamParams::default()).unwrap();
        let err = adam_step(&mut ps, &[vec![1.0, f32::NAN]], &mut st).unwrap_err();
        assert!(matches!(err, crate::Error::Numeric(_)));
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        let ps = {
            let mut p = ParamSet::<f32>::new();
            p.push("w", Tensor::zeros(&[1]).unwrap());
            p
        };
        for bad in [
            AdamParams { lr: 0.0, ..AdamParams::default() },
            AdamParams { beta1: 1.0, ..AdamParams::default() },
            AdamParams { beta2: -0.1, ..AdamParams::default() },
            AdamParams { epsilon: 0.0, ..AdamParams::default() },
        ] {
            assert!(AdamState::new(&ps, bad).is_err(), "{bad:?} accepted");
        }
    }
}
