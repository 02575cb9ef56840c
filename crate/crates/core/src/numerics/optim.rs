//! Plain SGD and bias-corrected Adam over lists of parameter tensors.

use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Optimizer hyperparameters plus the running state it owns.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Number of updates applied so far.
    pub step: u64,
    /// First moments, one per parameter (Adam only).
    pub m: Vec<Tensor<T>>,
    /// Second moments, one per parameter (Adam only).
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 0.0,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Adam with the usual constants β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::sgd(learning_rate),
            OptimizerKind::Adam => Self::adam(learning_rate),
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return shape_err("optimizer_step", &[params.len()], &[grads.len()]);
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return shape_err("optimizer_step", p.shape(), g.shape());
            }
        }
        match self.kind {
            OptimizerKind::Sgd => {
                let lr = T::of(self.learning_rate);
                for (p, g) in params.iter_mut().zip(grads) {
                    *p = p.axpy(-lr, g)?;
                }
            }
            OptimizerKind::Adam => self.adam_step(params, grads)?,
        }
        self.step += 1;
        Ok(())
    }

    fn adam_step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return shape_err("optimizer_step", &[self.m.len()], &[params.len()]);
        }
        let t = (self.step + 1) as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let correction1 = T::one() - T::of(self.beta1.powi(t));
        let correction2 = T::one() - T::of(self.beta2.powi(t));
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.epsilon);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if self.m[i].shape() != p.shape() {
                return shape_err("optimizer_step", self.m[i].shape(), p.shape());
            }
            let n = p.len();
            let (mut pv, mut mv, mut vv) = (p.to_vec(), self.m[i].to_vec(), self.v[i].to_vec());
            for j in 0..n {
                let gj = g.data()[j];
                mv[j] = b1 * mv[j] + (T::one() - b1) * gj;
                vv[j] = b2 * vv[j] + (T::one() - b2) * gj * gj;
                let m_hat = mv[j] / correction1;
                let v_hat = vv[j] / correction2;
                pv[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            *p = Tensor::new(p.shape(), pv)?;
            self.m[i] = Tensor::new(p.shape(), mv)?;
            self.v[i] = Tensor::new(p.shape(), vv)?;
        }
        Ok(())
    }
}
