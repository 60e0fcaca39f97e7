//! Adam with bias correction over flat parameter vectors.

use crate::error::check_dim;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_hyperparams(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    /// Rebuilds a saved state.
    pub fn from_parts(m: Vec<f64>, v: Vec<f64>, t: u64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        check_dim("adam second moment", m.len(), v.len())?;
        let ok = m.iter().all(|x| x.is_finite())
            && v.iter().all(|x| x.is_finite() && *x >= 0.0)
            && (0.0..1.0).contains(&beta1)
            && (0.0..1.0).contains(&beta2)
            && eps > 0.0;
        if !ok {
            return Err(Error::NonFinite("adam state"));
        }
        Ok(AdamState { m, v, t, beta1, beta2, eps })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One update of `params` against `grads`. Non-finite gradients are
    /// rejected before anything is touched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        check_dim("adam params", self.m.len(), params.len())?;
        check_dim("adam grads", self.m.len(), grads.len())?;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let t = self.t.min(i32::MAX as u64) as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        Ok(())
    }
}
