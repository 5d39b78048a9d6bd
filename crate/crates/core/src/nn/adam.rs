use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam optimizer state for an ordered list of parameter slots.
///
/// Moments are allocated on the first step and must keep the same slot
/// shapes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub(crate) lr: f64,
    pub(crate) beta1: f64,
    pub(crate) beta2: f64,
    pub(crate) epsilon: f64,
    pub(crate) step: u64,
    pub(crate) first_moment: Vec<Vec<f64>>,
    pub(crate) second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Result<Self> {
        Self::with_constants(lr, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_constants(lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Config(alloc::format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(alloc::format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(alloc::format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    /// Restores a saved state. Moments may be empty (no step taken yet).
    pub fn from_parts(
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step: u64,
        first_moment: Vec<Vec<f64>>,
        second_moment: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut s = Self::with_constants(lr, beta1, beta2, epsilon)?;
        check_dim("adam moment slots", first_moment.len(), second_moment.len())?;
        for (m, v) in first_moment.iter().zip(&second_moment) {
            check_dim("adam moment slot", m.len(), v.len())?;
        }
        s.step = step;
        s.first_moment = first_moment;
        s.second_moment = second_moment;
        Ok(s)
    }

    #[inline]
    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    #[inline]
    pub fn betas(&self) -> (f64, f64) {
        (self.beta1, self.beta2)
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// One bias-corrected Adam update. Nothing is modified when any gradient
    /// is non-finite or shapes disagree.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_dim("adam gradient slots", params.len(), grads.len())?;
        for (p, g) in params.iter().zip(grads) {
            check_dim("adam gradient slot", p.len(), g.len())?;
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradient"));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| alloc::vec![0.0; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else {
            check_dim("adam moment slots", self.first_moment.len(), params.len())?;
            for (m, p) in self.first_moment.iter().zip(params.iter()) {
                check_dim("adam moment slot", m.len(), p.len())?;
            }
        }

        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(self.beta1, t);
        let bc2 = 1.0 - libm::pow(self.beta2, t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[slot];
            let v = &mut self.second_moment[slot];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}
