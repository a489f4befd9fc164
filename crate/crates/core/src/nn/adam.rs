use alloc::vec::Vec;

use num_traits::Float;

use crate::nn::params::ModelParams;
use crate::real::Real;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<Vec<T>> = params
            .tensors()
            .map(|t| alloc::vec![T::zero(); t.len()])
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update.
    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - Float::powi(BETA1, t);
        let c2 = 1.0 - Float::powi(BETA2, t);
        let (b1, b2) = (T::from_f64(BETA1), T::from_f64(BETA2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - BETA1), T::from_f64(1.0 - BETA2));
        let step = T::from_f64(lr / c1);
        let c2_sqrt = T::from_f64(Float::sqrt(c2));
        let eps = T::from_f64(EPSILON);
        for (((w, g), m), v) in params
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..w.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                let denom = v[i].sqrt() / c2_sqrt + eps;
                w[i] -= step * m[i] / denom;
            }
        }
    }
}
