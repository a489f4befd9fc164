use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::arch::ModelArch;
use crate::real::Real;
use crate::rng::{stream_rng, Stream};

/// Layer weights and biases of one model, input layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: ModelArch,
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> ModelParams<T> {
    /// Glorot-uniform weights and zero biases, a pure function of `(arch, seed)`.
    pub fn init(arch: &ModelArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = stream_rng(seed, Stream::Init, 0, 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (rows, cols) in arch.weight_shapes() {
            let bound = glorot_bound(rows, cols);
            let data = (0..rows * cols)
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect();
            weights.push(Matrix::from_vec(rows, cols, data)?);
            biases.push(alloc::vec![T::zero(); cols]);
        }
        Ok(Self {
            arch: arch.clone(),
            weights,
            biases,
        })
    }

    pub fn zeros(arch: &ModelArch) -> Self {
        let shapes = arch.weight_shapes();
        Self {
            arch: arch.clone(),
            weights: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            biases: shapes
                .iter()
                .map(|&(_, c)| alloc::vec![T::zero(); c])
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch)
    }

    /// Tensor names and shapes in serialization order: `w0, b0, w1, b1, ...`.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push((format!("w{l}"), alloc::vec![w.rows(), w.cols()]));
            out.push((format!("b{l}"), alloc::vec![b.len()]));
        }
        out
    }

    /// Every tensor as a flat slice, in manifest order.
    pub fn tensors(&self) -> impl Iterator<Item = &[T]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn num_values(&self) -> usize {
        self.tensors().map(<[T]>::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            arch: self.arch.clone(),
            weights: self.weights.iter().map(Matrix::cast).collect(),
            biases: self
                .biases
                .iter()
                .map(|b| b.iter().map(|v| U::from_f64(v.as_f64())).collect())
                .collect(),
        }
    }

    /// Rebuilds parameters from flat tensors in manifest order.
    pub fn from_tensors(arch: &ModelArch, tensors: Vec<Vec<T>>) -> Result<Self> {
        let mut params = Self::zeros(arch);
        if tensors.len() != 2 * params.weights.len() {
            return Err(Error::DimensionMismatch {
                context: "tensor count",
                expected: 2 * params.weights.len(),
                actual: tensors.len(),
            });
        }
        for (dst, src) in params.tensors_mut().zip(tensors) {
            if dst.len() != src.len() {
                return Err(Error::DimensionMismatch {
                    context: "tensor length",
                    expected: dst.len(),
                    actual: src.len(),
                });
            }
            dst.copy_from_slice(&src);
        }
        Ok(params)
    }

    /// Errors unless `other` has the same architecture (and hence shapes).
    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::ArchMismatch(format!(
                "{:?} vs {:?}",
                self.arch, other.arch
            )));
        }
        Ok(())
    }

    /// Fingerprint of the exact parameter bits.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.num_values() * 8);
        for t in self.tensors() {
            for v in t {
                bytes.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        crate::fingerprint(&bytes)
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    num_traits::Float::sqrt(6.0 / (fan_in + fan_out) as f64)
}
