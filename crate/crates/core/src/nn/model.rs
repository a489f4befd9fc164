//! Forward and backward passes for the three fixed architectures.
//!
//! `ops[l]` is the propagation operator consumed by layer `l`: its columns
//! index the rows of that layer's input and its rows index the layer output.
//! Full-graph training passes the same square operator for every layer;
//! sampled training passes one bipartite block per layer.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::arch::{Activation, ModelKind};
use crate::nn::params::ModelParams;
use crate::real::Real;
use crate::rng::Rng;
use crate::sparse::SparseMatrix;

/// Inference or training (with inverted dropout on hidden activations).
pub enum Mode<'r> {
    Eval,
    Train { dropout: f64, rng: &'r mut Rng },
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    /// Inputs of layers `1..K` (post-activation, post-dropout).
    hidden: Vec<Matrix<T>>,
    /// Pre-activations of layers `0..K-1`.
    preacts: Vec<Matrix<T>>,
    /// Per hidden layer dropout multipliers (0 or `1 / (1 - p)`).
    masks: Vec<Option<Vec<T>>>,
}

fn check_ops<T: Real>(params: &ModelParams<T>, ops: &[&SparseMatrix]) -> Result<()> {
    let k = params.arch.num_layers;
    let ok = match params.arch.kind {
        ModelKind::Sgc => ops.is_empty() || ops.len() == k,
        _ => ops.len() == k,
    };
    if !ok {
        return Err(Error::DimensionMismatch {
            context: "propagation operator count",
            expected: k,
            actual: ops.len(),
        });
    }
    Ok(())
}

fn activate<T: Real>(act: Activation, v: T) -> T {
    match act {
        Activation::Relu => v.max(T::zero()),
        Activation::Identity => v,
    }
}

/// Logits for the output rows of the last operator.
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    ops: &[&SparseMatrix],
    x: &Matrix<T>,
    mode: Mode<'_>,
) -> Result<Matrix<T>> {
    forward_with_tape(params, ops, x, mode).map(|(logits, _)| logits)
}

pub fn forward_with_tape<T: Real>(
    params: &ModelParams<T>,
    ops: &[&SparseMatrix],
    x: &Matrix<T>,
    mut mode: Mode<'_>,
) -> Result<(Matrix<T>, Tape<T>)> {
    check_ops(params, ops)?;
    let mut tape = Tape {
        hidden: Vec::new(),
        preacts: Vec::new(),
        masks: Vec::new(),
    };
    if params.arch.kind == ModelKind::Sgc {
        let mut z = x.matmul(&params.weights[0])?;
        for op in ops {
            z = op.spmm(&z)?;
        }
        z.add_row_vector(&params.biases[0]);
        if !z.is_finite() {
            return Err(Error::NonFinite("logits"));
        }
        return Ok((z, tape));
    }

    let k = params.arch.num_layers;
    let act = params.arch.activation;
    let mut h: Option<Matrix<T>> = None;
    for (l, op) in ops.iter().enumerate() {
        let input = h.as_ref().unwrap_or(x);
        let z = input.matmul(&params.weights[l])?;
        let mut p = op.spmm(&z)?;
        p.add_row_vector(&params.biases[l]);
        if !p.is_finite() {
            return Err(Error::NonFinite("activation"));
        }
        if l + 1 == k {
            if let Some(prev) = h.take() {
                tape.hidden.push(prev);
            }
            return Ok((p, tape));
        }
        let mut a = p.clone();
        for v in a.as_mut_slice() {
            *v = activate(act, *v);
        }
        let mask = match &mut mode {
            Mode::Train { dropout, rng } if *dropout > 0.0 => {
                let keep = T::from_f64(1.0 / (1.0 - *dropout));
                let m: Vec<T> = (0..a.as_slice().len())
                    .map(|_| {
                        if rng.random::<f64>() < *dropout {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect();
                for (v, &s) in a.as_mut_slice().iter_mut().zip(&m) {
                    *v *= s;
                }
                Some(m)
            }
            _ => None,
        };
        tape.preacts.push(p);
        tape.masks.push(mask);
        if let Some(prev) = h.replace(a) {
            tape.hidden.push(prev);
        }
    }
    unreachable!("layer loop returns at the last layer")
}

/// Gradients of a scalar loss given `d loss / d logits`.
pub fn backward<T: Real>(
    params: &ModelParams<T>,
    ops: &[&SparseMatrix],
    x: &Matrix<T>,
    tape: &Tape<T>,
    dlogits: Matrix<T>,
) -> Result<ModelParams<T>> {
    check_ops(params, ops)?;
    let mut grads = params.zeros_like();
    if params.arch.kind == ModelKind::Sgc {
        grads.biases[0] = dlogits.column_sums();
        let mut dz = dlogits;
        for op in ops.iter().rev() {
            dz = op.spmm_t(&dz)?;
        }
        grads.weights[0] = x.t_matmul(&dz)?;
        return Ok(grads);
    }

    let act = params.arch.activation;
    let mut dp = dlogits;
    for l in (0..ops.len()).rev() {
        grads.biases[l] = dp.column_sums();
        let dz = ops[l].spmm_t(&dp)?;
        let input = if l == 0 { x } else { &tape.hidden[l - 1] };
        grads.weights[l] = input.t_matmul(&dz)?;
        if l == 0 {
            break;
        }
        let mut dh = dz.matmul_t(&params.weights[l])?;
        let pre = &tape.preacts[l - 1];
        let mask = tape.masks[l - 1].as_deref();
        for (i, (g, &p)) in dh.as_mut_slice().iter_mut().zip(pre.as_slice()).enumerate() {
            if let Some(m) = mask {
                *g *= m[i];
            }
            if act == Activation::Relu && p <= T::zero() {
                *g = T::zero();
            }
        }
        dp = dh;
    }
    Ok(grads)
}

/// Mean softmax cross-entropy over `rows` and its gradient w.r.t. the logits.
///
/// `labels[i]` is the class of logit row `i`. Uses max-subtraction, so the
/// loss stays finite for large logits.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Matrix<T>,
    labels: &[u32],
    rows: &[u32],
) -> Result<(f64, Matrix<T>)> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingMask);
    }
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            context: "labels vs logit rows",
            expected: logits.rows(),
            actual: labels.len(),
        });
    }
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for &r in rows {
        let r = r as usize;
        let row = logits.row(r);
        let max = row
            .iter()
            .fold(T::neg_infinity(), |m, &v| m.max(v))
            .as_f64();
        let sum: f64 = row.iter().map(|&v| exp_f64(v.as_f64() - max)).sum();
        let log_z = max + num_traits::Float::ln(sum);
        let y = labels[r] as usize;
        loss += log_z - row[y].as_f64();
        let g = grad.row_mut(r);
        for (j, (g, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = exp_f64(v.as_f64() - log_z);
            let t = if j == y { 1.0 } else { 0.0 };
            *g = T::from_f64((p - t) * scale);
        }
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok((loss, grad))
}

#[inline]
fn exp_f64(v: f64) -> f64 {
    num_traits::Float::exp(v)
}
