//! Hand-differentiated GCN / SGC / mean-SAGE engine.

pub mod adam;
pub mod arch;
pub mod model;
pub mod params;

use alloc::borrow::Cow;
use alloc::vec::Vec;

pub use adam::Adam;
pub use arch::{Activation, Hyperparams, ModelArch, ModelKind, Normalization};
pub use model::{backward, forward, softmax_cross_entropy, Mode};
pub use params::ModelParams;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::real::Real;
use crate::rng::Rng;
use crate::sparse::SparseMatrix;

/// One training step's worth of data.
///
/// `ops` are in layer order (see [`model`]); `features` holds the rows of the
/// first operator's column space; `labels[i]` is the class of output row `i`
/// and `loss_rows` selects the output rows that contribute to the loss.
#[derive(Debug, Clone)]
pub struct Batch<'a, T: Clone> {
    pub ops: Vec<Cow<'a, SparseMatrix>>,
    pub features: Cow<'a, Matrix<T>>,
    pub labels: Cow<'a, [u32]>,
    pub loss_rows: Vec<u32>,
}

impl<T: Real> Batch<'_, T> {
    pub fn op_refs(&self) -> Vec<&SparseMatrix> {
        self.ops.iter().map(|c| c.as_ref()).collect()
    }

    pub fn num_output_rows(&self) -> usize {
        self.labels.len()
    }
}

/// Loss (cross-entropy plus `wd / 2 · Σ‖W‖²`) and its gradient.
pub fn loss_and_grads<T: Real>(
    params: &ModelParams<T>,
    batch: &Batch<'_, T>,
    hyper: &Hyperparams,
    rng: &mut Rng,
) -> Result<(f64, ModelParams<T>)> {
    if batch.loss_rows.is_empty() {
        return Err(Error::EmptyTrainingMask);
    }
    let ops = batch.op_refs();
    let mode = Mode::Train {
        dropout: hyper.dropout_rate,
        rng,
    };
    let (logits, tape) = model::forward_with_tape(params, &ops, &batch.features, mode)?;
    let (ce, dlogits) = softmax_cross_entropy(&logits, &batch.labels, &batch.loss_rows)?;
    let mut grads = backward(params, &ops, &batch.features, &tape, dlogits)?;
    let mut l2 = 0.0;
    if hyper.weight_decay > 0.0 {
        let wd = T::from_f64(hyper.weight_decay);
        for (g, w) in grads.weights.iter_mut().zip(&params.weights) {
            for (g, &w) in g.as_mut_slice().iter_mut().zip(w.as_slice()) {
                *g += wd * w;
                l2 += w.as_f64() * w.as_f64();
            }
        }
    }
    let loss = ce + 0.5 * hyper.weight_decay * l2;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok((loss, grads))
}

/// One Adam step on the batch; returns the loss before the update.
pub fn train_step<T: Real>(
    params: &mut ModelParams<T>,
    opt: &mut Adam<T>,
    batch: &Batch<'_, T>,
    hyper: &Hyperparams,
    rng: &mut Rng,
) -> Result<f64> {
    let (loss, grads) = loss_and_grads(params, batch, hyper, rng)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    opt.update(params, &grads, hyper.learning_rate);
    Ok(loss)
}

/// Fraction of `nodes` whose argmax logit (lowest class on ties) matches the label.
pub fn accuracy<T: Real>(logits: &Matrix<T>, labels: &[u32], nodes: &[u32]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    let correct = nodes
        .iter()
        .filter(|&&n| logits.argmax_row(n as usize) == labels[n as usize] as usize)
        .count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Eval-mode accuracy with full-graph operators.
pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    ops: &[&SparseMatrix],
    x: &Matrix<T>,
    labels: &[u32],
    nodes: &[u32],
) -> Result<f64> {
    let logits = forward(params, ops, x, Mode::Eval)?;
    accuracy(&logits, labels, nodes)
}

/// `Â^k X` for SGC, computed once per training run.
pub fn sgc_precompute<T: Real>(adj: &Graph, x: &Matrix<T>, k: usize) -> Result<Matrix<T>> {
    if k == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "sgc propagation depth must be >= 1",
        )));
    }
    let mut out = adj.spmm(x)?;
    for _ in 1..k {
        out = adj.spmm(&out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use alloc::vec;

    fn tiny_batch() -> (Graph, Matrix<f64>, Vec<u32>) {
        let g = Graph::from_undirected_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let x = Matrix::from_fn(4, 3, |i, j| ((i + 2 * j) % 5) as f64 * 0.2);
        (g, x, vec![0, 1, 1, 0])
    }

    #[test]
    fn zero_learning_rate_reports_loss_and_keeps_params() {
        let (g, x, labels) = tiny_batch();
        let op = SparseMatrix::from(&g.sym_normalize());
        let arch = ModelArch::gcn(3, 4, 2, 2);
        let mut params = ModelParams::<f64>::init(&arch, 1).unwrap();
        let before = params.clone();
        let hyper = Hyperparams {
            learning_rate: 0.0,
            ..Hyperparams::default()
        };
        let batch = Batch {
            ops: vec![Cow::Borrowed(&op), Cow::Borrowed(&op)],
            features: Cow::Borrowed(&x),
            labels: Cow::Borrowed(&labels[..]),
            loss_rows: vec![0, 1],
        };
        let mut opt = Adam::new(&params);
        let mut rng = stream_rng(1, Stream::Dropout, 0, 0);
        let loss = train_step(&mut params, &mut opt, &batch, &hyper, &mut rng).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert_eq!(params, before);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let (g, x, labels) = tiny_batch();
        let op = SparseMatrix::from(&g.sym_normalize());
        let arch = ModelArch::gcn(3, 4, 2, 1);
        let mut params = ModelParams::<f64>::init(&arch, 1).unwrap();
        let batch = Batch {
            ops: vec![Cow::Borrowed(&op)],
            features: Cow::Borrowed(&x),
            labels: Cow::Borrowed(&labels[..]),
            loss_rows: vec![],
        };
        let mut opt = Adam::new(&params);
        let mut rng = stream_rng(1, Stream::Dropout, 0, 0);
        let err = train_step(
            &mut params,
            &mut opt,
            &batch,
            &Hyperparams::default(),
            &mut rng,
        );
        assert_eq!(err, Err(Error::EmptyTrainingMask));
    }

    #[test]
    fn uniform_logits_score_class_zero_fraction() {
        let logits = Matrix::<f32>::zeros(4, 3);
        let labels = [0, 2, 0, 1];
        assert_eq!(accuracy(&logits, &labels, &[0, 1, 2, 3]).unwrap(), 0.5);
        let onehot =
            Matrix::<f32>::from_fn(4, 3, |i, j| if labels[i] as usize == j { 1.0 } else { 0.0 });
        assert_eq!(accuracy(&onehot, &labels, &[0, 1, 2, 3]).unwrap(), 1.0);
    }

    #[test]
    fn sgc_precompute_cases() {
        let (g, x, _) = tiny_batch();
        let a = g.sym_normalize();
        assert_eq!(sgc_precompute(&a, &x, 1).unwrap(), a.spmm(&x).unwrap());
        let id =
            Graph::from_csr(4, vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3], Some(vec![1.0; 4])).unwrap();
        assert_eq!(sgc_precompute(&id, &x, 3).unwrap(), x);
        assert!(sgc_precompute(&a, &x, 0).is_err());
    }
}
