mod common;

use std::borrow::Cow;

use common::*;
use nalgebra::DMatrix;
use soupgnn_core::nn::{
    forward, loss_and_grads, sgc_precompute, softmax_cross_entropy, Batch, Hyperparams, Mode,
    ModelArch, ModelParams,
};
use soupgnn_core::rng::{stream_rng, Stream};
use soupgnn_core::{Graph, Matrix, SparseMatrix};

fn relu(m: DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

fn dense_w(m: &Matrix<f64>) -> DMatrix<f64> {
    to_dense(m)
}

fn bias_rows(b: &[f64], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, b.len(), |_, j| b[j])
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 =
        a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_check(arch: ModelArch, seed: u64) {
    let n = 20;
    let g = random_graph(n, 0.2, seed);
    let op = SparseMatrix::from(&match arch.normalization() {
        soupgnn_core::nn::Normalization::Symmetric => g.sym_normalize(),
        soupgnn_core::nn::Normalization::Mean => g.mean_normalize(),
    });
    let x = random_matrix(n, arch.in_dim, seed + 1);
    let labels: Vec<u32> = (0..n as u32)
        .map(|i| (i * 7 + seed as u32) % arch.out_dim as u32)
        .collect();
    let params = ModelParams::<f64>::init(&arch, seed).unwrap();
    let hyper = Hyperparams {
        dropout_rate: 0.0,
        weight_decay: 5e-3,
        ..Hyperparams::default()
    };
    let batch = Batch {
        ops: vec![Cow::Borrowed(&op); arch.num_layers],
        features: Cow::Borrowed(&x),
        labels: Cow::Borrowed(&labels[..]),
        loss_rows: (0..n as u32).filter(|i| i % 3 != 0).collect(),
    };
    let loss = |p: &ModelParams<f64>| {
        let mut rng = stream_rng(0, Stream::Dropout, 0, 0);
        loss_and_grads(p, &batch, &hyper, &mut rng).unwrap()
    };
    let (_, analytic) = loss(&params);
    let eps = 1e-5;
    let names = params.manifest();
    let flat: Vec<Vec<f64>> = params.tensors().map(<[f64]>::to_vec).collect();
    for (t, tensor) in flat.iter().enumerate() {
        let mut numeric = vec![0.0; tensor.len()];
        for k in 0..tensor.len() {
            let shifted = |d: f64| {
                let mut f = flat.clone();
                f[t][k] += d;
                ModelParams::from_tensors(&arch, f).unwrap()
            };
            numeric[k] = (loss(&shifted(eps)).0 - loss(&shifted(-eps)).0) / (2.0 * eps);
        }
        let a = analytic.tensors().nth(t).unwrap();
        let err = relative_error(a, &numeric);
        assert!(
            err < 1e-4,
            "{:?} {}: relative error {err:e}",
            arch.kind,
            names[t].0
        );
    }
}

#[test]
fn gcn_gradients_match_finite_differences() {
    for seed in 1..4 {
        gradient_check(ModelArch::gcn(5, 6, 3, 2), seed);
    }
    gradient_check(ModelArch::gcn(4, 5, 3, 3), 9);
}

#[test]
fn sgc_gradients_match_finite_differences() {
    for seed in 1..4 {
        gradient_check(ModelArch::sgc(5, 3, 2), seed);
    }
}

#[test]
fn sage_gradients_match_finite_differences() {
    for seed in 1..4 {
        gradient_check(ModelArch::sage_mean(5, 6, 3, 2), seed);
    }
}

#[test]
fn two_layer_gcn_matches_dense_formula() {
    let g = Graph::from_undirected_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let a = dense_sym_norm(&dense_adjacency(&g));
    let x = Matrix::from_vec(
        4,
        3,
        vec![1.0, 0.0, 0.5, 0.0, 1.0, -0.5, 0.3, 0.2, 0.1, -1.0, 0.4, 0.0],
    )
    .unwrap();
    let arch = ModelArch::gcn(3, 2, 2, 2);
    let mut p = ModelParams::<f64>::zeros(&arch);
    p.weights[0] = Matrix::from_vec(3, 2, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
    p.weights[1] = Matrix::from_vec(2, 2, vec![0.7, -0.1, 0.2, 0.9]).unwrap();
    p.biases[0] = vec![0.05, -0.3];
    p.biases[1] = vec![0.01, 0.02];
    let op = SparseMatrix::from(&g.sym_normalize());
    let ours = to_dense(&forward(&p, &[&op, &op], &x, Mode::Eval).unwrap());
    let h = relu(&a * to_dense(&x) * dense_w(&p.weights[0]) + bias_rows(&p.biases[0], 4));
    let oracle = &a * h * dense_w(&p.weights[1]) + bias_rows(&p.biases[1], 4);
    assert!(max_abs_diff(&ours, &oracle) < 1e-12);

    let ours32 = forward(&p.cast::<f32>(), &[&op, &op], &x.cast::<f32>(), Mode::Eval).unwrap();
    assert!(max_abs_diff(&to_dense(&ours32.cast::<f64>()), &oracle) < 1e-6);
}

#[test]
fn sage_over_singletons_is_unnormalized_gcn() {
    let isolated = Graph::from_undirected_edges(5, std::iter::empty()).unwrap();
    let x = random_matrix(5, 4, 3);
    let sage = ModelParams::<f64>::init(&ModelArch::sage_mean(4, 3, 2, 2), 4).unwrap();
    let mean = SparseMatrix::from(&isolated.mean_normalize());
    let ours = to_dense(&forward(&sage, &[&mean, &mean], &x, Mode::Eval).unwrap());
    let h = relu(to_dense(&x) * dense_w(&sage.weights[0]) + bias_rows(&sage.biases[0], 5));
    let oracle = h * dense_w(&sage.weights[1]) + bias_rows(&sage.biases[1], 5);
    assert!(max_abs_diff(&ours, &oracle) < 1e-12);

    let flat: Vec<Vec<f64>> = sage.tensors().map(<[f64]>::to_vec).collect();
    let gcn = ModelParams::from_tensors(&ModelArch::gcn(4, 3, 2, 2), flat).unwrap();
    let plain = SparseMatrix::from_rows(5, (0..5).map(|i| vec![(i, 1.0)]).collect()).unwrap();
    let unnormalized = to_dense(&forward(&gcn, &[&plain, &plain], &x, Mode::Eval).unwrap());
    assert!(max_abs_diff(&ours, &unnormalized) < 1e-12);
}

#[test]
fn sgc_equals_linear_on_precomputed_features() {
    let g = random_graph(15, 0.25, 5);
    let a = g.sym_normalize();
    let op = SparseMatrix::from(&a);
    let x = random_matrix(15, 4, 6);
    let arch = ModelArch::sgc(4, 3, 2);
    let p = ModelParams::<f64>::init(&arch, 7).unwrap();
    let propagated = to_dense(&forward(&p, &[&op, &op], &x, Mode::Eval).unwrap());
    let pre = sgc_precompute(&a, &x, 2).unwrap();
    let cached = to_dense(&forward(&p, &[], &pre, Mode::Eval).unwrap());
    let linear = to_dense(&pre) * dense_w(&p.weights[0]) + bias_rows(&p.biases[0], 15);
    assert!(max_abs_diff(&propagated, &linear) < 1e-6);
    assert!(max_abs_diff(&cached, &linear) < 1e-12);

    // 2-layer GCN, identity activation, second weight the identity
    let mut gcn_arch = ModelArch::gcn(4, 3, 3, 2);
    gcn_arch.activation = soupgnn_core::nn::Activation::Identity;
    let mut gcn = ModelParams::<f64>::zeros(&gcn_arch);
    gcn.weights[0] = p.weights[0].clone();
    gcn.weights[1] = Matrix::identity(3);
    gcn.biases[1] = p.biases[0].clone();
    let via_gcn = to_dense(&forward(&gcn, &[&op, &op], &x, Mode::Eval).unwrap());
    assert!(max_abs_diff(&via_gcn, &linear) < 1e-6);
}

#[test]
fn cross_entropy_matches_scalar_oracle() {
    let logits = Matrix::<f64>::from_vec(1, 2, vec![0.25, -1.5]).unwrap();
    let (loss, _) = softmax_cross_entropy(&logits, &[1], &[0]).unwrap();
    let oracle = -((-1.5f64).exp() / (0.25f64.exp() + (-1.5f64).exp())).ln();
    assert!((loss - oracle).abs() < 1e-14);
}

#[test]
fn cross_entropy_is_finite_for_large_logits() {
    let logits = Matrix::<f32>::from_vec(2, 3, vec![1e4, -1e4, 0.0, -1e4, 1e4, 1e4]).unwrap();
    let (loss, grad) = softmax_cross_entropy(&logits, &[1, 0], &[0, 1]).unwrap();
    assert!(loss.is_finite());
    // rows lose 2e4 and 2e4 + ln 2
    assert!((loss - (2e4 + std::f64::consts::LN_2 / 2.0)).abs() < 1e-2);
    assert!(grad.is_finite());
}

#[test]
fn eval_is_deterministic_and_training_dropout_is_not_a_noop() {
    let g = random_graph(20, 0.2, 8);
    let op = SparseMatrix::from(&g.sym_normalize());
    let x = random_matrix(20, 5, 9).cast::<f32>();
    let p = ModelParams::<f32>::init(&ModelArch::gcn(5, 16, 3, 2), 1).unwrap();
    let a = forward(&p, &[&op, &op], &x, Mode::Eval).unwrap();
    let b = forward(&p, &[&op, &op], &x, Mode::Eval).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    let mut rng = stream_rng(1, Stream::Dropout, 0, 0);
    let t = forward(
        &p,
        &[&op, &op],
        &x,
        Mode::Train {
            dropout: 0.5,
            rng: &mut rng,
        },
    )
    .unwrap();
    assert_ne!(a.as_slice(), t.as_slice());
}
