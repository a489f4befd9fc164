use proptest::prelude::*;
use soupgnn_core::nn::{Hyperparams, ModelArch, ModelParams};
use soupgnn_core::soup::{
    greedy_soup, incremental_soup, interpolate, replay, Ingredient, SoupConfig, SoupStrategy,
};
use soupgnn_core::synth::{sbm_dataset, SbmConfig};
use soupgnn_core::train::{train_ingredient, BatchPlan, TrainContext};
use soupgnn_core::Result;

fn arch() -> ModelArch {
    ModelArch::gcn(3, 4, 2, 2)
}

/// Deterministic, bumpy stand-in for validation accuracy.
fn fake_val(p: &ModelParams<f64>) -> Result<f64> {
    let s: f64 = p
        .tensors()
        .flatten()
        .enumerate()
        .map(|(i, v)| v * ((i % 5) as f64 - 2.0))
        .sum();
    Ok((s.sin() * 32.0).round() / 64.0 + 0.5)
}

fn ingredient(id: usize, seed: u64, val_acc: f64) -> Ingredient<f64> {
    let init = ModelParams::<f64>::init(&arch(), 0).unwrap();
    let mut params = ModelParams::init(&arch(), seed).unwrap();
    for (t, i) in params.tensors_mut().zip(init.tensors()) {
        for (v, &b) in t.iter_mut().zip(i) {
            *v = 0.5 * *v + b;
        }
    }
    Ingredient {
        id,
        params,
        hyper: Hyperparams::default(),
        val_acc,
        init_fingerprint: init.fingerprint(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_is_affine(sa in 0u64..1000, sb in 0u64..1000, alpha in 0.0f64..=1.0) {
        let a = ModelParams::<f64>::init(&arch(), sa).unwrap();
        let b = ModelParams::<f64>::init(&arch(), sb).unwrap();
        let ab = interpolate(&a, &b, alpha).unwrap();
        let ba = interpolate(&b, &a, alpha).unwrap();
        let lhs = ab.tensors().flatten().zip(ba.tensors().flatten()).map(|(x, y)| x + y);
        let rhs = a.tensors().flatten().zip(b.tensors().flatten()).map(|(x, y)| x + y);
        for (l, r) in lhs.zip(rhs) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn soup_ignores_input_order(perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
        let accs = [0.61, 0.72, 0.55, 0.70, 0.64];
        let pool: Vec<Ingredient<f64>> = (0..5).map(|i| ingredient(i, 10 + i as u64, accs[i])).collect();
        let shuffled: Vec<Ingredient<f64>> = perm.iter().map(|&i| pool[i].clone()).collect();
        let cfg = SoupConfig { alpha_step: 0.1, ..Default::default() };
        let a = greedy_soup(&pool, &cfg, fake_val).unwrap();
        let b = greedy_soup(&shuffled, &cfg, fake_val).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn equal_val_acc_ties_follow_submission_order() {
    let a = ingredient(0, 1, 0.5);
    let b = ingredient(1, 2, 0.5);
    let cfg = SoupConfig {
        alpha_step: 0.5,
        ..Default::default()
    };
    let ab = greedy_soup(&[a.clone(), b.clone()], &cfg, fake_val).unwrap();
    let ba = greedy_soup(&[b, a], &cfg, fake_val).unwrap();
    assert_eq!(ab.lineage.base, soupgnn_core::soup::Member::Ingredient(0));
    assert_eq!(ba.lineage.base, soupgnn_core::soup::Member::Ingredient(1));
}

#[test]
fn duplicate_ingredients_keep_their_params() {
    let base = ingredient(0, 3, 0.6);
    let copies: Vec<Ingredient<f64>> = (0..4).map(|id| Ingredient { id, ..base.clone() }).collect();
    let s = greedy_soup(&copies, &SoupConfig::default(), fake_val).unwrap();
    assert_eq!(s.params, base.params);
    assert!(
        !s.lineage.steps.is_empty(),
        "equal candidates are always accepted"
    );
}

#[test]
fn lineage_replays_bit_identically() {
    let pool: Vec<Ingredient<f64>> = (0..6)
        .map(|i| ingredient(i, 20 + i as u64, 0.5 + 0.01 * i as f64))
        .collect();
    for strategy in [SoupStrategy::InPlace, SoupStrategy::BestAlpha] {
        let cfg = SoupConfig {
            alpha_step: 0.05,
            strategy,
        };
        let s = greedy_soup(&pool, &cfg, fake_val).unwrap();
        assert_eq!(replay(&s.lineage, &pool).unwrap(), s.params);
        let first = incremental_soup(None, &pool[..3], &cfg, fake_val).unwrap();
        let second = incremental_soup(first, &pool[3..], &cfg, fake_val)
            .unwrap()
            .unwrap();
        assert_eq!(replay(&second.lineage, &pool).unwrap(), second.params);
        assert_eq!(fake_val(&second.params).unwrap(), second.val_acc);
    }
}

#[test]
fn incremental_soup_dominates_every_ingredient_on_sbm() {
    let data = sbm_dataset::<f64>(&SbmConfig::new(100, 4, 0.15, 0.03, 8)).unwrap();
    let arch = ModelArch::gcn(16, 16, 4, 2);
    let ctx = TrainContext::new(&data, arch.clone(), BatchPlan::FullBatch, None).unwrap();
    let init = ModelParams::init(&arch, 1).unwrap();
    let ingredients: Vec<Ingredient<f64>> = (0..6)
        .map(|i| {
            let hyper = Hyperparams {
                learning_rate: [0.01, 0.005][i % 2],
                dropout_rate: [0.5, 0.2, 0.0][i % 3],
                epochs: 25,
                seed: i as u64 + 1,
                ..Hyperparams::default()
            };
            train_ingredient(&ctx, i, &init, &hyper).unwrap().0
        })
        .collect();
    let best = ingredients.iter().map(|i| i.val_acc).fold(0.0, f64::max);
    let cfg = SoupConfig::default();
    let val = |p: &ModelParams<f64>| ctx.val_acc(p);
    let first = incremental_soup(None, &ingredients[..3], &cfg, val).unwrap();
    let first_acc = first.as_ref().unwrap().val_acc;
    let s = incremental_soup(first, &ingredients[3..], &cfg, val)
        .unwrap()
        .unwrap();
    assert!(s.val_acc >= best);
    assert!(s.val_acc >= first_acc);
    assert_eq!(ctx.val_acc(&s.params).unwrap(), s.val_acc);
    assert_eq!(replay(&s.lineage, &ingredients).unwrap(), s.params);
}
