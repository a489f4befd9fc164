//! Weight interpolation and the greedy interpolation soup.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{accuracy, forward, Hyperparams, Mode, ModelParams};
use crate::real::Real;
use crate::sparse::SparseMatrix;

/// How an ingredient's interpolation ratio is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SoupStrategy {
    /// Sweep α ascending and replace the soup whenever validation accuracy
    /// does not drop; later α values interpolate against the updated soup.
    #[default]
    InPlace,
    /// Score every α against the fixed soup, then commit the best one if it
    /// does not drop validation accuracy.
    BestAlpha,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SoupConfig {
    /// Grid spacing; the grid is `j / n` for `j = 0..=n`, `n = ⌈1 / step⌉`.
    pub alpha_step: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub strategy: SoupStrategy,
}

impl Default for SoupConfig {
    fn default() -> Self {
        Self {
            alpha_step: 0.01,
            strategy: SoupStrategy::InPlace,
        }
    }
}

impl SoupConfig {
    /// The α grid, both endpoints included.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        if !(self.alpha_step > 0.0 && self.alpha_step <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_step must be in (0, 1], got {}",
                self.alpha_step
            )));
        }
        let n = num_traits::Float::ceil(1.0 / self.alpha_step - 1e-9) as usize;
        Ok((0..=n).map(|j| j as f64 / n as f64).collect())
    }
}

/// One independently trained candidate model.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingredient<T> {
    /// Submission index; lineage refers to ingredients by this id.
    pub id: usize,
    pub params: ModelParams<T>,
    pub hyper: Hyperparams,
    pub val_acc: f64,
    pub init_fingerprint: String,
}

/// What a lineage entry merges in.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Member {
    Ingredient(usize),
    /// An earlier soup, itself described by its lineage.
    Soup(Box<Lineage>),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineageStep {
    pub member: Member,
    pub alpha: f64,
    pub val_acc_after: f64,
}

/// Replayable recipe of a soup: start from `base`, then interpolate each step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lineage {
    pub base: Member,
    pub steps: Vec<LineageStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoupState<T> {
    pub params: ModelParams<T>,
    pub val_acc: f64,
    pub lineage: Lineage,
    pub init_fingerprint: String,
}

impl<T: Real> SoupState<T> {
    /// The soup as a candidate for further merging.
    fn as_candidate(&self) -> Candidate<'_, T> {
        Candidate {
            member: Member::Soup(Box::new(self.lineage.clone())),
            params: &self.params,
            val_acc: self.val_acc,
            init_fingerprint: &self.init_fingerprint,
        }
    }
}

/// `(1 − α)·soup + α·cand` over every tensor, computed as
/// `soup + α·(cand − soup)` so equal inputs stay bit-identical.
/// `α = 0` returns `soup` and `α = 1` returns `cand` exactly.
pub fn interpolate<T: Real>(
    soup: &ModelParams<T>,
    cand: &ModelParams<T>,
    alpha: f64,
) -> Result<ModelParams<T>> {
    soup.check_compatible(cand)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(soup.clone());
    }
    if alpha == 1.0 {
        return Ok(cand.clone());
    }
    let a = T::from_f64(alpha);
    let mut out = soup.clone();
    for (dst, src) in out.tensors_mut().zip(cand.tensors()) {
        for (d, &c) in dst.iter_mut().zip(src) {
            *d += a * (c - *d);
        }
    }
    Ok(out)
}

struct Candidate<'a, T> {
    member: Member,
    params: &'a ModelParams<T>,
    val_acc: f64,
    init_fingerprint: &'a str,
}

fn check_pool<T: Real>(pool: &[Candidate<'_, T>]) -> Result<()> {
    let first = pool.first().ok_or(Error::EmptyNodeSet)?;
    for c in &pool[1..] {
        first.params.check_compatible(c.params)?;
        if c.init_fingerprint != first.init_fingerprint {
            return Err(Error::InitMismatch(
                String::from(first.init_fingerprint),
                String::from(c.init_fingerprint),
            ));
        }
    }
    Ok(())
}

fn greedy_over<T: Real, F>(
    mut pool: Vec<Candidate<'_, T>>,
    cfg: &SoupConfig,
    val_acc: &mut F,
) -> Result<SoupState<T>>
where
    F: FnMut(&ModelParams<T>) -> Result<f64>,
{
    check_pool(&pool)?;
    let alphas = cfg.alphas()?;
    // stable: equal accuracies keep submission order
    pool.sort_by(|a, b| b.val_acc.total_cmp(&a.val_acc));
    let mut iter = pool.into_iter();
    let best = iter.next().expect("pool checked non-empty");
    let init_fingerprint = String::from(best.init_fingerprint);
    let mut soup = best.params.clone();
    let mut soup_acc = val_acc(&soup)?;
    let mut lineage = Lineage {
        base: best.member,
        steps: Vec::new(),
    };
    for cand in iter {
        match cfg.strategy {
            SoupStrategy::InPlace => {
                for &alpha in &alphas {
                    if alpha == 0.0 {
                        // interpolate(soup, ·, 0) is the soup itself
                        continue;
                    }
                    let mixed = interpolate(&soup, cand.params, alpha)?;
                    let acc = val_acc(&mixed)?;
                    if acc >= soup_acc {
                        soup = mixed;
                        soup_acc = acc;
                        lineage.steps.push(LineageStep {
                            member: cand.member.clone(),
                            alpha,
                            val_acc_after: acc,
                        });
                    }
                }
            }
            SoupStrategy::BestAlpha => {
                let mut best: Option<(f64, f64, ModelParams<T>)> = None;
                for &alpha in alphas.iter().filter(|&&a| a > 0.0) {
                    let mixed = interpolate(&soup, cand.params, alpha)?;
                    let acc = val_acc(&mixed)?;
                    if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                        best = Some((acc, alpha, mixed));
                    }
                }
                if let Some((acc, alpha, mixed)) = best {
                    if acc >= soup_acc {
                        soup = mixed;
                        soup_acc = acc;
                        lineage.steps.push(LineageStep {
                            member: cand.member,
                            alpha,
                            val_acc_after: acc,
                        });
                    }
                }
            }
        }
    }
    Ok(SoupState {
        params: soup,
        val_acc: soup_acc,
        lineage,
        init_fingerprint,
    })
}

/// Greedy interpolation soup over `ingredients`.
///
/// Ingredients are sorted by recorded validation accuracy (descending, ties
/// by input order); the soup starts as the best one and every other
/// ingredient is merged along the α grid whenever `val_acc` does not drop.
/// `val_acc` must be the same deterministic evaluation that produced the
/// recorded accuracies.
pub fn greedy_soup<T: Real, F>(
    ingredients: &[Ingredient<T>],
    cfg: &SoupConfig,
    mut val_acc: F,
) -> Result<SoupState<T>>
where
    F: FnMut(&ModelParams<T>) -> Result<f64>,
{
    let pool = ingredients
        .iter()
        .map(|i| Candidate {
            member: Member::Ingredient(i.id),
            params: &i.params,
            val_acc: i.val_acc,
            init_fingerprint: &i.init_fingerprint,
        })
        .collect();
    greedy_over(pool, cfg, &mut val_acc)
}

/// Merges newly completed ingredients into an existing soup by running the
/// greedy procedure over `{soup} ∪ new`. The soup goes first in the pool, so
/// it wins accuracy ties.
pub fn incremental_soup<T: Real, F>(
    state: Option<SoupState<T>>,
    new: &[Ingredient<T>],
    cfg: &SoupConfig,
    mut val_acc: F,
) -> Result<Option<SoupState<T>>>
where
    F: FnMut(&ModelParams<T>) -> Result<f64>,
{
    match state {
        None if new.is_empty() => Ok(None),
        None => greedy_soup(new, cfg, val_acc).map(Some),
        Some(s) if new.is_empty() => Ok(Some(s)),
        Some(s) => {
            let mut pool = Vec::with_capacity(new.len() + 1);
            pool.push(s.as_candidate());
            pool.extend(new.iter().map(|i| Candidate {
                member: Member::Ingredient(i.id),
                params: &i.params,
                val_acc: i.val_acc,
                init_fingerprint: &i.init_fingerprint,
            }));
            greedy_over(pool, cfg, &mut val_acc).map(Some)
        }
    }
}

/// Rebuilds soup parameters from a lineage and the ingredients it names.
pub fn replay<T: Real>(lineage: &Lineage, ingredients: &[Ingredient<T>]) -> Result<ModelParams<T>> {
    let resolve = |m: &Member| -> Result<ModelParams<T>> {
        match m {
            Member::Ingredient(id) => ingredients
                .iter()
                .find(|i| i.id == *id)
                .map(|i| i.params.clone())
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("lineage names unknown ingredient {id}"))
                }),
            Member::Soup(inner) => replay(inner, ingredients),
        }
    };
    let mut soup = resolve(&lineage.base)?;
    for step in &lineage.steps {
        let other = resolve(&step.member)?;
        soup = interpolate(&soup, &other, step.alpha)?;
    }
    Ok(soup)
}

/// Mean of eval-mode logits across models.
pub fn ensemble_logits<T: Real>(
    models: &[&ModelParams<T>],
    ops: &[&SparseMatrix],
    x: &Matrix<T>,
) -> Result<Matrix<T>> {
    let (first, rest) = models.split_first().ok_or(Error::EmptyNodeSet)?;
    let mut sum = forward(first, ops, x, Mode::Eval)?;
    for m in rest {
        let logits = forward(m, ops, x, Mode::Eval)?;
        for (s, &v) in sum.as_mut_slice().iter_mut().zip(logits.as_slice()) {
            *s += v;
        }
    }
    let scale = T::from_f64(1.0 / models.len() as f64);
    for s in sum.as_mut_slice() {
        *s *= scale;
    }
    Ok(sum)
}

/// Accuracy of the logit-averaging ensemble on `nodes`.
pub fn ensemble_eval<T: Real>(
    models: &[&ModelParams<T>],
    ops: &[&SparseMatrix],
    x: &Matrix<T>,
    labels: &[u32],
    nodes: &[u32],
) -> Result<f64> {
    accuracy(&ensemble_logits(models, ops, x)?, labels, nodes)
}
