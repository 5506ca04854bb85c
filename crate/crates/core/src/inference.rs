//! Latent projection, mean-field reconstruction and prediction of unseen
//! categorical/token variables.

use ndarray::{s, Array1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{hidden_conditional, mean_visible, softmax, visible_conditional, UnitDist};
use crate::params::ModelParams;
use crate::schema::{argmax, UnitType, VisibleSchema, VisibleVector};

/// Hidden posteriors of one record plus the code thresholded at `rho1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentProfile {
    pub posteriors: Array1<f64>,
    pub code: Vec<bool>,
}

/// `code[k]` is set iff `posteriors[k] >= rho1`.
pub fn binarize(posteriors: &Array1<f64>, rho1: f64) -> Vec<bool> {
    posteriors.iter().map(|&p| p >= rho1).collect()
}

pub fn project(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector, rho1: f64) -> Result<LatentProfile> {
    if !(rho1 > 0.0 && rho1 < 1.0) {
        return Err(Error::Usage(format!("rho1 must lie in (0, 1), got {rho1}")));
    }
    if v.x.len() != schema.total_columns() || params.num_columns() != schema.total_columns() {
        return Err(Error::Schema("record does not match the model layout".into()));
    }
    let posteriors = hidden_conditional(schema, params, v);
    let code = binarize(&posteriors, rho1);
    Ok(LatentProfile { posteriors, code })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Expected visible columns given the posteriors.
    pub mean: VisibleVector,
    /// One error per unit: squared error (binary, Gaussian), misclassification
    /// (categorical) or total variation between count proportions.
    pub unit_errors: Vec<f64>,
    /// Mean of `unit_errors`.
    pub error: f64,
}

/// Mean-field reconstruction: `v -> P(h | v) -> E[v | h = P(h | v)]`.
pub fn reconstruct(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector) -> Reconstruction {
    let post = hidden_conditional(schema, params, v);
    let dists = visible_conditional(schema, params, post.view(), &v.lengths);
    let mean = mean_visible(schema, &dists, &v.lengths);
    let unit_errors: Vec<f64> = dists
        .iter()
        .enumerate()
        .map(|(i, dist)| {
            let cols = schema.columns(i);
            let obs = v.x.slice(s![cols.clone()]);
            match dist {
                UnitDist::Bernoulli(p) => (obs[0] - p).powi(2),
                UnitDist::Gaussian { mean, .. } => (obs[0] - mean).powi(2),
                UnitDist::Categorical(p) => {
                    let predicted = argmax(p.iter().copied());
                    f64::from(u8::from(obs[predicted] != 1.0))
                }
                UnitDist::Poisson(_) | UnitDist::Replicated { .. } => {
                    let n = v.lengths[i] as f64;
                    if n == 0.0 {
                        return 0.0;
                    }
                    let rec = mean.x.slice(s![cols]);
                    0.5 * obs.iter().zip(rec.iter()).map(|(o, r)| (o - r).abs()).sum::<f64>() / n
                }
            }
        })
        .collect();
    let error = if unit_errors.is_empty() { 0.0 } else { unit_errors.iter().sum::<f64>() / unit_errors.len() as f64 };
    Reconstruction { mean, unit_errors, error }
}

/// Mean scalar reconstruction error over a dataset.
pub fn reconstruction_error(schema: &VisibleSchema, params: &ModelParams, data: &[VisibleVector]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let errs: Vec<f64> = data.par_iter().map(|v| reconstruct(schema, params, v).error).collect();
    errs.iter().sum::<f64>() / data.len() as f64
}

/// How candidate probabilities are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Softmax over the whole block, then renormalized over the candidates.
    #[default]
    Renormalized,
    /// Softmax over the whole block, left as is; candidates may sum to less than 1.
    FullVocabulary,
}

/// Candidate tokens in descending probability, ties by ascending token id.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRanking {
    pub entries: Vec<(usize, f64)>,
}

/// Mean-field prediction for a categorical or replicated-softmax unit:
/// `P(token j) ∝ exp(a_j + sum_k W_jk P(h_k = 1 | v_observed))`.
///
/// `observed` is used as given; mask the target first with
/// [`VisibleVector::without_unit`] if its own value must not leak in.
/// `candidates = None` ranks the whole block.
pub fn predict_unseen(
    schema: &VisibleSchema,
    params: &ModelParams,
    observed: &VisibleVector,
    target: usize,
    candidates: Option<&[usize]>,
    norm: Normalization,
) -> Result<PredictionRanking> {
    let unit = schema
        .units()
        .get(target)
        .ok_or_else(|| Error::Usage(format!("no unit with index {target}")))?;
    let width = match unit.kind {
        UnitType::Categorical { categories } => categories,
        UnitType::ReplicatedSoftmax { vocab } => vocab,
        _ => {
            return Err(Error::Usage(format!(
                "unit {} is {}; prediction needs a categorical or replicated_softmax unit",
                unit.name,
                unit.kind.tag()
            )))
        }
    };
    let mut cands: Vec<usize> = match candidates {
        Some(c) => c.to_vec(),
        None => (0..width).collect(),
    };
    cands.sort_unstable();
    cands.dedup();
    if cands.is_empty() {
        return Err(Error::Usage("candidate set is empty".into()));
    }
    if let Some(&bad) = cands.iter().find(|&&t| t >= width) {
        return Err(Error::Usage(format!("candidate {bad} outside vocabulary 0..{width}")));
    }
    if observed.x.len() != schema.total_columns() || params.num_columns() != schema.total_columns() {
        return Err(Error::Schema("record does not match the model layout".into()));
    }
    let post = hidden_conditional(schema, params, observed);
    let cols = schema.columns(target);
    let logits = &params.visible_bias.slice(s![cols.clone()]) + &params.weights.slice(s![cols, ..]).dot(&post);
    let probs = softmax(logits.view());
    let total: f64 = match norm {
        Normalization::Renormalized => cands.iter().map(|&t| probs[t]).sum(),
        Normalization::FullVocabulary => 1.0,
    };
    let mut entries: Vec<(usize, f64)> = cands.iter().map(|&t| (t, probs[t] / total)).collect();
    entries.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(PredictionRanking { entries })
}
