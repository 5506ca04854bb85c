//! Energy, factorized conditionals and Gibbs samplers for the mixed-variate RBM.
//!
//! The joint energy is
//!
//! ```text
//! -E(v, h) = sum_i F_i(v_i) + a'v + s * b'h + h'W'x(v)
//! ```
//!
//! where `x(v)` is the typed feature vector (bits, `v / sigma` for Gaussian
//! units, one-hot rows, token counts) and `s` is the hidden-bias scale
//! (the token count when the schema has a replicated-softmax block, else 1).
//! Gaussian units use the `-(v - a)^2 / 2 sigma^2` form in place of `a v`.

use ndarray::{s, Array1, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::schema::{UnitType, VisibleSchema, VisibleVector};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: ArrayView1<f64>) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

/// Typed features seen by the hidden layer: raw columns with Gaussian
/// columns divided by their sigma.
pub fn hidden_features(schema: &VisibleSchema, v: &VisibleVector) -> Array1<f64> {
    &v.x / schema.column_sigmas()
}

fn check_visible(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector) -> Result<()> {
    if v.x.len() != schema.total_columns() || params.num_columns() != schema.total_columns() {
        return Err(Error::Schema(format!(
            "visible vector has {} columns, parameters {}, schema {}",
            v.x.len(),
            params.num_columns(),
            schema.total_columns()
        )));
    }
    if v.x.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("visible vector has non-finite entries".into()));
    }
    Ok(())
}

/// Hidden pre-activations `s * b + W'x(v)`.
pub fn hidden_preactivation(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector) -> Array1<f64> {
    let feats = hidden_features(schema, v);
    let mut pre = params.weights.t().dot(&feats);
    pre.scaled_add(v.bias_scale, &params.hidden_bias);
    pre
}

/// Posterior `P(h_j = 1 | v)` for every hidden unit.
pub fn hidden_conditional(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector) -> Array1<f64> {
    hidden_preactivation(schema, params, v).mapv(sigmoid)
}

/// Joint energy `E(v, h)`. Undefined for constrained-Poisson blocks, which
/// only have conditionals.
pub fn energy(
    schema: &VisibleSchema,
    params: &ModelParams,
    v: &VisibleVector,
    h: ArrayView1<f64>,
) -> Result<f64> {
    check_visible(schema, params, v)?;
    if h.len() != params.num_hidden() {
        return Err(Error::Schema(format!(
            "hidden state has {} units, model has {}",
            h.len(),
            params.num_hidden()
        )));
    }
    if h.iter().any(|&b| b != 0.0 && b != 1.0) {
        return Err(Error::Validation("hidden state must be binary".into()));
    }
    if schema.has_constrained_poisson() {
        return Err(Error::Unsupported(
            "constrained-Poisson units define conditionals only, not a joint energy".into(),
        ));
    }
    let a = &params.visible_bias;
    let mut neg = 0.0;
    for (i, unit) in schema.units().iter().enumerate() {
        let cols = schema.columns(i);
        match unit.kind {
            UnitType::Gaussian { sigma } => {
                let c = cols.start;
                let d = v.x[c] - a[c];
                neg -= d * d / (2.0 * sigma * sigma);
            }
            _ => {
                for c in cols {
                    neg += a[c] * v.x[c];
                }
            }
        }
    }
    neg += v.bias_scale * params.hidden_bias.dot(&h);
    let feats = hidden_features(schema, v);
    neg += feats.dot(&params.weights.dot(&h));
    Ok(-neg)
}

/// Conditional distribution of one visible unit given the hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitDist {
    Bernoulli(f64),
    Gaussian { mean: f64, sd: f64 },
    Categorical(Vec<f64>),
    /// Poisson rates, summing to the record's total count.
    Poisson(Vec<f64>),
    /// Softmax over the vocabulary with the number of tokens to draw.
    Replicated { probs: Vec<f64>, draws: usize },
}

impl UnitDist {
    /// Expected value of every column of the unit.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            UnitDist::Bernoulli(p) => vec![*p],
            UnitDist::Gaussian { mean, .. } => vec![*mean],
            UnitDist::Categorical(p) => p.clone(),
            UnitDist::Poisson(r) => r.clone(),
            UnitDist::Replicated { probs, draws } => probs.iter().map(|p| p * *draws as f64).collect(),
        }
    }
}

/// Per-unit conditionals `P(v_i | h)`. `hidden` may hold bits or mean-field
/// posteriors. `lengths[i]` supplies the token count of each count block.
pub fn visible_conditional(
    schema: &VisibleSchema,
    params: &ModelParams,
    hidden: ArrayView1<f64>,
    lengths: &[usize],
) -> Vec<UnitDist> {
    let top_down = params.weights.dot(&hidden);
    let a = &params.visible_bias;
    schema
        .units()
        .iter()
        .enumerate()
        .map(|(i, unit)| {
            let cols = schema.columns(i);
            let logits = &a.slice(s![cols.clone()]) + &top_down.slice(s![cols.clone()]);
            match unit.kind {
                UnitType::Binary => UnitDist::Bernoulli(sigmoid(logits[0])),
                UnitType::Gaussian { sigma } => UnitDist::Gaussian {
                    mean: a[cols.start] + sigma * top_down[cols.start],
                    sd: sigma,
                },
                UnitType::Categorical { .. } => UnitDist::Categorical(softmax(logits.view())),
                UnitType::ConstrainedPoisson { .. } => {
                    let n = lengths[i] as f64;
                    UnitDist::Poisson(softmax(logits.view()).into_iter().map(|p| p * n).collect())
                }
                UnitType::ReplicatedSoftmax { .. } => UnitDist::Replicated {
                    probs: softmax(logits.view()),
                    draws: lengths[i],
                },
            }
        })
        .collect()
}

/// Draw binary hidden states from posteriors.
pub fn sample_hidden<R: Rng + ?Sized>(posteriors: ArrayView1<f64>, rng: &mut R) -> Array1<f64> {
    posteriors.mapv(|p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
}

/// How visible reconstructions are drawn during Gibbs sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct SampleOptions {
    /// Add Gaussian noise instead of using the noise-free mean.
    pub gaussian_noise: bool,
    /// Draw Poisson counts instead of using the mean-rate vector.
    pub poisson_counts: bool,
}


fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draw a visible configuration from per-unit conditionals.
pub fn sample_visible<R: Rng + ?Sized>(
    schema: &VisibleSchema,
    dists: &[UnitDist],
    lengths: &[usize],
    opts: SampleOptions,
    rng: &mut R,
) -> VisibleVector {
    let mut x = Array1::zeros(schema.total_columns());
    for (i, dist) in dists.iter().enumerate() {
        let off = schema.columns(i).start;
        match dist {
            UnitDist::Bernoulli(p) => x[off] = if rng.gen::<f64>() < *p { 1.0 } else { 0.0 },
            UnitDist::Gaussian { mean, sd } => {
                x[off] = if opts.gaussian_noise {
                    mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
                } else {
                    *mean
                }
            }
            UnitDist::Categorical(p) => x[off + draw_index(p, rng)] = 1.0,
            UnitDist::Poisson(rates) => {
                for (t, &r) in rates.iter().enumerate() {
                    x[off + t] = if opts.poisson_counts && r > 0.0 {
                        Poisson::new(r).map(|d| d.sample(rng)).unwrap_or(0.0)
                    } else {
                        r
                    };
                }
            }
            UnitDist::Replicated { probs, draws } => {
                for _ in 0..*draws {
                    x[off + draw_index(probs, rng)] += 1.0;
                }
            }
        }
    }
    VisibleVector {
        x,
        lengths: lengths.to_vec(),
        bias_scale: schema.bias_scale(lengths),
    }
}

/// Expected visible columns under the conditionals (no sampling).
pub fn mean_visible(schema: &VisibleSchema, dists: &[UnitDist], lengths: &[usize]) -> VisibleVector {
    let mut x = Array1::zeros(schema.total_columns());
    for (i, dist) in dists.iter().enumerate() {
        let off = schema.columns(i).start;
        for (k, m) in dist.mean().into_iter().enumerate() {
            x[off + k] = m;
        }
    }
    VisibleVector {
        x,
        lengths: lengths.to_vec(),
        bias_scale: schema.bias_scale(lengths),
    }
}
