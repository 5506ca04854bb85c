//! Symmetric KL distance between factorized Bernoulli posteriors and the
//! gradient of the neighbourhood objective `D_N(f) - D_notN(f)`.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::model::{hidden_conditional, hidden_features};
use crate::params::{Gradient, ModelParams};
use crate::schema::{VisibleSchema, VisibleVector};

/// Posteriors are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any log or ratio.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `(KL(p||q) + KL(q||p)) / 2` for independent Bernoulli vectors.
pub fn symmetric_kl(p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Usage(format!(
            "posterior vectors differ in length ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    Ok(symmetric_kl_unchecked(p, q))
}

pub(crate) fn symmetric_kl_unchecked(p: ArrayView1<f64>, q: ArrayView1<f64>) -> f64 {
    0.5 * p
        .iter()
        .zip(q.iter())
        .map(|(&p, &q)| {
            let (p, q) = (clamp(p), clamp(q));
            (p - q) * ((p / q).ln() - ((1.0 - p) / (1.0 - q)).ln())
        })
        .sum::<f64>()
}

/// `dD(p, q) / dp_j` for every component, zero where `p_j` is clamped.
fn distance_slope(p: ArrayView1<f64>, q: ArrayView1<f64>) -> Array1<f64> {
    Array1::from_iter(p.iter().zip(q.iter()).map(|(&p_raw, &q)| {
        let p = clamp(p_raw);
        if p != p_raw {
            return 0.0;
        }
        let q = clamp(q);
        // d KL(p||q)/dp and d KL(q||p)/dp
        let forward = (p / q).ln() - ((1.0 - p) / (1.0 - q)).ln();
        let backward = -q / p + (1.0 - q) / (1.0 - p);
        0.5 * (forward + backward)
    }))
}

/// Projected record: posteriors plus what the chain rule needs.
struct Projection {
    p: Array1<f64>,
    feats: Array1<f64>,
    bias_scale: f64,
}

impl Projection {
    fn new(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector) -> Self {
        Self {
            p: hidden_conditional(schema, params, v),
            feats: hidden_features(schema, v),
            bias_scale: v.bias_scale,
        }
    }

    /// Accumulate `weight * dD/dp . dp/dpsi` into `grad`.
    fn backprop(&self, slope: &Array1<f64>, weight: f64, grad: &mut Gradient) {
        let delta = slope * &self.p.mapv(|p| p * (1.0 - p)) * weight;
        grad.hidden_bias.scaled_add(self.bias_scale, &delta);
        for (c, &f) in self.feats.iter().enumerate() {
            if f != 0.0 {
                grad.weights.row_mut(c).scaled_add(f, &delta);
            }
        }
    }
}

/// Mean distance from `f` to each set, as `(D_N(f), D_notN(f))`. Empty sets give 0.
pub fn neighbourhood_distances(
    schema: &VisibleSchema,
    params: &ModelParams,
    f: &VisibleVector,
    neighbors: &[&VisibleVector],
    non_neighbors: &[&VisibleVector],
) -> (f64, f64) {
    let pf = hidden_conditional(schema, params, f);
    let mean = |set: &[&VisibleVector]| {
        if set.is_empty() {
            return 0.0;
        }
        set.iter()
            .map(|g| symmetric_kl_unchecked(hidden_conditional(schema, params, g).view(), pf.view()))
            .sum::<f64>()
            / set.len() as f64
    };
    (mean(neighbors), mean(non_neighbors))
}

/// Scalar objective `D_N(f) - D_notN(f)` that metric learning minimizes.
pub fn metric_objective(
    schema: &VisibleSchema,
    params: &ModelParams,
    f: &VisibleVector,
    neighbors: &[&VisibleVector],
    non_neighbors: &[&VisibleVector],
) -> f64 {
    let (intra, inter) = neighbourhood_distances(schema, params, f, neighbors, non_neighbors);
    intra - inter
}

/// Gradient of [`metric_objective`] with respect to `b` and `W`, including
/// both the `f`-side and the `g`-side terms of every pair.
pub fn metric_gradient(
    schema: &VisibleSchema,
    params: &ModelParams,
    f: &VisibleVector,
    neighbors: &[&VisibleVector],
    non_neighbors: &[&VisibleVector],
) -> Gradient {
    let mut grad = Gradient::zeros_like(params);
    let pf = Projection::new(schema, params, f);
    for (set, sign) in [(neighbors, 1.0), (non_neighbors, -1.0)] {
        if set.is_empty() {
            continue;
        }
        let weight = sign / set.len() as f64;
        for g in set {
            let pg = Projection::new(schema, params, g);
            pf.backprop(&distance_slope(pf.p.view(), pg.p.view()), weight, &mut grad);
            pg.backprop(&distance_slope(pg.p.view(), pf.p.view()), weight, &mut grad);
        }
    }
    grad
}
