//! Mixed l1/l2 group penalty on hidden posteriors.
//!
//! Hidden units are split into `groups` contiguous blocks of equal size and
//! the penalty is the sum of the blocks' l2 norms.

use ndarray::{s, ArrayView1};

use crate::error::{Error, Result};
use crate::model::{hidden_conditional, hidden_features};
use crate::params::{Gradient, ModelParams};
use crate::schema::{VisibleSchema, VisibleVector};

/// Group norms below this are treated as exactly zero (subgradient 0).
pub const MIN_GROUP_NORM: f64 = 1e-12;

fn group_size(hidden: usize, groups: usize) -> Result<usize> {
    if groups == 0 || !hidden.is_multiple_of(groups) {
        return Err(Error::Config(format!(
            "{hidden} hidden units cannot be split into {groups} equal groups"
        )));
    }
    Ok(hidden / groups)
}

/// l2 norm of each hidden group.
pub fn group_norms(posteriors: ArrayView1<f64>, groups: usize) -> Result<Vec<f64>> {
    let size = group_size(posteriors.len(), groups)?;
    Ok((0..groups)
        .map(|m| {
            let g = posteriors.slice(s![m * size..(m + 1) * size]);
            g.dot(&g).sqrt()
        })
        .collect())
}

pub fn sparsity_penalty(posteriors: ArrayView1<f64>, groups: usize) -> Result<f64> {
    Ok(group_norms(posteriors, groups)?.iter().sum())
}

/// Gradient of the group penalty of one record with respect to `b` and `W`
/// (the visible-bias part is zero).
///
/// `dR/db_j = s * p_j^2 (1 - p_j) / ||p_G||` where `G` is the group of `j`
/// and `s` the record's hidden-bias scale; `dR/dW_ij` multiplies the same
/// factor (without `s`) by the typed feature `x_i`.
pub fn sparsity_gradient(
    schema: &VisibleSchema,
    params: &ModelParams,
    v: &VisibleVector,
    groups: usize,
) -> Result<Gradient> {
    let k = params.num_hidden();
    let size = group_size(k, groups)?;
    let p = hidden_conditional(schema, params, v);
    let norms = group_norms(p.view(), groups)?;
    let mut delta = ndarray::Array1::zeros(k);
    for j in 0..k {
        let norm = norms[j / size];
        if norm >= MIN_GROUP_NORM {
            delta[j] = p[j] * p[j] * (1.0 - p[j]) / norm;
        }
    }
    let feats = hidden_features(schema, v);
    let mut grad = Gradient::zeros_like(params);
    grad.hidden_bias = &delta * v.bias_scale;
    for (c, &f) in feats.iter().enumerate() {
        if f != 0.0 {
            grad.weights.row_mut(c).scaled_add(f, &delta);
        }
    }
    Ok(grad)
}
