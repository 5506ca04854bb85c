//! Central finite-difference checks of the analytic gradients.

use crate::error::{Error, Result};
use crate::model::hidden_conditional;
use crate::oracle::Oracle;
use crate::params::{Gradient, ModelParams};
use crate::schema::{VisibleSchema, VisibleVector};
use crate::training::{metric_gradient, metric_objective, sparsity_gradient, sparsity_penalty};

pub const DEFAULT_STEP: f64 = 1e-6;

/// Central differences of `f` with respect to every parameter.
pub fn finite_difference<F: Fn(&ModelParams) -> Result<f64>>(params: &ModelParams, step: f64, f: F) -> Result<Gradient> {
    let mut grad = Gradient::zeros_like(params);
    let mut p = params.clone();
    let diff = |p: &mut ModelParams, get: &dyn Fn(&mut ModelParams) -> &mut f64| -> Result<f64> {
        let orig = *get(p);
        *get(p) = orig + step;
        let up = f(p)?;
        *get(p) = orig - step;
        let down = f(p)?;
        *get(p) = orig;
        Ok((up - down) / (2.0 * step))
    };
    for c in 0..params.num_columns() {
        grad.visible_bias[c] = diff(&mut p, &|p| &mut p.visible_bias[c])?;
        for j in 0..params.num_hidden() {
            grad.weights[[c, j]] = diff(&mut p, &|p| &mut p.weights[[c, j]])?;
        }
    }
    for j in 0..params.num_hidden() {
        grad.hidden_bias[j] = diff(&mut p, &|p| &mut p.hidden_bias[j])?;
    }
    Ok(grad)
}

/// Smallest denominator in [`relative_error`]. Below it both gradients are
/// rounding noise around a true zero and the comparison becomes absolute.
pub const NORM_FLOOR: f64 = 1e-10;

/// `||a - b|| / max(||a|| + ||b||, NORM_FLOOR)`.
pub fn relative_error(a: &Gradient, b: &Gradient) -> f64 {
    let mut d = a.clone();
    d.add_scaled(-1.0, b);
    d.norm() / (a.norm() + b.norm()).max(NORM_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub relative_error: f64,
}

fn mean_of<F: Fn(&VisibleVector) -> Result<Gradient>>(params: &ModelParams, data: &[VisibleVector], f: F) -> Result<Gradient> {
    let mut total = Gradient::zeros_like(params);
    for v in data {
        total.add_scaled(1.0, &f(v)?);
    }
    total.scale(1.0 / data.len() as f64);
    Ok(total)
}

/// Exact log-likelihood gradient against finite differences of the exact
/// mean log-likelihood.
pub fn check_log_likelihood(schema: &VisibleSchema, params: &ModelParams, data: &[VisibleVector]) -> Result<CheckResult> {
    let analytic = {
        let oracle = Oracle::new(schema, params)?;
        mean_of(params, data, |v| oracle.gradient(v))?
    };
    let numeric = finite_difference(params, DEFAULT_STEP, |p| {
        let oracle = Oracle::new(schema, p)?;
        Ok(data.iter().map(|v| oracle.log_likelihood(v)).sum::<Result<f64>>()? / data.len() as f64)
    })?;
    Ok(CheckResult { name: "log_likelihood", relative_error: relative_error(&analytic, &numeric) })
}

pub fn check_sparsity(schema: &VisibleSchema, params: &ModelParams, data: &[VisibleVector], groups: usize) -> Result<CheckResult> {
    let analytic = mean_of(params, data, |v| sparsity_gradient(schema, params, v, groups))?;
    let numeric = finite_difference(params, DEFAULT_STEP, |p| {
        let mut total = 0.0;
        for v in data {
            total += sparsity_penalty(hidden_conditional(schema, p, v).view(), groups)?;
        }
        Ok(total / data.len() as f64)
    })?;
    Ok(CheckResult { name: "sparsity", relative_error: relative_error(&analytic, &numeric) })
}

/// Metric gradient for `anchor` against the given neighbour sets.
pub fn check_metric(
    schema: &VisibleSchema,
    params: &ModelParams,
    anchor: &VisibleVector,
    neighbors: &[&VisibleVector],
    non_neighbors: &[&VisibleVector],
) -> Result<CheckResult> {
    let analytic = metric_gradient(schema, params, anchor, neighbors, non_neighbors);
    let numeric = finite_difference(params, DEFAULT_STEP, |p| Ok(metric_objective(schema, p, anchor, neighbors, non_neighbors)))?;
    Ok(CheckResult { name: "metric", relative_error: relative_error(&analytic, &numeric) })
}

/// Run every applicable check. The log-likelihood check is skipped for
/// schemas the oracle refuses; the metric check uses the first record as the
/// anchor with the others split into neighbours (odd positions) and
/// non-neighbours (even positions).
pub fn check_all(schema: &VisibleSchema, params: &ModelParams, data: &[VisibleVector], groups: usize) -> Result<Vec<CheckResult>> {
    if data.is_empty() {
        return Err(Error::Usage("gradient check needs at least one record".into()));
    }
    let mut out = Vec::new();
    match check_log_likelihood(schema, params, data) {
        Ok(r) => out.push(r),
        Err(Error::Unsupported(_)) => {}
        Err(e) => return Err(e),
    }
    out.push(check_sparsity(schema, params, data, groups)?);
    let rest: Vec<&VisibleVector> = data[1..].iter().collect();
    let neighbors: Vec<&VisibleVector> = rest.iter().skip(1).step_by(2).copied().collect();
    let non_neighbors: Vec<&VisibleVector> = rest.iter().step_by(2).copied().collect();
    out.push(check_metric(schema, params, &data[0], &neighbors, &non_neighbors)?);
    Ok(out)
}
