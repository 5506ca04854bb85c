//! Brute-force reference computations for tiny models.
//!
//! The log-partition function is summed over all `2^K` hidden states; for
//! each state the visible units factorize, so every unit contributes a
//! closed-form sum (binary, categorical), an analytic Gaussian integral, or
//! an explicit sum over token multisets weighted by their multinomial
//! coefficients (replicated softmax). Constrained-Poisson blocks have no
//! joint distribution and are refused.
//!
//! A replicated-softmax record is an ordered token sequence; the likelihood
//! of a multiset is that of any one of its orderings.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::model::{energy, hidden_features, log_sum_exp};
use crate::params::{Gradient, ModelParams};
use crate::schema::{UnitType, VisibleSchema, VisibleVector};
use crate::training::cd::visible_bias_stat;

/// Size limits beyond which the oracle refuses to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyModelBound {
    pub max_hidden: usize,
    /// Upper bound on joint discrete configurations `2^K * prod |values_i|`.
    pub max_configurations: u64,
    /// Longest replicated-softmax token multiset.
    pub max_tokens: usize,
    /// Largest replicated-softmax vocabulary.
    pub max_vocab: usize,
}

impl Default for TinyModelBound {
    fn default() -> Self {
        Self { max_hidden: 12, max_configurations: 1 << 20, max_tokens: 6, max_vocab: 6 }
    }
}

/// Every count vector of length `vocab` summing to `total`, with the log of
/// its multinomial coefficient.
pub fn compositions(total: usize, vocab: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(left: usize, slot: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[slot] = c;
            rec(left - c, slot + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(total, 0, &mut vec![0; vocab], &mut out);
    let ln_fact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    out.into_iter()
        .map(|c| {
            let lm = ln_fact(total) - c.iter().map(|&k| ln_fact(k)).sum::<f64>();
            (c, lm)
        })
        .collect()
}

/// One unit's contribution to a hidden state's visible sum/integral.
struct UnitFactor {
    log_sum: f64,
    /// `E[x | h]` over the unit's columns.
    mean_x: Vec<f64>,
    /// `E[d(-E)/da | h]` over the unit's columns.
    mean_bias_stat: Vec<f64>,
}

pub struct Oracle<'a> {
    schema: &'a VisibleSchema,
    params: &'a ModelParams,
    bound: TinyModelBound,
    hidden_states: Vec<Array1<f64>>,
}

impl<'a> Oracle<'a> {
    pub fn new(schema: &'a VisibleSchema, params: &'a ModelParams) -> Result<Self> {
        Self::with_bound(schema, params, TinyModelBound::default())
    }

    pub fn with_bound(schema: &'a VisibleSchema, params: &'a ModelParams, bound: TinyModelBound) -> Result<Self> {
        params.check(schema)?;
        let k = params.num_hidden();
        if k > bound.max_hidden {
            return Err(Error::Unsupported(format!(
                "oracle enumerates at most {} hidden units, model has {k}",
                bound.max_hidden
            )));
        }
        for unit in schema.units() {
            match unit.kind {
                UnitType::ConstrainedPoisson { .. } => {
                    return Err(Error::Unsupported(format!(
                        "unit {}: constrained-Poisson units have no proper joint distribution",
                        unit.name
                    )))
                }
                UnitType::ReplicatedSoftmax { vocab } if vocab > bound.max_vocab => {
                    return Err(Error::Unsupported(format!(
                        "unit {}: vocabulary {vocab} exceeds the oracle limit {}",
                        unit.name, bound.max_vocab
                    )))
                }
                _ => {}
            }
        }
        let hidden_states = (0..1usize << k)
            .map(|bits| Array1::from_iter((0..k).map(|j| f64::from(((bits >> j) & 1) as u8))))
            .collect();
        Ok(Self { schema, params, bound, hidden_states })
    }

    fn value_count(&self, unit: usize, lengths: &[usize]) -> Result<u64> {
        Ok(match self.schema.units()[unit].kind {
            UnitType::Binary => 2,
            UnitType::Gaussian { .. } => 1,
            UnitType::Categorical { categories } => categories as u64,
            UnitType::ReplicatedSoftmax { vocab } => {
                let d = lengths[unit];
                if d > self.bound.max_tokens {
                    return Err(Error::Unsupported(format!(
                        "unit {}: {d} tokens exceed the oracle limit {}",
                        self.schema.units()[unit].name,
                        self.bound.max_tokens
                    )));
                }
                compositions(d, vocab).len() as u64
            }
            UnitType::ConstrainedPoisson { .. } => unreachable!("refused in constructor"),
        })
    }

    fn check_size(&self, lengths: &[usize]) -> Result<()> {
        if lengths.len() != self.schema.len() {
            return Err(Error::Schema("length vector does not match the schema".into()));
        }
        let mut total = self.hidden_states.len() as u64;
        for i in 0..self.schema.len() {
            total = total.saturating_mul(self.value_count(i, lengths)?);
        }
        if total > self.bound.max_configurations {
            return Err(Error::Unsupported(format!(
                "{total} joint configurations exceed the oracle limit {}",
                self.bound.max_configurations
            )));
        }
        Ok(())
    }

    fn unit_factor(&self, unit: usize, top_down: &Array1<f64>, lengths: &[usize]) -> UnitFactor {
        let cols = self.schema.columns(unit);
        let a = &self.params.visible_bias;
        let logit = |c: usize| a[c] + top_down[c];
        match self.schema.units()[unit].kind {
            UnitType::Binary => {
                let c = cols.start;
                let log_sum = log_sum_exp([0.0, logit(c)]);
                let p1 = (logit(c) - log_sum).exp();
                UnitFactor { log_sum, mean_x: vec![p1], mean_bias_stat: vec![p1] }
            }
            UnitType::Categorical { .. } => {
                let terms: Vec<f64> = cols.clone().map(logit).collect();
                let log_sum = log_sum_exp(terms.iter().copied());
                let probs: Vec<f64> = terms.iter().map(|t| (t - log_sum).exp()).collect();
                UnitFactor { log_sum, mean_x: probs.clone(), mean_bias_stat: probs }
            }
            UnitType::Gaussian { sigma } => {
                // integral of exp(-(v-a)^2 / 2 sigma^2 + v c / sigma) dv
                let c = cols.start;
                let td = top_down[c];
                let log_sum = (2.0 * std::f64::consts::PI).sqrt().ln() + sigma.ln()
                    + 0.5 * td * td
                    + a[c] * td / sigma;
                UnitFactor {
                    log_sum,
                    mean_x: vec![a[c] + sigma * td],
                    mean_bias_stat: vec![td / sigma],
                }
            }
            UnitType::ReplicatedSoftmax { vocab } => {
                let comps = compositions(lengths[unit], vocab);
                let terms: Vec<f64> = comps
                    .iter()
                    .map(|(counts, lm)| {
                        lm + counts
                            .iter()
                            .zip(cols.clone())
                            .map(|(&n, c)| n as f64 * logit(c))
                            .sum::<f64>()
                    })
                    .collect();
                let log_sum = log_sum_exp(terms.iter().copied());
                let mut mean = vec![0.0; vocab];
                for ((counts, _), t) in comps.iter().zip(&terms) {
                    let w = (t - log_sum).exp();
                    for (m, &n) in mean.iter_mut().zip(counts) {
                        *m += w * n as f64;
                    }
                }
                UnitFactor { log_sum, mean_x: mean.clone(), mean_bias_stat: mean }
            }
            UnitType::ConstrainedPoisson { .. } => unreachable!("refused in constructor"),
        }
    }

    /// `log sum_v exp(-E(v, h))` for each hidden state, with per-unit factors.
    fn hidden_state_terms(&self, lengths: &[usize]) -> Result<Vec<(f64, Vec<UnitFactor>)>> {
        self.check_size(lengths)?;
        let scale = self.schema.bias_scale(lengths);
        Ok(self
            .hidden_states
            .iter()
            .map(|h| {
                let top_down = self.params.weights.dot(h);
                let factors: Vec<UnitFactor> = (0..self.schema.len())
                    .map(|i| self.unit_factor(i, &top_down, lengths))
                    .collect();
                let total = scale * self.params.hidden_bias.dot(h)
                    + factors.iter().map(|f| f.log_sum).sum::<f64>();
                (total, factors)
            })
            .collect())
    }

    /// `log Z` for records with the given per-unit token counts.
    pub fn log_partition(&self, lengths: &[usize]) -> Result<f64> {
        let terms = self.hidden_state_terms(lengths)?;
        Ok(log_sum_exp(terms.iter().map(|(t, _)| *t)))
    }

    fn neg_energies(&self, v: &VisibleVector) -> Result<Vec<f64>> {
        self.hidden_states
            .iter()
            .map(|h| energy(self.schema, self.params, v, h.view()).map(|e| -e))
            .collect()
    }

    pub fn log_likelihood(&self, v: &VisibleVector) -> Result<f64> {
        let log_z = self.log_partition(&v.lengths)?;
        Ok(log_sum_exp(self.neg_energies(v)?) - log_z)
    }

    /// `P(h_j = 1 | v)` from enumerated Boltzmann weights.
    pub fn hidden_posteriors(&self, v: &VisibleVector) -> Result<Array1<f64>> {
        let ne = self.neg_energies(v)?;
        let lse = log_sum_exp(ne.iter().copied());
        let mut post = Array1::zeros(self.params.num_hidden());
        for (h, e) in self.hidden_states.iter().zip(&ne) {
            post.scaled_add((e - lse).exp(), h);
        }
        Ok(post)
    }

    /// Exact gradient of `log P(v)` with respect to `a`, `b` and `W`.
    pub fn gradient(&self, v: &VisibleVector) -> Result<Gradient> {
        let terms = self.hidden_state_terms(&v.lengths)?;
        let log_z = log_sum_exp(terms.iter().map(|(t, _)| *t));
        let scale = v.bias_scale;
        let sigmas = self.schema.column_sigmas();
        let cols = self.schema.total_columns();
        let k = self.params.num_hidden();

        // data term
        let post = self.hidden_posteriors(v)?;
        let feats = hidden_features(self.schema, v);
        let mut grad = Gradient {
            visible_bias: visible_bias_stat(self.schema, self.params, v),
            hidden_bias: &post * scale,
            weights: feats.view().insert_axis(Axis(1)).dot(&post.view().insert_axis(Axis(0))),
        };

        // model term
        let mut model_a = Array1::<f64>::zeros(cols);
        let mut model_b = Array1::<f64>::zeros(k);
        let mut model_w = Array2::<f64>::zeros((cols, k));
        for (h, (t, factors)) in self.hidden_states.iter().zip(&terms) {
            let w = (t - log_z).exp();
            let mut mean_feat = Array1::<f64>::zeros(cols);
            for (i, f) in factors.iter().enumerate() {
                for (off, c) in self.schema.columns(i).enumerate() {
                    model_a[c] += w * f.mean_bias_stat[off];
                    mean_feat[c] = f.mean_x[off] / sigmas[c];
                }
            }
            model_b.scaled_add(w * scale, h);
            model_w += &(mean_feat.insert_axis(Axis(1)).dot(&h.view().insert_axis(Axis(0))) * w);
        }
        grad.visible_bias -= &model_a;
        grad.hidden_bias -= &model_b;
        grad.weights -= &model_w;
        Ok(grad)
    }

    /// Every discrete visible configuration with the given token counts and
    /// its multiplicity (number of token orderings).
    pub fn enumerate_visible(&self, lengths: &[usize]) -> Result<Vec<(VisibleVector, f64)>> {
        self.check_size(lengths)?;
        let mut configs = vec![(Array1::<f64>::zeros(self.schema.total_columns()), 0.0)];
        for (i, unit) in self.schema.units().iter().enumerate() {
            let cols = self.schema.columns(i);
            let options: Vec<(Vec<f64>, f64)> = match unit.kind {
                UnitType::Binary => vec![(vec![0.0], 0.0), (vec![1.0], 0.0)],
                UnitType::Categorical { categories } => (0..categories)
                    .map(|m| {
                        let mut row = vec![0.0; categories];
                        row[m] = 1.0;
                        (row, 0.0)
                    })
                    .collect(),
                UnitType::ReplicatedSoftmax { vocab } => compositions(lengths[i], vocab)
                    .into_iter()
                    .map(|(c, lm)| (c.into_iter().map(|n| n as f64).collect(), lm))
                    .collect(),
                _ => {
                    return Err(Error::Unsupported(format!(
                        "unit {}: cannot enumerate a continuous unit",
                        unit.name
                    )))
                }
            };
            let mut next = Vec::with_capacity(configs.len() * options.len());
            for (x, lm) in &configs {
                for (vals, olm) in &options {
                    let mut x = x.clone();
                    for (c, val) in cols.clone().zip(vals) {
                        x[c] = *val;
                    }
                    next.push((x, lm + olm));
                }
            }
            configs = next;
        }
        let scale = self.schema.bias_scale(lengths);
        Ok(configs
            .into_iter()
            .map(|(x, lm)| (VisibleVector { x, lengths: lengths.to_vec(), bias_scale: scale }, lm.exp()))
            .collect())
    }

    /// `E[x | h]` over every column, from brute-force enumeration of the
    /// visible space (discrete schemas only).
    pub fn visible_means(&self, h: &Array1<f64>, lengths: &[usize]) -> Result<Array1<f64>> {
        let configs = self.enumerate_visible(lengths)?;
        let logw: Vec<f64> = configs
            .iter()
            .map(|(v, mult)| energy(self.schema, self.params, v, h.view()).map(|e| mult.ln() - e))
            .collect::<Result<_>>()?;
        let lse = log_sum_exp(logw.iter().copied());
        let mut mean = Array1::zeros(self.schema.total_columns());
        for ((v, _), lw) in configs.iter().zip(&logw) {
            mean.scaled_add((lw - lse).exp(), &v.x);
        }
        Ok(mean)
    }

    /// `-E` restricted to the terms that involve unit `unit`.
    fn unit_neg_energy(&self, v: &VisibleVector, h: &Array1<f64>, unit: usize) -> f64 {
        let a = &self.params.visible_bias;
        let cols = self.schema.columns(unit);
        let top_down = self.params.weights.dot(h);
        let sigmas = self.schema.column_sigmas();
        let own = match self.schema.units()[unit].kind {
            UnitType::Gaussian { sigma } => {
                let d = v.x[cols.start] - a[cols.start];
                -d * d / (2.0 * sigma * sigma)
            }
            _ => cols.clone().map(|c| a[c] * v.x[c]).sum(),
        };
        own + cols.map(|c| v.x[c] / sigmas[c] * top_down[c]).sum::<f64>()
    }

    /// `log P(v_notS)`: the likelihood with unit `unit` summed/integrated out.
    pub fn log_marginal_without(&self, v: &VisibleVector, unit: usize) -> Result<f64> {
        let terms = self.hidden_state_terms(&v.lengths)?;
        let log_z = log_sum_exp(terms.iter().map(|(t, _)| *t));
        let ne = self.neg_energies(v)?;
        let per_h = self
            .hidden_states
            .iter()
            .zip(&ne)
            .zip(&terms)
            .map(|((h, e), (_, factors))| e - self.unit_neg_energy(v, h, unit) + factors[unit].log_sum);
        Ok(log_sum_exp(per_h) - log_z)
    }

    /// `P(v_S = value | v_notS)` for a binary or categorical unit.
    pub fn conditional(&self, v: &VisibleVector, unit: usize) -> Result<Vec<f64>> {
        let cols = self.schema.columns(unit);
        let values = match self.schema.units()[unit].kind {
            UnitType::Binary => 2,
            UnitType::Categorical { categories } => categories,
            _ => {
                return Err(Error::Unsupported(
                    "exact conditionals are available for binary and categorical units".into(),
                ))
            }
        };
        let logp: Vec<f64> = (0..values)
            .map(|val| {
                let mut w = v.clone();
                w.x.slice_mut(ndarray::s![cols.clone()]).fill(0.0);
                if values == 2 && cols.len() == 1 {
                    w.x[cols.start] = val as f64;
                } else {
                    w.x[cols.start + val] = 1.0;
                }
                self.neg_energies(&w).map(log_sum_exp)
            })
            .collect::<Result<_>>()?;
        let lse = log_sum_exp(logp.iter().copied());
        Ok(logp.iter().map(|l| (l - lse).exp()).collect())
    }

    /// Generative, discriminative and hybrid objectives averaged over `data`,
    /// with `unit` as the unseen variable. `mix` weights the generative part.
    pub fn hybrid_objectives(&self, data: &[VisibleVector], unit: usize, mix: f64) -> Result<HybridObjectives> {
        if data.is_empty() {
            return Err(Error::Usage("hybrid objectives need at least one record".into()));
        }
        if !(0.0..=1.0).contains(&mix) {
            return Err(Error::Usage(format!("mix must lie in [0, 1], got {mix}")));
        }
        if unit >= self.schema.len() {
            return Err(Error::Usage(format!("no unit with index {unit}")));
        }
        let mut generative = 0.0;
        let mut discriminative = 0.0;
        for v in data {
            let marginal = self.log_marginal_without(v, unit)?;
            generative += marginal;
            discriminative += self.log_likelihood(v)? - marginal;
        }
        let n = data.len() as f64;
        let (generative, discriminative) = (generative / n, discriminative / n);
        Ok(HybridObjectives {
            generative,
            discriminative,
            hybrid: mix * generative + (1.0 - mix) * discriminative,
        })
    }
}

/// Objectives for predicting an unseen unit: the generative log-likelihood of
/// the observed part, the conditional log-likelihood of the unseen part and
/// their convex combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridObjectives {
    pub generative: f64,
    pub discriminative: f64,
    pub hybrid: f64,
}

pub fn exact_log_partition(params: &ModelParams, schema: &VisibleSchema, lengths: &[usize]) -> Result<f64> {
    Oracle::new(schema, params)?.log_partition(lengths)
}

pub fn exact_log_likelihood(v: &VisibleVector, params: &ModelParams, schema: &VisibleSchema) -> Result<f64> {
    Oracle::new(schema, params)?.log_likelihood(v)
}

pub fn exact_gradient(v: &VisibleVector, params: &ModelParams, schema: &VisibleSchema) -> Result<Gradient> {
    Oracle::new(schema, params)?.gradient(v)
}

pub fn hybrid_objectives(
    data: &[VisibleVector],
    params: &ModelParams,
    schema: &VisibleSchema,
    target_unit: usize,
    mix: f64,
) -> Result<HybridObjectives> {
    Oracle::new(schema, params)?.hybrid_objectives(data, target_unit, mix)
}
