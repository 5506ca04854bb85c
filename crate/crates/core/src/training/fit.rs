//! Stochastic gradient ascent on the regularized log-likelihood.

use std::collections::BTreeMap;

use ndarray::Array1;
use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use super::cd::{cd_gradient, CdOptions, PersistentChains};
use super::config::TrainConfig;
use super::metric::{metric_gradient, symmetric_kl_unchecked};
use super::sparsity::{group_norms, sparsity_gradient};
use crate::error::{Error, Result};
use crate::inference::reconstruction_error;
use crate::model::hidden_conditional;
use crate::oracle::Oracle;
use crate::params::{Gradient, ModelParams};
use crate::rng::{stream_rng, Stream};
use crate::schema::{VisibleSchema, VisibleVector};

/// Statistics recorded at the end of each epoch. Regularizer columns are
/// present only when the matching regularizer is active.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub recon_error: f64,
    pub mean_group_norm: Option<f64>,
    pub intra_kl: Option<f64>,
    pub inter_kl: Option<f64>,
    /// Mean exact log-likelihood, only in exact-gradient mode.
    pub exact_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

/// Mean group norm over records and groups.
pub fn mean_group_norm(schema: &VisibleSchema, params: &ModelParams, data: &[VisibleVector], groups: usize) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let per: Vec<f64> = data
        .par_iter()
        .map(|v| {
            let norms = group_norms(hidden_conditional(schema, params, v).view(), groups)?;
            Ok(norms.iter().sum::<f64>() / groups as f64)
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / data.len() as f64)
}

/// Mean symmetric KL over all same-concept pairs and over all
/// different-concept pairs of labeled records. Unlabeled records are skipped;
/// a pair set with no members gives 0.
pub fn concept_distances(
    schema: &VisibleSchema,
    params: &ModelParams,
    data: &[VisibleVector],
    labels: &[Option<u32>],
) -> (f64, f64) {
    let labeled: Vec<(Array1<f64>, u32)> = data
        .par_iter()
        .zip(labels.par_iter())
        .filter_map(|(v, l)| l.map(|l| (hidden_conditional(schema, params, v), l)))
        .collect();
    let rows: Vec<(f64, usize, f64, usize)> = (0..labeled.len())
        .into_par_iter()
        .map(|i| {
            let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
            for j in i + 1..labeled.len() {
                let d = symmetric_kl_unchecked(labeled[i].0.view(), labeled[j].0.view());
                if labeled[i].1 == labeled[j].1 {
                    intra += d;
                    n_intra += 1;
                } else {
                    inter += d;
                    n_inter += 1;
                }
            }
            (intra, n_intra, inter, n_inter)
        })
        .collect();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
    for r in rows {
        intra += r.0;
        n_intra += r.1;
        inter += r.2;
        n_inter += r.3;
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (mean(intra, n_intra), mean(inter, n_inter))
}

/// Same-concept peers and other-concept records for every labeled record.
struct ConceptIndex {
    members: BTreeMap<u32, Vec<usize>>,
    labeled: Vec<usize>,
}

impl ConceptIndex {
    fn new(labels: &[Option<u32>]) -> Self {
        let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        let mut labeled = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                members.entry(*l).or_default().push(i);
                labeled.push(i);
            }
        }
        Self { members, labeled }
    }

    /// Up to `n_pos` neighbours and `n_neg` non-neighbours of record `i`,
    /// sampled uniformly without replacement.
    fn sample_pairs<R: Rng + ?Sized>(&self, i: usize, label: u32, n_pos: usize, n_neg: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let same = &self.members[&label];
        let peers = same.len() - 1;
        let pos = sample(rng, peers, n_pos.min(peers))
            .into_iter()
            .map(|k| {
                // skip record i itself
                let pos_i = same.binary_search(&i).expect("record is a member of its concept");
                same[if k >= pos_i { k + 1 } else { k }]
            })
            .collect();
        let others = self.labeled.len() - same.len();
        let neg = sample(rng, others, n_neg.min(others))
            .into_iter()
            .map(|k| self.nth_other(label, k))
            .collect();
        (pos, neg)
    }

    /// The `k`-th labeled record (in index order) whose concept is not `label`.
    fn nth_other(&self, label: u32, mut k: usize) -> usize {
        for (l, m) in &self.members {
            if *l == label {
                continue;
            }
            if k < m.len() {
                return m[k];
            }
            k -= m.len();
        }
        unreachable!("k is below the number of other-concept records")
    }
}

fn check_inputs(schema: &VisibleSchema, data: &[VisibleVector], labels: Option<&[Option<u32>]>, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Usage("training needs at least one record".into()));
    }
    if let Some(bad) = data.iter().position(|v| v.x.len() != schema.total_columns() || v.lengths.len() != schema.len()) {
        return Err(Error::Schema(format!("record {bad} does not match the schema layout")));
    }
    if let Some(l) = labels {
        if l.len() != data.len() {
            return Err(Error::Usage(format!("{} labels for {} records", l.len(), data.len())));
        }
    }
    if config.beta > 0.0 && labels.is_none_or(|l| l.iter().all(Option::is_none)) {
        return Err(Error::Usage("metric learning (beta > 0) needs concept labels".into()));
    }
    if config.alpha > 0.0 && !config.hidden.is_multiple_of(config.groups) {
        return Err(Error::Config(format!(
            "hidden units ({}) must divide evenly into {} groups",
            config.hidden, config.groups
        )));
    }
    Ok(())
}

/// Per-row step sizes for `W` and per-column ones for `a`.
fn learning_rates(schema: &VisibleSchema, config: &TrainConfig) -> (Array1<f64>, Array1<f64>) {
    let mut lr_w = Array1::from_elem(schema.total_columns(), config.lr_w);
    let mut lr_a = Array1::from_elem(schema.total_columns(), config.lr_a);
    for (i, unit) in schema.units().iter().enumerate() {
        if let Some(scale) = config.lr_scale.get(unit.kind.tag()) {
            for c in schema.columns(i) {
                lr_w[c] *= scale;
                lr_a[c] *= scale;
            }
        }
    }
    (lr_w, lr_a)
}

/// Sum of per-record regularizer gradients for one minibatch, already
/// multiplied by `-alpha` and `-beta` and divided by the batch size.
fn regularizer_gradient<R: Rng + ?Sized>(
    schema: &VisibleSchema,
    params: &ModelParams,
    data: &[VisibleVector],
    batch: &[usize],
    labels: Option<&[Option<u32>]>,
    index: Option<&ConceptIndex>,
    config: &TrainConfig,
    pair_rng: &mut R,
) -> Result<Option<Gradient>> {
    let sparse = config.alpha > 0.0;
    let metric = config.beta > 0.0;
    if !sparse && !metric {
        return Ok(None);
    }
    // pairs are drawn sequentially so the result does not depend on threads
    let pairs: Vec<Option<(Vec<usize>, Vec<usize>)>> = batch
        .iter()
        .map(|&i| match (metric, labels.and_then(|l| l[i]), index) {
            (true, Some(label), Some(index)) => {
                Some(index.sample_pairs(i, label, config.neighbors, config.non_neighbors, pair_rng))
            }
            _ => None,
        })
        .collect();
    let terms: Vec<Gradient> = batch
        .par_iter()
        .zip(pairs.par_iter())
        .map(|(&i, pair)| {
            let mut g = Gradient::zeros_like(params);
            if sparse {
                g.add_scaled(-config.alpha, &sparsity_gradient(schema, params, &data[i], config.groups)?);
            }
            if let Some((pos, neg)) = pair {
                let pos: Vec<&VisibleVector> = pos.iter().map(|&j| &data[j]).collect();
                let neg: Vec<&VisibleVector> = neg.iter().map(|&j| &data[j]).collect();
                g.add_scaled(-config.beta, &metric_gradient(schema, params, &data[i], &pos, &neg));
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = Gradient::zeros_like(params);
    for t in &terms {
        total.add_scaled(1.0, t);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok(Some(total))
}

/// Train a model from scratch.
///
/// `labels[i]` is the concept of record `i` (`None` for unlabeled records);
/// labels are required when `config.beta > 0`. Every random choice comes
/// from named streams of `config.seed`, so identical inputs give bit-identical
/// parameters regardless of the thread count.
///
/// A non-finite parameter aborts with [`Error::Diverged`] carrying the
/// parameters from before the failing update.
pub fn fit(
    schema: &VisibleSchema,
    data: &[VisibleVector],
    labels: Option<&[Option<u32>]>,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    check_inputs(schema, data, labels, config)?;
    let mut init_rng = stream_rng(config.seed, Stream::Init);
    let mut params = ModelParams::random(schema.total_columns(), config.hidden, config.init_std, &mut init_rng);
    if config.categorical_log_freq_init {
        params.init_categorical_log_freq(schema, data);
    }
    if config.exact_gradient {
        return fit_exact(schema, data, labels, config, params);
    }

    let (lr_w, lr_a) = learning_rates(schema, config);
    let opts = CdOptions {
        cd_steps: config.cd_steps,
        mean_field_data: config.mean_field_data,
        sample: config.sample_options(),
    };
    let mut chains = config.persistent.then(|| PersistentChains::new(config.batch_size));
    let mut chain_rng = stream_rng(config.seed, Stream::Chain);
    let mut shuffle_rng = stream_rng(config.seed, Stream::Shuffle);
    let mut pair_rng = stream_rng(config.seed, Stream::Pairs);
    let index = labels.map(ConceptIndex::new);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let records: Vec<&VisibleVector> = batch.iter().map(|&i| &data[i]).collect();
            let mut grad = cd_gradient(schema, &params, &records, &opts, chains.as_mut(), &mut chain_rng)?;
            if let Some(reg) =
                regularizer_gradient(schema, &params, data, batch, labels, index.as_ref(), config, &mut pair_rng)?
            {
                grad.add_scaled(1.0, &reg);
            }
            step(&mut params, &grad, &lr_w, &lr_a, config.lr_b, epoch)?;
        }
        log.epochs.push(epoch_stats(schema, &params, data, labels, config, epoch, None)?);
    }
    Ok((params, log))
}

fn step(params: &mut ModelParams, grad: &Gradient, lr_w: &Array1<f64>, lr_a: &Array1<f64>, lr_b: f64, epoch: usize) -> Result<()> {
    let before = params.clone();
    params.apply(grad, lr_w, lr_a, lr_b);
    if !params.is_finite() {
        return Err(Error::Diverged { epoch, checkpoint: Box::new(before) });
    }
    Ok(())
}

fn epoch_stats(
    schema: &VisibleSchema,
    params: &ModelParams,
    data: &[VisibleVector],
    labels: Option<&[Option<u32>]>,
    config: &TrainConfig,
    epoch: usize,
    exact_log_likelihood: Option<f64>,
) -> Result<EpochStats> {
    let mean_group_norm = if config.alpha > 0.0 {
        Some(mean_group_norm(schema, params, data, config.groups)?)
    } else {
        None
    };
    let (intra_kl, inter_kl) = match labels {
        Some(l) if config.beta > 0.0 => {
            let (intra, inter) = concept_distances(schema, params, data, l);
            (Some(intra), Some(inter))
        }
        _ => (None, None),
    };
    Ok(EpochStats {
        epoch,
        recon_error: reconstruction_error(schema, params, data),
        mean_group_norm,
        intra_kl,
        inter_kl,
        exact_log_likelihood,
    })
}

/// Mean exact log-likelihood of a dataset (tiny models only).
pub fn mean_exact_log_likelihood(schema: &VisibleSchema, params: &ModelParams, data: &[VisibleVector]) -> Result<f64> {
    let oracle = Oracle::new(schema, params)?;
    let lls: Vec<f64> = data.par_iter().map(|v| oracle.log_likelihood(v)).collect::<Result<_>>()?;
    Ok(lls.iter().sum::<f64>() / data.len() as f64)
}

/// Full-batch ascent on the exact gradient from the oracle.
fn fit_exact(
    schema: &VisibleSchema,
    data: &[VisibleVector],
    labels: Option<&[Option<u32>]>,
    config: &TrainConfig,
    mut params: ModelParams,
) -> Result<(ModelParams, TrainLog)> {
    let (lr_w, lr_a) = learning_rates(schema, config);
    let mut pair_rng = stream_rng(config.seed, Stream::Pairs);
    let index = labels.map(ConceptIndex::new);
    let all: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 1..=config.epochs {
        let oracle = Oracle::new(schema, &params)?;
        let grads: Vec<Gradient> = data.par_iter().map(|v| oracle.gradient(v)).collect::<Result<_>>()?;
        let mut grad = Gradient::zeros_like(&params);
        for g in &grads {
            grad.add_scaled(1.0, g);
        }
        grad.scale(1.0 / data.len() as f64);
        if let Some(reg) = regularizer_gradient(schema, &params, data, &all, labels, index.as_ref(), config, &mut pair_rng)? {
            grad.add_scaled(1.0, &reg);
        }
        step(&mut params, &grad, &lr_w, &lr_a, config.lr_b, epoch)?;
        let ll = mean_exact_log_likelihood(schema, &params, data)?;
        log.epochs.push(epoch_stats(schema, &params, data, labels, config, epoch, Some(ll))?);
    }
    Ok((params, log))
}
