//! Random tiny models shared by the integration suites.
#![allow(dead_code)]

use mvrbm::synth::random_records;
use mvrbm::{ModelParams, UnitType, VisibleSchema, VisibleVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One to `max_units` discrete units (binary, categorical, replicated
/// softmax), small enough for the oracle.
pub fn discrete_schema<R: Rng>(rng: &mut R, max_units: usize) -> VisibleSchema {
    let n = rng.gen_range(1..=max_units);
    let mut units = Vec::new();
    let mut has_block = false;
    for i in 0..n {
        let kind = match rng.gen_range(0..3) {
            0 => UnitType::Binary,
            1 => UnitType::Categorical { categories: rng.gen_range(2..=4) },
            _ if !has_block => {
                has_block = true;
                UnitType::ReplicatedSoftmax { vocab: rng.gen_range(2..=3) }
            }
            _ => UnitType::Binary,
        };
        units.push((format!("u{i}"), kind));
    }
    VisibleSchema::from_pairs(units).unwrap()
}

/// Like [`discrete_schema`] with one Gaussian unit of random sigma appended.
pub fn mixed_schema<R: Rng>(rng: &mut R, max_discrete: usize) -> VisibleSchema {
    let base = discrete_schema(rng, max_discrete);
    let mut units: Vec<(String, UnitType)> = base.units().iter().map(|u| (u.name.clone(), u.kind)).collect();
    units.push(("g".into(), UnitType::Gaussian { sigma: rng.gen_range(0.5..2.0) }));
    VisibleSchema::from_pairs(units).unwrap()
}

/// Random weights and biases, all with standard deviation `std`.
pub fn random_params<R: Rng>(schema: &VisibleSchema, hidden: usize, std: f64, rng: &mut R) -> ModelParams {
    let mut p = ModelParams::random(schema.total_columns(), hidden, std, rng);
    p.visible_bias.iter_mut().for_each(|a| *a = std * rng.sample::<f64, _>(StandardNormal));
    p.hidden_bias.iter_mut().for_each(|b| *b = std * rng.sample::<f64, _>(StandardNormal));
    p
}

pub fn encoded<R: Rng>(schema: &VisibleSchema, n: usize, max_tokens: usize, rng: &mut R) -> Vec<VisibleVector> {
    random_records(schema, n, max_tokens, rng).iter().map(|r| schema.encode(r).unwrap()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
