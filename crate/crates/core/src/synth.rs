//! Planted-concept generator for mixed records.
//!
//! Every concept has a prototype: Gaussian means, a preferred category for
//! each categorical unit and a small topic of preferred tokens. Optional
//! nuisance levels add a second, concept-independent prototype that drives
//! extra Gaussian and categorical units and part of the tokens, so that the
//! strongest structure in the data is not the concept structure.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::dataset::{standardize, Dataset};
use crate::rng::{stream_rng, Stream};
use crate::schema::{MixedRecord, UnitType, Value, VisibleSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub concepts: usize,
    pub records_per_concept: usize,
    /// Concept-driven Gaussian units.
    pub gaussians: usize,
    /// Spread of concept means around zero.
    pub separation: f64,
    /// Standard deviation of record noise around the prototype means.
    pub gaussian_noise: f64,
    /// Concept-driven categorical units.
    pub categoricals: usize,
    pub categories: usize,
    /// Probability a categorical value is replaced by a uniform draw.
    pub category_noise: f64,
    /// Vocabulary of the replicated-softmax block (0 disables the block).
    pub vocab: usize,
    pub tokens_per_record: usize,
    /// Preferred tokens per topic.
    pub topic_size: usize,
    /// Probability a token is drawn uniformly from the whole vocabulary.
    pub token_noise: f64,
    /// Number of nuisance levels (0 disables nuisance structure).
    pub nuisance_levels: usize,
    pub nuisance_gaussians: usize,
    pub nuisance_separation: f64,
    pub nuisance_categoricals: usize,
    /// Share of non-noise tokens drawn from the nuisance topic.
    pub nuisance_token_share: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            concepts: 5,
            records_per_concept: 100,
            gaussians: 4,
            separation: 1.0,
            gaussian_noise: 0.5,
            categoricals: 2,
            categories: 4,
            category_noise: 0.2,
            vocab: 30,
            tokens_per_record: 8,
            topic_size: 5,
            token_noise: 0.2,
            nuisance_levels: 0,
            nuisance_gaussians: 0,
            nuisance_separation: 2.0,
            nuisance_categoricals: 0,
            nuisance_token_share: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Usage(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Usage(m.to_string()));
        if self.concepts == 0 || self.records_per_concept == 0 {
            return err("concepts and records_per_concept must be at least 1");
        }
        if self.gaussians + self.categoricals + self.vocab == 0 {
            return err("the generator settings produce no visible units");
        }
        if self.categoricals + self.nuisance_categoricals > 0 && self.categories < 2 {
            return err("categories must be at least 2");
        }
        if self.vocab > 0 && (self.topic_size == 0 || self.topic_size > self.vocab) {
            return err("topic_size must lie in 1..=vocab");
        }
        for (name, p) in [
            ("category_noise", self.category_noise),
            ("token_noise", self.token_noise),
            ("nuisance_token_share", self.nuisance_token_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Usage(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, s) in [
            ("separation", self.separation),
            ("gaussian_noise", self.gaussian_noise),
            ("nuisance_separation", self.nuisance_separation),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Usage(format!("{name} must be >= 0")));
            }
        }
        if self.nuisance_levels == 0
            && (self.nuisance_gaussians > 0 || self.nuisance_categoricals > 0 || self.nuisance_token_share > 0.0)
        {
            return err("nuisance units need nuisance_levels >= 1");
        }
        Ok(())
    }

    /// Schema of the generated records: concept Gaussians `g*`, nuisance
    /// Gaussians `n*`, concept categoricals `c*`, nuisance categoricals `m*`
    /// and one replicated-softmax block `tokens`.
    pub fn schema(&self) -> Result<VisibleSchema> {
        let mut units: Vec<(String, UnitType)> = Vec::new();
        for i in 0..self.gaussians {
            units.push((format!("g{i}"), UnitType::Gaussian { sigma: 1.0 }));
        }
        for i in 0..self.nuisance_gaussians {
            units.push((format!("n{i}"), UnitType::Gaussian { sigma: 1.0 }));
        }
        for i in 0..self.categoricals {
            units.push((format!("c{i}"), UnitType::Categorical { categories: self.categories }));
        }
        for i in 0..self.nuisance_categoricals {
            units.push((format!("m{i}"), UnitType::Categorical { categories: self.categories }));
        }
        if self.vocab > 0 {
            units.push(("tokens".into(), UnitType::ReplicatedSoftmax { vocab: self.vocab }));
        }
        VisibleSchema::from_pairs(units)
    }
}

struct Prototype {
    means: Vec<f64>,
    categories: Vec<usize>,
    topic: Vec<usize>,
}

fn prototype<R: Rng>(gaussians: usize, separation: f64, categoricals: usize, spec: &SynthSpec, rng: &mut R) -> Prototype {
    Prototype {
        means: (0..gaussians).map(|_| separation * rng.sample::<f64, _>(StandardNormal)).collect(),
        categories: (0..categoricals).map(|_| rng.gen_range(0..spec.categories)).collect(),
        topic: if spec.vocab > 0 { sample(rng, spec.vocab, spec.topic_size).into_vec() } else { Vec::new() },
    }
}

/// Generate `concepts * records_per_concept` labeled records with Gaussian
/// units standardized over the dataset. Record `i` belongs to concept
/// `i % concepts`.
pub fn generate(spec: &SynthSpec) -> Result<(VisibleSchema, Dataset)> {
    spec.validate()?;
    let schema = spec.schema()?;
    let mut rng = stream_rng(spec.seed, Stream::Synth);
    let concepts: Vec<Prototype> = (0..spec.concepts)
        .map(|_| prototype(spec.gaussians, spec.separation, spec.categoricals, spec, &mut rng))
        .collect();
    let nuisance: Vec<Prototype> = (0..spec.nuisance_levels)
        .map(|_| prototype(spec.nuisance_gaussians, spec.nuisance_separation, spec.nuisance_categoricals, spec, &mut rng))
        .collect();

    let n = spec.concepts * spec.records_per_concept;
    let mut records = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % spec.concepts;
        let proto = &concepts[c];
        let nuis = (!nuisance.is_empty()).then(|| &nuisance[rng.gen_range(0..nuisance.len())]);
        let mut values = Vec::with_capacity(schema.len());
        let gauss = |mean: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            Value::Real(mean + spec.gaussian_noise * rng.sample::<f64, _>(StandardNormal))
        };
        for &m in &proto.means {
            values.push(gauss(m, &mut rng));
        }
        if let Some(p) = nuis {
            for &m in &p.means {
                values.push(gauss(m, &mut rng));
            }
        }
        let category = |preferred: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            if rng.gen::<f64>() < spec.category_noise {
                Value::Category(rng.gen_range(0..spec.categories))
            } else {
                Value::Category(preferred)
            }
        };
        for &k in &proto.categories {
            values.push(category(k, &mut rng));
        }
        if let Some(p) = nuis {
            for &k in &p.categories {
                values.push(category(k, &mut rng));
            }
        }
        if spec.vocab > 0 {
            let tokens = (0..spec.tokens_per_record)
                .map(|_| {
                    if rng.gen::<f64>() < spec.token_noise {
                        return rng.gen_range(0..spec.vocab);
                    }
                    let topic = match nuis {
                        Some(p) if rng.gen::<f64>() < spec.nuisance_token_share => &p.topic,
                        _ => &proto.topic,
                    };
                    topic[rng.gen_range(0..topic.len())]
                })
                .collect();
            values.push(Value::Tokens(tokens));
        }
        records.push(MixedRecord::new(values));
        labels.push(Some(c as u32));
    }
    let mut data = Dataset::new(&schema, records, labels)?;
    standardize(&schema, &mut data)?;
    Ok((schema, data))
}

/// Uniformly random records for a schema: fair bits, standard-normal
/// Gaussians, uniform categories and count blocks with `0..=max_tokens`
/// uniform tokens. Meant for gradient checks and property tests.
pub fn random_records<R: Rng + ?Sized>(schema: &VisibleSchema, n: usize, max_tokens: usize, rng: &mut R) -> Vec<MixedRecord> {
    (0..n)
        .map(|_| {
            MixedRecord::new(
                schema
                    .units()
                    .iter()
                    .map(|u| match u.kind {
                        UnitType::Binary => Value::Binary(rng.gen()),
                        UnitType::Gaussian { .. } => Value::Real(rng.sample(StandardNormal)),
                        UnitType::Categorical { categories } => Value::Category(rng.gen_range(0..categories)),
                        UnitType::ReplicatedSoftmax { vocab } => {
                            let d = rng.gen_range(0..=max_tokens);
                            Value::Tokens((0..d).map(|_| rng.gen_range(0..vocab)).collect())
                        }
                        UnitType::ConstrainedPoisson { vocab } => {
                            let mut counts = vec![0u32; vocab];
                            for _ in 0..rng.gen_range(0..=max_tokens) {
                                counts[rng.gen_range(0..vocab)] += 1;
                            }
                            Value::Counts(counts)
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}
