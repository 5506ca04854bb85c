//! Visible-unit schema, typed records and their dense column encoding.
//!
//! Every unit owns a contiguous range of weight columns. The dense encoding
//! ([`VisibleVector`]) stores one raw value per column: the bit for binary
//! units, the real value for Gaussian units, a one-hot row for categorical
//! units and per-token counts for the two count blocks.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array1;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitType {
    Binary,
    /// Linear unit with fixed noise standard deviation.
    Gaussian { sigma: f64 },
    /// One of `categories` unordered values.
    Categorical { categories: usize },
    /// Word-count vector whose conditional rates sum to the record length.
    ConstrainedPoisson { vocab: usize },
    /// A multiset of tokens sharing one softmax; the hidden bias is scaled by
    /// the number of tokens.
    ReplicatedSoftmax { vocab: usize },
}

impl UnitType {
    pub fn width(&self) -> usize {
        match *self {
            UnitType::Binary | UnitType::Gaussian { .. } => 1,
            UnitType::Categorical { categories } => categories,
            UnitType::ConstrainedPoisson { vocab } | UnitType::ReplicatedSoftmax { vocab } => vocab,
        }
    }

    /// Short lowercase name used in files and on the command line.
    pub fn tag(&self) -> &'static str {
        match self {
            UnitType::Binary => "binary",
            UnitType::Gaussian { .. } => "gaussian",
            UnitType::Categorical { .. } => "categorical",
            UnitType::ConstrainedPoisson { .. } => "poisson",
            UnitType::ReplicatedSoftmax { .. } => "replicated_softmax",
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, UnitType::Gaussian { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            UnitType::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(Error::Validation(format!("gaussian sigma must be positive, got {sigma}")))
            }
            UnitType::Categorical { categories } if categories < 2 => Err(Error::Validation(
                format!("categorical unit needs at least 2 categories, got {categories}"),
            )),
            UnitType::ConstrainedPoisson { vocab } | UnitType::ReplicatedSoftmax { vocab }
                if vocab < 1 =>
            {
                Err(Error::Validation("count block needs a vocabulary of at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for UnitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            UnitType::Binary => write!(f, "binary"),
            UnitType::Gaussian { sigma } => write!(f, "gaussian {sigma:?}"),
            UnitType::Categorical { categories } => write!(f, "categorical {categories}"),
            UnitType::ConstrainedPoisson { vocab } => write!(f, "poisson {vocab}"),
            UnitType::ReplicatedSoftmax { vocab } => write!(f, "replicated_softmax {vocab}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub name: String,
    pub kind: UnitType,
}

/// Ordered list of typed visible units.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleSchema {
    units: Vec<Unit>,
    offsets: Vec<usize>,
    total_columns: usize,
    sigmas: Array1<f64>,
}

impl VisibleSchema {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Schema("schema has no units".into()));
        }
        let mut seen = HashSet::new();
        let mut offsets = Vec::with_capacity(units.len());
        let mut total = 0;
        for unit in &units {
            if unit.name.is_empty() || unit.name.chars().any(char::is_whitespace) {
                return Err(Error::Schema(format!("invalid unit name {:?}", unit.name)));
            }
            if !seen.insert(unit.name.as_str()) {
                return Err(Error::Schema(format!("duplicate unit name {:?}", unit.name)));
            }
            unit.kind.validate()?;
            offsets.push(total);
            total += unit.kind.width();
        }
        let mut sigmas = Array1::ones(total);
        for (unit, &off) in units.iter().zip(&offsets) {
            if let UnitType::Gaussian { sigma } = unit.kind {
                sigmas[off] = sigma;
            }
        }
        Ok(Self { units, offsets, total_columns: total, sigmas })
    }

    /// Convenience constructor from `(name, type)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, UnitType)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(name, kind)| Unit { name: name.into(), kind })
                .collect(),
        )
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn total_columns(&self) -> usize {
        self.total_columns
    }

    /// Column range `[start, end)` owned by unit `i`.
    pub fn columns(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.offsets[i];
        start..start + self.units[i].kind.width()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.units.iter().position(|u| u.name == name)
    }

    pub fn has_replicated_softmax(&self) -> bool {
        self.units
            .iter()
            .any(|u| matches!(u.kind, UnitType::ReplicatedSoftmax { .. }))
    }

    pub fn has_constrained_poisson(&self) -> bool {
        self.units
            .iter()
            .any(|u| matches!(u.kind, UnitType::ConstrainedPoisson { .. }))
    }

    /// Noise scale for every column: `sigma` on Gaussian columns, 1 elsewhere.
    pub fn column_sigmas(&self) -> &Array1<f64> {
        &self.sigmas
    }

    /// Hidden-bias multiplier for a record with the given per-unit lengths:
    /// the total replicated-softmax token count if the schema has such a
    /// block, otherwise 1.
    pub fn bias_scale(&self, lengths: &[usize]) -> f64 {
        if !self.has_replicated_softmax() {
            return 1.0;
        }
        self.units
            .iter()
            .zip(lengths)
            .filter(|(u, _)| matches!(u.kind, UnitType::ReplicatedSoftmax { .. }))
            .map(|(_, &d)| d as f64)
            .sum()
    }

    /// Validate and encode a typed record into the dense column layout.
    pub fn encode(&self, record: &MixedRecord) -> Result<VisibleVector> {
        if record.values.len() != self.units.len() {
            return Err(Error::Schema(format!(
                "record has {} values, schema has {} units",
                record.values.len(),
                self.units.len()
            )));
        }
        let mut x = Array1::zeros(self.total_columns);
        let mut lengths = vec![0usize; self.units.len()];
        for (i, (unit, value)) in self.units.iter().zip(&record.values).enumerate() {
            let off = self.offsets[i];
            match (unit.kind, value) {
                (UnitType::Binary, Value::Binary(b)) => x[off] = f64::from(u8::from(*b)),
                (UnitType::Gaussian { .. }, Value::Real(r)) => {
                    if !r.is_finite() {
                        return Err(Error::Validation(format!("unit {}: non-finite value", unit.name)));
                    }
                    x[off] = *r;
                }
                (UnitType::Categorical { categories }, Value::Category(c)) => {
                    if *c >= categories {
                        return Err(Error::Validation(format!(
                            "unit {}: category {c} out of range 0..{categories}",
                            unit.name
                        )));
                    }
                    x[off + c] = 1.0;
                }
                (UnitType::ConstrainedPoisson { vocab }, Value::Counts(counts)) => {
                    if counts.len() != vocab {
                        return Err(Error::Schema(format!(
                            "unit {}: expected {vocab} counts, got {}",
                            unit.name,
                            counts.len()
                        )));
                    }
                    for (t, &c) in counts.iter().enumerate() {
                        x[off + t] = f64::from(c);
                    }
                    lengths[i] = counts.iter().map(|&c| c as usize).sum();
                }
                (UnitType::ReplicatedSoftmax { vocab }, Value::Tokens(tokens)) => {
                    for &t in tokens {
                        if t >= vocab {
                            return Err(Error::Validation(format!(
                                "unit {}: token {t} out of range 0..{vocab}",
                                unit.name
                            )));
                        }
                        x[off + t] += 1.0;
                    }
                    lengths[i] = tokens.len();
                }
                (kind, value) => {
                    return Err(Error::Schema(format!(
                        "unit {}: value {value:?} does not fit a {} unit",
                        unit.name,
                        kind.tag()
                    )))
                }
            }
        }
        let bias_scale = self.bias_scale(&lengths);
        Ok(VisibleVector { x, lengths, bias_scale })
    }

    /// Turn a dense vector back into a typed record. Count columns are
    /// rounded to the nearest integer; categorical units take their argmax.
    pub fn decode(&self, v: &VisibleVector) -> MixedRecord {
        let values = self
            .units
            .iter()
            .enumerate()
            .map(|(i, unit)| {
                let cols = v.x.slice(ndarray::s![self.columns(i)]);
                match unit.kind {
                    UnitType::Binary => Value::Binary(cols[0] >= 0.5),
                    UnitType::Gaussian { .. } => Value::Real(cols[0]),
                    UnitType::Categorical { .. } => Value::Category(argmax(cols.iter().copied())),
                    UnitType::ConstrainedPoisson { .. } => {
                        Value::Counts(cols.iter().map(|c| c.round().max(0.0) as u32).collect())
                    }
                    UnitType::ReplicatedSoftmax { .. } => Value::Tokens(
                        cols.iter()
                            .enumerate()
                            .flat_map(|(t, &c)| std::iter::repeat_n(t, c.round().max(0.0) as usize))
                            .collect(),
                    ),
                }
            })
            .collect();
        MixedRecord { values }
    }
}

pub(crate) fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in it.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// One typed value per visible unit.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Binary(bool),
    Real(f64),
    Category(usize),
    /// Per-token counts for a constrained-Poisson block.
    Counts(Vec<u32>),
    /// Token multiset for a replicated-softmax block; order is irrelevant.
    Tokens(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedRecord {
    pub values: Vec<Value>,
}

impl MixedRecord {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }
}

/// Dense column encoding of one visible configuration.
///
/// `lengths[i]` is the token count (replicated softmax) or total count
/// (constrained Poisson) of unit `i` and zero for the other units.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleVector {
    pub x: Array1<f64>,
    pub lengths: Vec<usize>,
    pub bias_scale: f64,
}

impl VisibleVector {
    /// Copy with the columns of unit `unit` zeroed, as if it were unobserved.
    /// A removed replicated-softmax block no longer contributes to the
    /// hidden-bias scale.
    pub fn without_unit(&self, schema: &VisibleSchema, unit: usize) -> VisibleVector {
        let mut out = self.clone();
        out.x.slice_mut(ndarray::s![schema.columns(unit)]).fill(0.0);
        out.lengths[unit] = 0;
        out.bias_scale = schema.bias_scale(&out.lengths);
        out
    }
}
