//! JSON-lines datasets.
//!
//! One object per line with one field per schema unit plus an optional
//! integer `concept` label:
//!
//! ```text
//! {"flag":true,"age":-0.31,"region":2,"codes":[4,4,17],"concept":3}
//! ```
//!
//! Binary fields accept `true`/`false` or `0`/`1`; Gaussian fields numbers;
//! categorical fields a category index; replicated-softmax fields a token
//! list; constrained-Poisson fields a count vector of vocabulary length.

use std::io::{BufRead, Write};
use std::path::Path;

use serde_json::{Map, Value as Json};

use crate::error::{Error, Result};
use crate::schema::{MixedRecord, UnitType, Value, VisibleSchema, VisibleVector};

pub const CONCEPT_FIELD: &str = "concept";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<MixedRecord>,
    /// Encoded records, parallel to `records`.
    pub encoded: Vec<VisibleVector>,
    pub labels: Vec<Option<u32>>,
}

impl Dataset {
    pub fn new(schema: &VisibleSchema, records: Vec<MixedRecord>, labels: Vec<Option<u32>>) -> Result<Self> {
        if records.len() != labels.len() {
            return Err(Error::Usage("records and labels differ in length".into()));
        }
        let encoded = records.iter().map(|r| schema.encode(r)).collect::<Result<_>>()?;
        Ok(Self { records, encoded, labels })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn as_index(line: usize, name: &str, v: &Json) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| parse_err(line, format!("field {name}: expected a non-negative integer, got {v}")))
}

fn parse_value(line: usize, name: &str, kind: UnitType, v: &Json) -> Result<Value> {
    Ok(match kind {
        UnitType::Binary => match v {
            Json::Bool(b) => Value::Binary(*b),
            Json::Number(n) if n.as_u64() == Some(0) => Value::Binary(false),
            Json::Number(n) if n.as_u64() == Some(1) => Value::Binary(true),
            _ => return Err(parse_err(line, format!("field {name}: expected a bit, got {v}"))),
        },
        UnitType::Gaussian { .. } => Value::Real(
            v.as_f64()
                .ok_or_else(|| parse_err(line, format!("field {name}: expected a number, got {v}")))?,
        ),
        UnitType::Categorical { .. } => Value::Category(as_index(line, name, v)?),
        UnitType::ConstrainedPoisson { .. } | UnitType::ReplicatedSoftmax { .. } => {
            let items = v
                .as_array()
                .ok_or_else(|| parse_err(line, format!("field {name}: expected a list, got {v}")))?;
            let ints: Vec<usize> = items.iter().map(|x| as_index(line, name, x)).collect::<Result<_>>()?;
            if matches!(kind, UnitType::ConstrainedPoisson { .. }) {
                Value::Counts(
                    ints.into_iter()
                        .map(|c| u32::try_from(c).map_err(|_| parse_err(line, format!("field {name}: count too large"))))
                        .collect::<Result<_>>()?,
                )
            } else {
                Value::Tokens(ints)
            }
        }
    })
}

/// Parse one JSON line into a record and optional label.
pub fn parse_record(schema: &VisibleSchema, line: usize, text: &str) -> Result<(MixedRecord, Option<u32>)> {
    let obj: Map<String, Json> = serde_json::from_str(text).map_err(|e| parse_err(line, e.to_string()))?;
    if let Some(extra) = obj.keys().find(|k| *k != CONCEPT_FIELD && schema.index_of(k).is_none()) {
        return Err(parse_err(line, format!("unknown field {extra:?}")));
    }
    let values = schema
        .units()
        .iter()
        .map(|u| {
            let v = obj.get(&u.name).ok_or_else(|| parse_err(line, format!("missing field {:?}", u.name)))?;
            parse_value(line, &u.name, u.kind, v)
        })
        .collect::<Result<_>>()?;
    let label = match obj.get(CONCEPT_FIELD) {
        None | Some(Json::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .and_then(|u| u32::try_from(u).ok())
                .ok_or_else(|| parse_err(line, format!("concept must be a non-negative integer, got {v}")))?,
        ),
    };
    let record = MixedRecord::new(values);
    // surface range errors with the line number
    schema.encode(&record).map_err(|e| parse_err(line, e.to_string()))?;
    Ok((record, label))
}

/// Serialize a record with fields in schema order.
pub fn record_to_json(schema: &VisibleSchema, record: &MixedRecord, label: Option<u32>) -> String {
    let mut out = String::from("{");
    for (i, (u, v)) in schema.units().iter().zip(&record.values).enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(&u.name).expect("string serializes"));
        out.push(':');
        let json = match v {
            Value::Binary(b) => Json::from(*b),
            Value::Real(r) => Json::from(*r),
            Value::Category(c) => Json::from(*c),
            Value::Counts(c) => Json::from(c.clone()),
            Value::Tokens(t) => Json::from(t.clone()),
        };
        out.push_str(&json.to_string());
    }
    if let Some(l) = label {
        out.push_str(&format!(",\"{CONCEPT_FIELD}\":{l}"));
    }
    out.push('}');
    out
}

pub fn parse_dataset<R: BufRead>(schema: &VisibleSchema, input: R) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (r, l) = parse_record(schema, i + 1, &line)?;
        records.push(r);
        labels.push(l);
    }
    Dataset::new(schema, records, labels)
}

pub fn read_dataset(path: &Path, schema: &VisibleSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_dataset(schema, std::io::BufReader::new(file))
}

pub fn write_dataset_to<W: Write>(out: &mut W, schema: &VisibleSchema, data: &Dataset) -> Result<()> {
    for (r, l) in data.records.iter().zip(&data.labels) {
        writeln!(out, "{}", record_to_json(schema, r, *l))?;
    }
    Ok(())
}

pub fn write_dataset(path: &Path, schema: &VisibleSchema, data: &Dataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset_to(&mut out, schema, data)?;
    out.flush()?;
    Ok(())
}

/// Shift and scale every Gaussian unit to zero mean and unit variance over
/// the dataset (constant columns are only centred). Returns the per-unit
/// `(mean, std)` that was removed, `None` for non-Gaussian units.
pub fn standardize(schema: &VisibleSchema, data: &mut Dataset) -> Result<Vec<Option<(f64, f64)>>> {
    let n = data.len() as f64;
    let mut stats = Vec::with_capacity(schema.len());
    for (i, u) in schema.units().iter().enumerate() {
        if !matches!(u.kind, UnitType::Gaussian { .. }) || data.is_empty() {
            stats.push(None);
            continue;
        }
        let vals: Vec<f64> = data
            .records
            .iter()
            .map(|r| match r.values[i] {
                Value::Real(x) => x,
                _ => unreachable!("encoded records match the schema"),
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for r in &mut data.records {
            if let Value::Real(x) = &mut r.values[i] {
                *x = (*x - mean) / scale;
            }
        }
        stats.push(Some((mean, scale)));
    }
    data.encoded = data.records.iter().map(|r| schema.encode(r)).collect::<Result<_>>()?;
    Ok(stats)
}
