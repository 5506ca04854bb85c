//! Line-oriented text formats for schemas and models.
//!
//! ```text
//! mvrbm-model 1
//! hidden 3
//! unit flag binary
//! unit age gaussian 1.0
//! unit region categorical 4
//! unit codes replicated_softmax 20
//! a <one value per visible column>
//! b <one value per hidden unit>
//! W
//! <one line per visible column with K values>
//! end
//! ```
//!
//! A schema file is the header line `mvrbm-schema 1` followed by `unit`
//! lines. Numbers are written with the shortest representation that
//! parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::schema::{Unit, UnitType, VisibleSchema};

pub const MODEL_VERSION: u32 = 1;
pub const SCHEMA_VERSION: u32 = 1;

/// A trained model: its schema travels with the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub schema: VisibleSchema,
    pub params: ModelParams,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank line that is not a `#` comment, as (line number, text).
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| parse_err(self.last + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn check_header(lines: &mut Lines, kind: &'static str, expected: u32) -> Result<()> {
    let (n, line) = lines.expect("header")?;
    let magic = format!("mvrbm-{kind}");
    let mut parts = line.split_whitespace();
    if parts.next() != Some(magic.as_str()) {
        return Err(parse_err(n, format!("not a {kind} file (expected header `{magic} {expected}`)")));
    }
    let found = parts.next().unwrap_or("").to_string();
    if found != expected.to_string() {
        return Err(Error::Version { kind, found, expected });
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, format!("bad {what} {s:?}")))
}

fn parse_unit(n: usize, line: &str) -> Result<Unit> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.first() != Some(&"unit") || parts.len() < 3 {
        return Err(parse_err(n, "expected `unit <name> <type> [parameter]`"));
    }
    let param = |what: &str| -> Result<&str> {
        parts.get(3).copied().ok_or_else(|| parse_err(n, format!("{} unit needs {what}", parts[2])))
    };
    let kind = match parts[2] {
        "binary" => UnitType::Binary,
        "gaussian" => UnitType::Gaussian { sigma: parse_num(n, param("a sigma")?, "sigma")? },
        "categorical" => UnitType::Categorical { categories: parse_num(n, param("a category count")?, "category count")? },
        "poisson" => UnitType::ConstrainedPoisson { vocab: parse_num(n, param("a vocabulary size")?, "vocabulary size")? },
        "replicated_softmax" => {
            UnitType::ReplicatedSoftmax { vocab: parse_num(n, param("a vocabulary size")?, "vocabulary size")? }
        }
        other => return Err(parse_err(n, format!("unknown unit type {other:?}"))),
    };
    let max_parts = if kind == UnitType::Binary { 3 } else { 4 };
    if parts.len() > max_parts {
        return Err(parse_err(n, "trailing fields after unit declaration"));
    }
    Ok(Unit { name: parts[1].to_string(), kind })
}

fn write_units(out: &mut String, schema: &VisibleSchema) {
    for u in schema.units() {
        writeln!(out, "unit {} {}", u.name, u.kind).unwrap();
    }
}

pub fn schema_to_string(schema: &VisibleSchema) -> String {
    let mut out = format!("mvrbm-schema {SCHEMA_VERSION}\n");
    write_units(&mut out, schema);
    out
}

pub fn parse_schema(text: &str) -> Result<VisibleSchema> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, "schema", SCHEMA_VERSION)?;
    let mut units = Vec::new();
    while let Some((n, line)) = lines.next() {
        units.push(parse_unit(n, line)?);
    }
    VisibleSchema::new(units)
}

fn write_row<'a>(out: &mut String, prefix: Option<&str>, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    if let Some(p) = prefix {
        out.push_str(p);
        first = false;
    }
    for v in values {
        if !first {
            out.push(' ');
        }
        write!(out, "{v:?}").unwrap();
        first = false;
    }
    out.push('\n');
}

pub fn model_to_string(model: &Model) -> String {
    let p = &model.params;
    let mut out = format!("mvrbm-model {MODEL_VERSION}\nhidden {}\n", p.num_hidden());
    write_units(&mut out, &model.schema);
    write_row(&mut out, Some("a"), p.visible_bias.iter());
    write_row(&mut out, Some("b"), p.hidden_bias.iter());
    out.push_str("W\n");
    for row in p.weights.rows() {
        write_row(&mut out, None, row.iter());
    }
    out.push_str("end\n");
    out
}

fn parse_values(n: usize, fields: &[&str], expected: usize, what: &str) -> Result<Vec<f64>> {
    if fields.len() != expected {
        return Err(parse_err(n, format!("{what}: expected {expected} values, found {}", fields.len())));
    }
    let vals: Vec<f64> = fields.iter().map(|s| parse_num(n, s, "number")).collect::<Result<_>>()?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(n, format!("{what}: non-finite value")));
    }
    Ok(vals)
}

pub fn parse_model(text: &str) -> Result<Model> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, "model", MODEL_VERSION)?;
    let (n, line) = lines.expect("`hidden <K>`")?;
    let k: usize = match line.split_whitespace().collect::<Vec<_>>()[..] {
        ["hidden", k] => parse_num(n, k, "hidden count")?,
        _ => return Err(parse_err(n, "expected `hidden <K>`")),
    };
    if k == 0 {
        return Err(parse_err(n, "model needs at least one hidden unit"));
    }
    let mut units = Vec::new();
    let (mut n, mut line) = lines.expect("unit declarations")?;
    while line.starts_with("unit ") {
        units.push(parse_unit(n, line)?);
        (n, line) = lines.expect("`a` row")?;
    }
    let schema = VisibleSchema::new(units)?;
    let cols = schema.total_columns();

    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.first() != Some(&"a") {
        return Err(parse_err(n, "expected `a` row"));
    }
    let a = parse_values(n, &fields[1..], cols, "a")?;
    let (n, line) = lines.expect("`b` row")?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.first() != Some(&"b") {
        return Err(parse_err(n, "expected `b` row"));
    }
    let b = parse_values(n, &fields[1..], k, "b")?;
    let (n, line) = lines.expect("`W`")?;
    if line != "W" {
        return Err(parse_err(n, "expected `W`"));
    }
    let mut w = Vec::with_capacity(cols * k);
    for _ in 0..cols {
        let (n, line) = lines.expect("weight row")?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        w.extend(parse_values(n, &fields, k, "W row")?);
    }
    let (n, line) = lines.expect("`end`")?;
    if line != "end" {
        return Err(parse_err(n, "expected `end`"));
    }
    if let Some((n, _)) = lines.next() {
        return Err(parse_err(n, "content after `end`"));
    }
    let params = ModelParams {
        visible_bias: Array1::from(a),
        hidden_bias: Array1::from(b),
        weights: Array2::from_shape_vec((cols, k), w).expect("row count checked"),
    };
    Ok(Model { schema, params })
}

pub fn read_schema(path: &Path) -> Result<VisibleSchema> {
    parse_schema(&std::fs::read_to_string(path)?)
}

pub fn write_schema(path: &Path, schema: &VisibleSchema) -> Result<()> {
    Ok(std::fs::write(path, schema_to_string(schema))?)
}

pub fn read_model(path: &Path) -> Result<Model> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    model.params.check(&model.schema)?;
    Ok(std::fs::write(path, model_to_string(model))?)
}
