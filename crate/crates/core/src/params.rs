use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::schema::{UnitType, VisibleSchema};

/// Visible biases `a`, hidden biases `b` and the `columns x hidden` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub weights: Array2<f64>,
}

impl ModelParams {
    pub fn zeros(columns: usize, hidden: usize) -> Self {
        Self {
            visible_bias: Array1::zeros(columns),
            hidden_bias: Array1::zeros(hidden),
            weights: Array2::zeros((columns, hidden)),
        }
    }

    /// Weights drawn from `Normal(0, std^2)`, biases zero.
    pub fn random<R: Rng + ?Sized>(columns: usize, hidden: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut p = Self::zeros(columns, hidden);
        p.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        p
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn num_columns(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.visible_bias.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
            && self.weights.iter().all(|v| v.is_finite())
    }

    pub fn check(&self, schema: &VisibleSchema) -> Result<()> {
        let cols = schema.total_columns();
        if self.visible_bias.len() != cols || self.weights.nrows() != cols {
            return Err(Error::Schema(format!(
                "parameters have {} visible columns, schema needs {cols}",
                self.visible_bias.len()
            )));
        }
        if self.weights.ncols() != self.hidden_bias.len() {
            return Err(Error::Schema(format!(
                "weight matrix has {} hidden columns but {} hidden biases",
                self.weights.ncols(),
                self.hidden_bias.len()
            )));
        }
        if self.hidden_bias.is_empty() {
            return Err(Error::Schema("model has no hidden units".into()));
        }
        if !self.is_finite() {
            return Err(Error::Validation("parameters contain non-finite entries".into()));
        }
        Ok(())
    }

    /// Set categorical visible biases to log empirical frequencies.
    pub fn init_categorical_log_freq(&mut self, schema: &VisibleSchema, data: &[crate::VisibleVector]) {
        if data.is_empty() {
            return;
        }
        for (i, unit) in schema.units().iter().enumerate() {
            if let UnitType::Categorical { categories } = unit.kind {
                let cols = schema.columns(i);
                for c in cols.clone() {
                    let count: f64 = data.iter().map(|v| v.x[c]).sum();
                    // add-one smoothing keeps unseen categories finite
                    let freq = (count + 1.0) / (data.len() as f64 + categories as f64);
                    self.visible_bias[c] = freq.ln();
                }
            }
        }
    }

    /// `self += scale * grad` with separate step sizes per parameter block.
    pub fn apply(&mut self, grad: &Gradient, lr_w: &Array1<f64>, lr_a: &Array1<f64>, lr_b: f64) {
        Zip::from(self.weights.rows_mut())
            .and(grad.weights.rows())
            .and(lr_w)
            .for_each(|mut w, g, &lr| w.scaled_add(lr, &g));
        Zip::from(&mut self.visible_bias)
            .and(&grad.visible_bias)
            .and(lr_a)
            .for_each(|a, &g, &lr| *a += lr * g);
        self.hidden_bias.scaled_add(lr_b, &grad.hidden_bias);
    }
}

/// Partial derivatives with the same shapes as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub weights: Array2<f64>,
}

impl Gradient {
    pub fn zeros(columns: usize, hidden: usize) -> Self {
        Self {
            visible_bias: Array1::zeros(columns),
            hidden_bias: Array1::zeros(hidden),
            weights: Array2::zeros((columns, hidden)),
        }
    }

    pub fn zeros_like(params: &ModelParams) -> Self {
        Self::zeros(params.num_columns(), params.num_hidden())
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Gradient) {
        self.visible_bias.scaled_add(scale, &other.visible_bias);
        self.hidden_bias.scaled_add(scale, &other.hidden_bias);
        self.weights.scaled_add(scale, &other.weights);
    }

    pub fn scale(&mut self, s: f64) {
        self.visible_bias *= s;
        self.hidden_bias *= s;
        self.weights *= s;
    }

    pub fn dot(&self, other: &Gradient) -> f64 {
        self.visible_bias.dot(&other.visible_bias)
            + self.hidden_bias.dot(&other.hidden_bias)
            + (&self.weights * &other.weights).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.visible_bias.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
            && self.weights.iter().all(|v| v.is_finite())
    }

    /// All entries flattened as `[a.., b.., W row-major..]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.visible_bias
            .iter()
            .chain(self.hidden_bias.iter())
            .chain(self.weights.iter())
            .copied()
            .collect()
    }
}
