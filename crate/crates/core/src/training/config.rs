use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampleOptions;

/// Hyper-parameters for [`fit`](super::fit).
///
/// The same structure is read from the TOML config file; every key is
/// optional and falls back to [`TrainConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of hidden units K.
    pub hidden: usize,
    /// Gibbs steps per gradient estimate.
    pub cd_steps: usize,
    /// Keep the negative chains alive across updates (PCD).
    pub persistent: bool,
    /// Use `P(h | v0)` instead of the sampled `h0` in the data term.
    pub mean_field_data: bool,
    pub lr_w: f64,
    pub lr_a: f64,
    pub lr_b: f64,
    /// Per unit-type multiplier applied to the visible bias and weight rows
    /// of that type, keyed by type tag (`gaussian`, `replicated_softmax`...).
    pub lr_scale: BTreeMap<String, f64>,
    pub batch_size: usize,
    pub epochs: usize,
    /// Group-sparsity strength.
    pub alpha: f64,
    /// Number of equal contiguous hidden groups.
    pub groups: usize,
    /// Metric-learning strength.
    pub beta: f64,
    /// Same-concept peers sampled per labeled record and minibatch.
    pub neighbors: usize,
    /// Other-concept records sampled per labeled record and minibatch.
    pub non_neighbors: usize,
    pub rho1: f64,
    /// Standard deviation of the initial weights.
    pub init_std: f64,
    /// Start categorical visible biases at log empirical frequencies.
    pub categorical_log_freq_init: bool,
    pub gaussian_noise: bool,
    pub poisson_counts: bool,
    /// Full-batch ascent on the exact log-likelihood (tiny models only).
    pub exact_gradient: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 50,
            cd_steps: 1,
            persistent: false,
            mean_field_data: false,
            lr_w: 0.02,
            lr_a: 0.3,
            lr_b: 0.02,
            lr_scale: BTreeMap::new(),
            batch_size: 100,
            epochs: 100,
            alpha: 0.0,
            groups: 1,
            beta: 0.0,
            neighbors: 5,
            non_neighbors: 5,
            rho1: 0.5,
            init_std: 0.01,
            categorical_log_freq_init: false,
            gaussian_noise: false,
            poisson_counts: false,
            exact_gradient: false,
            seed: 0,
        }
    }
}

const TYPE_TAGS: [&str; 5] = ["binary", "gaussian", "categorical", "poisson", "replicated_softmax"];

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sample_options(&self) -> SampleOptions {
        SampleOptions {
            gaussian_noise: self.gaussian_noise,
            poisson_counts: self.poisson_counts,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.hidden == 0 {
            return err("hidden must be at least 1".into());
        }
        if self.cd_steps == 0 {
            return err("cd_steps must be at least 1".into());
        }
        if self.batch_size == 0 {
            return err("batch_size must be at least 1".into());
        }
        for (name, lr) in [("lr_w", self.lr_w), ("lr_a", self.lr_a), ("lr_b", self.lr_b)] {
            if !(lr.is_finite() && lr > 0.0) {
                return err(format!("{name} must be positive, got {lr}"));
            }
        }
        for (tag, s) in &self.lr_scale {
            if !TYPE_TAGS.contains(&tag.as_str()) {
                return err(format!("lr_scale: unknown unit type {tag:?}"));
            }
            if !(s.is_finite() && *s > 0.0) {
                return err(format!("lr_scale.{tag} must be positive"));
            }
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return err(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return err(format!("beta must be >= 0, got {}", self.beta));
        }
        if self.groups == 0 {
            return err("groups must be at least 1".into());
        }
        if self.alpha > 0.0 && !self.hidden.is_multiple_of(self.groups) {
            return err(format!(
                "hidden units ({}) must divide evenly into {} groups",
                self.hidden, self.groups
            ));
        }
        if !(self.rho1 > 0.0 && self.rho1 < 1.0) {
            return err(format!("rho1 must lie in (0, 1), got {}", self.rho1));
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return err("init_std must be >= 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut c = TrainConfig::default();
        c.alpha = 0.003;
        c.groups = 5;
        c.lr_scale.insert("gaussian".into(), 0.5);
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = TrainConfig::from_toml("epochs = 3\nbeta = 0.01\n[lr_scale]\nreplicated_softmax = 0.1\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.batch_size, 100);
        assert_eq!(c.lr_scale["replicated_softmax"], 0.1);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            "alpha = 0.1\ngroups = 7\nhidden = 50",
            "lr_w = 0.0",
            "rho1 = 1.0",
            "beta = -1.0",
            "cd_steps = 0",
            "nonsense = 1",
            "[lr_scale]\nfoo = 1.0",
        ];
        for text in bad {
            assert!(TrainConfig::from_toml(text).is_err(), "{text}");
        }
        // indivisible groups are fine while sparsity is off
        assert!(TrainConfig::from_toml("groups = 7\nhidden = 50").is_ok());
    }
}
