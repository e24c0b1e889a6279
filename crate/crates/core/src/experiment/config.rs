use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::TimeGrid;
use crate::rde::BUILTIN_FIELDS;

use super::EXPERIMENTS;

/// Everything an experiment run depends on. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub hurst: f64,
    /// Noise dimension.
    pub d: usize,
    /// State dimension.
    pub m: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Steps on `[t_min, t_max]`; the path is sampled further right to cover the largest δ.
    pub grid_n: usize,
    /// δ values as multiples of the grid spacing.
    pub delta_ladder: Vec<usize>,
    pub beta: f64,
    pub beta_prime: f64,
    /// Order `q′` of the empirical moment reported per δ.
    pub moment_order: f64,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub vector_field: String,
    /// Initial state; empty means `0.5` in every coordinate.
    pub y0: Vec<f64>,
    /// Threshold for greedy stopping times.
    pub eta: f64,
    /// Sewing constant used in reported bounds.
    pub c_p: f64,
    /// Metrics are evaluated on every `metric_stride`-th node.
    pub metric_stride: usize,
    /// Ceiling for the smallest-δ sup distance of solutions.
    pub sup_ceiling: f64,
    /// Relative half-width of the accepted band around the predicted level-1 slope.
    pub slope_band: f64,
    /// Fraction of seeds that must show a monotone ladder.
    pub monotone_fraction: f64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "noise".into(),
            hurst: 0.45,
            d: 2,
            m: 2,
            t_min: 0.0,
            t_max: 1.0,
            grid_n: 1024,
            delta_ladder: vec![2, 4, 8, 16, 32, 64],
            beta: 0.35,
            beta_prime: 0.4,
            moment_order: 2.0,
            n_seeds: 100,
            master_seed: 20_240_917,
            vector_field: "sin-g".into(),
            y0: Vec::new(),
            eta: 1.0,
            c_p: 1.0,
            metric_stride: 4,
            sup_ceiling: 0.05,
            slope_band: 0.2,
            monotone_fraction: 0.9,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Parse a TOML (`.toml`) or JSON (anything else) document and validate it.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg = if is_toml { Self::from_toml(&text)? } else { Self::from_json(&text)? };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(toml_field(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = match e.path().to_string() {
                p if p == "." => "<document>".to_string(),
                p => p,
            };
            Error::config(field, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::config(field, reason));
        if !EXPERIMENTS.iter().any(|(name, _)| *name == self.experiment) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        if !(self.hurst > 1.0 / 3.0 && self.hurst <= 0.5) {
            return bad("hurst", format!("{} is outside (1/3, 1/2]", self.hurst));
        }
        if !(self.beta > 1.0 / 3.0 && self.beta < self.beta_prime && self.beta_prime < self.hurst) {
            return bad(
                "beta",
                format!("need 1/3 < beta < beta_prime < hurst, got {} < {} < {}", self.beta, self.beta_prime, self.hurst),
            );
        }
        if self.d == 0 {
            return bad("d", "must be positive".into());
        }
        if self.m == 0 {
            return bad("m", "must be positive".into());
        }
        if !(self.t_min <= 0.0 && self.t_max > 0.0) {
            return bad("t_min", format!("[{}, {}] must contain 0 with t_max > 0", self.t_min, self.t_max));
        }
        if self.grid_n < 2 {
            return bad("grid_n", "need at least two steps".into());
        }
        if TimeGrid::new(self.t_min, self.t_max, self.grid_n).is_err() {
            return bad("grid_n", format!("0 is not a node of [{}, {}] with {} steps", self.t_min, self.t_max, self.grid_n));
        }
        if self.delta_ladder.is_empty() {
            return bad("delta_ladder", "must not be empty".into());
        }
        let h = self.spacing();
        for &k in &self.delta_ladder {
            if k == 0 || k as f64 * h > 1.0 + 1e-12 {
                return bad("delta_ladder", format!("multiple {k} gives δ outside (0, 1]"));
            }
        }
        let mut sorted = self.delta_ladder.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.delta_ladder.len() {
            return bad("delta_ladder", "entries must be distinct".into());
        }
        if !(self.moment_order >= 2.0) {
            return bad("moment_order", format!("{} must be at least 2", self.moment_order));
        }
        if self.n_seeds < 30 {
            return bad("n_seeds", format!("{} is below the minimum of 30 for rate fits", self.n_seeds));
        }
        if !BUILTIN_FIELDS.iter().any(|(name, _)| *name == self.vector_field) {
            return Err(Error::UnknownVectorField(self.vector_field.clone()));
        }
        if !self.y0.is_empty() && self.y0.len() != self.m {
            return bad("y0", format!("has {} entries, expected m = {}", self.y0.len(), self.m));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return bad("y0", "entries must be finite".into());
        }
        if !(self.eta > 0.0) {
            return bad("eta", format!("{} must be positive", self.eta));
        }
        if !(self.c_p >= 1.0) {
            return bad("c_p", format!("{} must be at least 1", self.c_p));
        }
        if self.metric_stride == 0 || !self.grid_n.is_multiple_of(self.metric_stride) {
            return bad("metric_stride", format!("{} must divide grid_n = {}", self.metric_stride, self.grid_n));
        }
        if !(self.sup_ceiling > 0.0) {
            return bad("sup_ceiling", "must be positive".into());
        }
        if !(self.slope_band > 0.0 && self.slope_band < 1.0) {
            return bad("slope_band", format!("{} must lie in (0, 1)", self.slope_band));
        }
        if !(self.monotone_fraction > 0.0 && self.monotone_fraction <= 1.0) {
            return bad("monotone_fraction", format!("{} must lie in (0, 1]", self.monotone_fraction));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / self.grid_n as f64
    }

    /// Level-1 exponent `p = 1/β`.
    pub fn p(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn initial_state(&self) -> Vec<f64> {
        if self.y0.is_empty() {
            vec![0.5; self.m]
        } else {
            self.y0.clone()
        }
    }
}

/// Best-effort name of the offending key from a TOML error.
fn toml_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    e.to_string().lines().find_map(field_from_snippet).unwrap_or_else(|| "<document>".into())
}

/// Pull `key` out of a snippet line like `3 | hurst = "x"`.
fn field_from_snippet(line: &str) -> Option<String> {
    let (_, code) = line.split_once('|')?;
    let (key, _) = code.split_once('=')?;
    let key = key.trim();
    (!key.is_empty()).then(|| key.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_toml(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of("hurst = 0.7"), "hurst");
        assert_eq!(field_of("hurst = \"half\""), "hurst");
        assert_eq!(field_of("bogus = 1"), "bogus");
        assert_eq!(field_of("n_seeds = 3"), "n_seeds");
        assert_eq!(field_of("delta_ladder = [2, 2]"), "delta_ladder");
        assert_eq!(field_of("metric_stride = 3"), "metric_stride");
        assert_eq!(field_of("y0 = [1.0]"), "y0");
        assert!(matches!(ExperimentConfig::from_toml("experiment = \"x\""), Err(Error::UnknownExperiment(_))));
        assert!(matches!(ExperimentConfig::from_toml("vector_field = \"x\""), Err(Error::UnknownVectorField(_))));
    }

    #[test]
    fn toml_and_json_round_trip() {
        let cfg = ExperimentConfig { hurst: 0.4, beta: 0.34, beta_prime: 0.37, ..Default::default() };
        let t = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&t).unwrap(), cfg);
        let j = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&j).unwrap(), cfg);
    }
}
