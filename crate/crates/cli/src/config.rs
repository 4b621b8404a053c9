//! Run configuration, loadable from JSON or TOML and overridable per field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dsfda_core::bootstrap::{BaseScale, MultiplierConfig, MultiplierKind, Regime, ResidualCentering, MIN_REPLICATES};
use dsfda_core::dgp::{MeanKind, OUParams, ScenarioSpec};
use dsfda_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthMode {
    #[default]
    Fixed,
    Cv,
}

/// Simulation settings for `simulate` and `montecarlo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub n_dense: usize,
    pub p_dense: usize,
    pub mean: MeanKind,
    pub ou: OUParams,
    /// Group key of simulated data.
    pub group: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 50,
            n_dense: 120,
            p_dense: 100,
            mean: MeanKind::Null,
            ou: OUParams::default(),
            group: "sim".into(),
        }
    }
}

impl ScenarioConfig {
    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            n: self.n,
            p: self.p,
            n_dense: self.n_dense,
            p_dense: self.p_dense,
            mean: self.mean,
        }
    }

    /// Spec with sparse size `n` and the configured `n / n_dense` ratio.
    pub fn spec_at(&self, n: usize) -> ScenarioSpec {
        ScenarioSpec::with_ratio(n, self.p, self.p_dense, self.n as f64 / self.n_dense as f64, self.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub reps: usize,
    /// Sparse sample sizes; empty means the scenario's `n` only.
    pub sizes: Vec<usize>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { reps: 100, sizes: Vec::new() }
    }
}

/// Minimum Monte-Carlo repetitions.
pub const MIN_REPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    /// Original time domain mapped onto `[0, 1]`; defaults to the data range.
    pub domain: Option<[f64; 2]>,
    pub scenario: ScenarioConfig,
    pub montecarlo: MonteCarloConfig,
    pub bandwidth_mode: BandwidthMode,
    pub h: Option<f64>,
    pub h_dense: Option<f64>,
    /// Lag-0 kernel bandwidth of the sparse sample.
    pub kernel_h: Option<f64>,
    pub kernel_h_dense: Option<f64>,
    /// Kernel bandwidth growth per lag.
    pub lag_factor: f64,
    pub degree: usize,
    pub degree_dense: usize,
    pub alpha: f64,
    pub n_boot: usize,
    pub multiplier: MultiplierKind,
    pub base_scale: BaseScale,
    pub centering: ResidualCentering,
    pub regime: Regime,
    pub max_lag: usize,
    pub max_lag_dense: usize,
    pub folds: usize,
    pub gap: usize,
    pub n_candidates: usize,
    /// Candidate grid for the sparse side; defaults to log-spaced from `2/p`.
    pub candidates: Option<Vec<f64>>,
    pub candidates_dense: Option<Vec<f64>>,
    pub eval_points: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Group key to CV pool key; unlisted groups form their own pool.
    pub cv_pools: BTreeMap<String, String>,
    /// Report `mu_dense - mu_sparse` instead of `mu_sparse - mu_dense`.
    pub flip_sign: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            domain: None,
            scenario: ScenarioConfig::default(),
            montecarlo: MonteCarloConfig::default(),
            bandwidth_mode: BandwidthMode::Fixed,
            h: None,
            h_dense: None,
            kernel_h: None,
            kernel_h_dense: None,
            lag_factor: 1.1,
            degree: 2,
            degree_dense: 2,
            alpha: 0.05,
            n_boot: 1000,
            multiplier: MultiplierKind::Kappa2,
            base_scale: BaseScale::UnitVariance,
            centering: ResidualCentering::SampleMean,
            regime: Regime::Pooled,
            max_lag: 3,
            max_lag_dense: 3,
            folds: 5,
            gap: 5,
            n_candidates: 15,
            candidates: None,
            candidates_dense: None,
            eval_points: 101,
            seed: 0,
            output_dir: PathBuf::from("out"),
            cv_pools: BTreeMap::new(),
            flip_sign: false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl RunConfig {
    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
        }
    }

    /// Applies `key = value` overrides; dotted keys reach nested tables.
    /// Values are parsed as JSON, falling back to a plain string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut tree = serde_json::to_value(self).map_err(|e| invalid(e.to_string()))?;
        for (key, raw) in overrides {
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            let mut node = &mut tree;
            let parts: Vec<&str> = key.split('.').collect();
            for (k, part) in parts.iter().enumerate() {
                let map = node
                    .as_object_mut()
                    .ok_or_else(|| invalid(format!("override '{key}': '{part}' is not inside a table")))?;
                if k + 1 == parts.len() {
                    if !map.contains_key(*part) {
                        return Err(invalid(format!("unknown config field '{key}'")));
                    }
                    map.insert(part.to_string(), value.clone());
                    break;
                }
                node = map
                    .get_mut(*part)
                    .ok_or_else(|| invalid(format!("unknown config field '{key}'")))?;
                if node.is_null() {
                    *node = Value::Object(Default::default());
                }
            }
        }
        serde_json::from_value(tree).map_err(|e| invalid(format!("override: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_boot < MIN_REPLICATES {
            return Err(invalid(format!("n_boot must be at least {MIN_REPLICATES}, got {}", self.n_boot)));
        }
        if self.eval_points < 3 {
            return Err(invalid(format!("eval_points must be at least 3, got {}", self.eval_points)));
        }
        if self.degree == 0 || self.degree_dense == 0 {
            return Err(invalid("local polynomial degrees must be at least 1"));
        }
        if self.folds < 2 {
            return Err(invalid(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.lag_factor > 0.0 && self.lag_factor.is_finite()) {
            return Err(invalid(format!("lag_factor must be positive, got {}", self.lag_factor)));
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(h) if !(h > 0.0 && h.is_finite()) => Err(invalid(format!("{name} must be positive, got {h}"))),
            _ => Ok(()),
        };
        positive("h", self.h)?;
        positive("h_dense", self.h_dense)?;
        positive("kernel_h", self.kernel_h)?;
        positive("kernel_h_dense", self.kernel_h_dense)?;
        for grid in [&self.candidates, &self.candidates_dense].into_iter().flatten() {
            if grid.is_empty() || grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return Err(invalid("candidate grids must be nonempty and positive"));
            }
        }
        if let Some([lo, hi]) = self.domain {
            if !(lo < hi) {
                return Err(invalid(format!("domain [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn multiplier_config(&self, seed: u64) -> MultiplierConfig {
        let mut cfg = MultiplierConfig::new(self.multiplier, seed);
        cfg.base_scale = self.base_scale;
        cfg
    }

    /// Pool key used for CV of `group`.
    pub fn pool_of<'a>(&'a self, group: &'a str) -> &'a str {
        self.cv_pools.get(group).map_or(group, String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::default();
        assert_eq!((c.degree, c.degree_dense, c.max_lag, c.max_lag_dense), (2, 2, 3, 3));
        assert_eq!((c.folds, c.gap, c.eval_points, c.n_boot), (5, 5, 101, 1000));
        assert_eq!(c.multiplier, MultiplierKind::Kappa2);
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_and_toml_fill_defaults() {
        let j: RunConfig = serde_json::from_str(r#"{"alpha": 0.1, "scenario": {"n": 40}}"#).unwrap();
        assert_eq!(j.alpha, 0.1);
        assert_eq!(j.scenario.n, 40);
        assert_eq!(j.scenario.p, 50);
        let t: RunConfig = toml::from_str("h = 0.4\nbandwidth_mode = \"cv\"\n[cv_pools]\njan = \"winter\"\n").unwrap();
        assert_eq!(t.h, Some(0.4));
        assert_eq!(t.bandwidth_mode, BandwidthMode::Cv);
        assert_eq!(t.pool_of("jan"), "winter");
        assert_eq!(t.pool_of("jul"), "jul");
        assert!(serde_json::from_str::<RunConfig>(r#"{"alpah": 0.1}"#).is_err());
    }

    #[test]
    fn overrides_reach_nested_and_optional_fields() {
        let c = RunConfig::default()
            .with_overrides(&[
                ("scenario.ou.rho_b".into(), "0".into()),
                ("h".into(), "0.3".into()),
                ("multiplier".into(), "rademacher".into()),
                ("domain".into(), "[0, 24]".into()),
            ])
            .unwrap();
        assert_eq!(c.scenario.ou.rho_b, 0.0);
        assert_eq!(c.h, Some(0.3));
        assert_eq!(c.multiplier, MultiplierKind::Rademacher);
        assert_eq!(c.domain, Some([0.0, 24.0]));
        assert!(RunConfig::default().with_overrides(&[("nope".into(), "1".into())]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (k, v) in [("alpha", "1.0"), ("n_boot", "50"), ("eval_points", "2"), ("h", "-1")] {
            let c = RunConfig::default().with_overrides(&[(k.into(), v.into())]).unwrap();
            assert!(c.validate().is_err(), "{k}={v} accepted");
        }
    }
}
