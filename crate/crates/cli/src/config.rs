//! Run configuration: one TOML document, validated on parse.

use csh_core::lie_cartan::{all_simple_types, cartan_matrix, CartanData};
use csh_core::minimizer::DescentConfig;
use csh_core::torus::default_sigma;
use csh_core::{AlgebraSpec, ConstraintMethod, IntMatrix, Seed, SolverConfig, Tolerances, TorusGrid, VortexConfiguration};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("toml: {0}")]
    Syntax(String),
    #[error("key `{key}`: {reason}")]
    Key { key: String, reason: String },
}

impl ConfigError {
    fn key(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Key {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Either a catalogued type label (`A3`, `E8`) or an explicit integer matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<IntMatrix>,
}

impl AlgebraConfig {
    pub fn spec(&self) -> Result<AlgebraSpec, ConfigError> {
        match (&self.kind, &self.matrix) {
            (Some(label), None) => label
                .parse()
                .map_err(|e: csh_core::lie_cartan::CartanError| ConfigError::key("algebra.type", e.to_string())),
            (None, Some(m)) => Ok(AlgebraSpec::Explicit(m.clone())),
            (Some(_), Some(_)) => Err(ConfigError::key("algebra", "give either `type` or `matrix`, not both")),
            (None, None) => Err(ConfigError::key("algebra", "needs `type` or `matrix`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub l1: f64,
    pub l2: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { l1: 1.0, l2: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub m1: usize,
    pub m2: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { m1: 128, m2: 128 }
    }
}

/// One vortex point; `index` counts equations from 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexEntry {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

/// Exactly one of `lambdas`, `factors` (multiples of `λ₀`) or a range.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub log_spaced: bool,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let range = self.lambda_min.is_some() || self.lambda_max.is_some() || self.count.is_some();
        let forms = [self.lambdas.is_some(), self.factors.is_some(), range];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(ConfigError::key(
                "sweep",
                "give exactly one of `lambdas`, `factors` or `lambda_min`/`lambda_max`/`count`",
            ));
        }
        for (key, list) in [("sweep.lambdas", &self.lambdas), ("sweep.factors", &self.factors)] {
            if let Some(v) = list {
                if v.is_empty() {
                    return Err(ConfigError::key(key, "must not be empty"));
                }
                if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(ConfigError::key(key, format!("values must be positive, got {x}")));
                }
            }
        }
        if range {
            let (Some(lo), Some(hi), Some(n)) = (self.lambda_min, self.lambda_max, self.count) else {
                return Err(ConfigError::key("sweep", "a range needs `lambda_min`, `lambda_max` and `count`"));
            };
            if !(lo.is_finite() && lo > 0.0) {
                return Err(ConfigError::key("sweep.lambda_min", "must be positive"));
            }
            if !(hi.is_finite() && hi >= lo) {
                return Err(ConfigError::key("sweep.lambda_max", "must be at least `lambda_min`"));
            }
            if n == 0 || (n == 1 && hi != lo) {
                return Err(ConfigError::key("sweep.count", "must be >= 2 unless the endpoints coincide"));
            }
        }
        Ok(())
    }

    /// Coupling values, endpoints inclusive for ranges.
    pub fn values(&self, lambda0: f64) -> Vec<f64> {
        if let Some(v) = &self.lambdas {
            return v.clone();
        }
        if let Some(f) = &self.factors {
            return f.iter().map(|x| x * lambda0).collect();
        }
        let (lo, hi, n) = (self.lambda_min.unwrap_or(0.0), self.lambda_max.unwrap_or(0.0), self.count.unwrap_or(0));
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|k| {
                if k == 0 {
                    return lo;
                }
                if k == n - 1 {
                    return hi;
                }
                let s = k as f64 / (n - 1) as f64;
                if self.log_spaced {
                    (lo.ln() + s * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + s * (hi - lo)
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    #[default]
    None,
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub fields: FieldFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "csh-out".into(),
            fields: FieldFormat::None,
        }
    }
}

/// Types certified by `catalog`; defaults to every simple type up to rank 10.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogConfig {
    pub types: Vec<String>,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            types: all_simple_types(10).iter().map(AlgebraSpec::label).collect(),
        }
    }
}

/// Integral coefficients for a standalone `constraints` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub a: Vec<f64>,
    pub a_matrix: Vec<Vec<f64>>,
    /// Vortex numbers `N_i`.
    pub n: Vec<u32>,
    /// Defaults to `l1 · l2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Coupling as a multiple of `λ₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_factor: Option<f64>,
    /// Mollification width; filled with two grid spacings when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub constraint_method: ConstraintMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraConfig>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub vortices: Vec<VortexEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub descent: DescentConfig,
    #[serde(default)]
    pub seed: Seed,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub catalog: CatalogConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintsConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

/// Parse, validate and fill every default.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
    cfg.validate()?;
    if cfg.sigma.is_none() {
        cfg.sigma = Some(default_sigma(&cfg.torus()?));
    }
    Ok(cfg)
}

fn positive(key: &str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(ConfigError::key(key, format!("must be positive, got {x}"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    fn validate(&mut self) -> Result<(), ConfigError> {
        positive("lambda", self.lambda)?;
        positive("lambda_factor", self.lambda_factor)?;
        positive("sigma", self.sigma)?;
        positive("domain.l1", Some(self.domain.l1))?;
        positive("domain.l2", Some(self.domain.l2))?;
        if self.lambda.is_some() && self.lambda_factor.is_some() {
            return Err(ConfigError::key("lambda_factor", "give either `lambda` or `lambda_factor`, not both"));
        }
        for (key, m) in [("grid.m1", self.grid.m1), ("grid.m2", self.grid.m2)] {
            if m < 2 || m % 2 != 0 {
                return Err(ConfigError::key(key, format!("must be a positive even number, got {m}")));
            }
        }
        let grid = self.torus()?;
        for (k, v) in self.vortices.iter_mut().enumerate() {
            let key = format!("vortices[{k}]");
            if !(v.x.is_finite() && v.y.is_finite()) {
                return Err(ConfigError::key(key, "point must be finite"));
            }
            if v.multiplicity == 0 {
                return Err(ConfigError::key(format!("{key}.multiplicity"), "must be >= 1"));
            }
            if v.index == 0 {
                return Err(ConfigError::key(format!("{key}.index"), "indices start at 1"));
            }
            (v.x, v.y) = grid.reduce(v.x, v.y);
        }
        if let Some(alg) = &self.algebra {
            let rank = match alg.spec()? {
                AlgebraSpec::Explicit(m) => {
                    if m.is_empty() || m.iter().any(|r| r.len() != m.len()) {
                        return Err(ConfigError::key("algebra.matrix", "must be a nonempty square matrix"));
                    }
                    m.len()
                }
                spec => cartan_matrix(&spec)
                    .map_err(|e| ConfigError::key("algebra.type", e.to_string()))?
                    .len(),
            };
            if let Some((k, v)) = self.vortices.iter().enumerate().find(|(_, v)| v.index > rank) {
                return Err(ConfigError::key(
                    format!("vortices[{k}].index"),
                    format!("{} exceeds rank {rank}", v.index),
                ));
            }
            if let Some(c) = &self.constraints {
                let ok = c.a.len() == rank && c.n.len() == rank && c.a_matrix.len() == rank && c.a_matrix.iter().all(|r| r.len() == rank);
                if !ok {
                    return Err(ConfigError::key("constraints", format!("dimensions must match rank {rank}")));
                }
            }
        }
        if let Some(c) = &self.constraints {
            positive("constraints.area", c.area)?;
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        for label in &self.catalog.types {
            label
                .parse::<AlgebraSpec>()
                .map_err(|e| ConfigError::key("catalog.types", e.to_string()))?;
        }
        self.descent
            .validate()
            .map_err(|e| ConfigError::key("descent", e.to_string()))?;
        if let Seed::Tarantello { mu_factor } = self.seed {
            if !(mu_factor > 1.0) {
                return Err(ConfigError::key("seed.mu_factor", "must exceed 1"));
            }
        }
        Ok(())
    }

    pub fn torus(&self) -> Result<TorusGrid, ConfigError> {
        TorusGrid::new(self.domain.l1, self.domain.l2, self.grid.m1, self.grid.m2)
            .map_err(|e| ConfigError::key("grid", e.to_string()))
    }

    pub fn algebra_spec(&self) -> Result<AlgebraSpec, ConfigError> {
        self.algebra
            .as_ref()
            .ok_or_else(|| ConfigError::key("algebra", "missing"))?
            .spec()
    }

    pub fn cartan(&self) -> Result<CartanData, ConfigError> {
        CartanData::from_spec(&self.algebra_spec()?).map_err(|e| ConfigError::key("algebra", e.to_string()))
    }

    pub fn vortex_configuration(&self, rank: usize) -> Result<VortexConfiguration, ConfigError> {
        let grid = self.torus()?;
        let mut vc = VortexConfiguration::new(rank);
        for (k, v) in self.vortices.iter().enumerate() {
            vc.push(&grid, v.index - 1, v.x, v.y, v.multiplicity)
                .map_err(|e| ConfigError::key(format!("vortices[{k}]"), e.to_string()))?;
        }
        Ok(vc)
    }

    /// The single coupling used by `solve` and `constraints`.
    pub fn single_lambda(&self, lambda0: f64) -> Result<f64, ConfigError> {
        match (self.lambda, self.lambda_factor) {
            (Some(l), None) => Ok(l),
            (None, Some(f)) => Ok(f * lambda0),
            _ => Err(ConfigError::key("lambda", "missing (set `lambda` or `lambda_factor`)")),
        }
    }

    pub fn sweep_lambdas(&self, lambda0: f64) -> Result<Vec<f64>, ConfigError> {
        self.sweep
            .as_ref()
            .map(|s| s.values(lambda0))
            .ok_or_else(|| ConfigError::key("sweep", "missing"))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            descent: self.descent.clone(),
            seed: self.seed,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.expect("filled by parse_config")
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
