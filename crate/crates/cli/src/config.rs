//! Run configuration: TOML sections, overrides, validation and the config hash.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, `--set key=value`
//! overrides in command-line order, the dedicated flags (`--alpha`, `--beta`, `--n`, `--nu`),
//! and finally `--flip-shift-sign`.

use crate::error::CliError;
use gsqg_core::operator::ShiftConvention;
use gsqg_core::regimes::{parse_rational, rational_from_f64, Exponent, RegimeQuery, Q};
use gsqg_core::spectra::{FamilyId, VortexFamily};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Problem {
    pub alpha: f64,
    pub beta: f64,
    pub n: i32,
    pub nu: f64,
    pub convention: ShiftConvention,
}

impl Default for Problem {
    fn default() -> Self {
        Problem { alpha: 0.0, beta: 2.0, n: 2, nu: 1e-3, convention: ShiftConvention::Definition }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    #[serde(rename = "N")]
    pub len: usize,
    pub r_max: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { len: 256, r_max: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eigen: f64,
    pub residual: f64,
    pub slope: f64,
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eigen: 1e-8, residual: 1e-6, slope: 0.02, energy: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VortexConfig {
    pub family: String,
    /// Defaults to the family's first seed.
    pub params: Option<Vec<f64>>,
}

impl Default for VortexConfig {
    fn default() -> Self {
        VortexConfig { family: "gauss-ring".into(), params: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Leading modes listed in the report.
    pub modes: usize,
    /// Modes with Re λ above this are checked for persistence.
    pub threshold: f64,
    pub export_matrix: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { modes: 10, threshold: 0.0, export_matrix: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    pub nu_end: f64,
    pub initial_step: f64,
    pub max_step: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig { nu_end: 0.02, initial_step: 1e-3, max_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub taus: Vec<f64>,
    /// Fit window for the separation slope; the sampled grid runs from t_min to 1.
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    /// (s, q) pairs; q ∈ {1, 2, inf}.
    pub norms: Vec<(f64, f64)>,
    pub energy_t0: f64,
    pub energy_t1: f64,
    pub snapshot_t: Vec<f64>,
    pub snapshot_format: String,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            taus: vec![-20.0, -5.0, -1.0, 0.0],
            t_min: 1e-3,
            t_max: 1e-1,
            t_points: 31,
            norms: vec![(0.0, 2.0), (-1.0, 2.0)],
            energy_t0: 1e-3,
            energy_t1: 1.0,
            snapshot_t: vec![0.1],
            snapshot_format: "csv".into(),
        }
    }
}

/// A number or a string such as "3/2" or "inf", kept exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn rational(&self) -> Result<Q, CliError> {
        let q = match self {
            Number::Int(i) => Ok(Q::from_integer(*i as i128)),
            Number::Float(x) => rational_from_f64(*x),
            Number::Text(t) => parse_rational(t),
        };
        q.map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn exponent(&self) -> Result<Exponent, CliError> {
        match self {
            Number::Text(t) => Exponent::parse(t).map_err(|e| CliError::Validation(e.to_string())),
            Number::Float(x) if x.is_infinite() => Ok(Exponent::Infinite),
            other => Ok(Exponent::Finite(other.rational()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimesConfig {
    pub s: Number,
    pub r: Number,
    pub p: Number,
    pub q: Number,
    pub a: Number,
    pub b: Number,
    pub sweep_alpha: usize,
    pub sweep_beta: usize,
}

impl Default for RegimesConfig {
    fn default() -> Self {
        RegimesConfig {
            s: Number::Int(-1),
            r: Number::Int(-1),
            p: Number::Int(4),
            q: Number::Int(4),
            a: Number::Int(1),
            b: Number::Text("3/2".into()),
            sweep_alpha: 11,
            sweep_beta: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: Problem,
    pub grid: Grid,
    pub tolerances: Tolerances,
    pub vortex: VortexConfig,
    pub spectrum: SpectrumConfig,
    pub search: SearchConfig,
    pub continuation: ContinuationConfig,
    pub verify: VerifyConfig,
    pub regimes: RegimesConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub n: Option<i32>,
    pub nu: Option<f64>,
    pub flip_shift_sign: bool,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| invalid(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in &overrides.set {
            apply_set(&mut table, item)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        if let Some(a) = overrides.alpha {
            cfg.problem.alpha = a;
        }
        if let Some(b) = overrides.beta {
            cfg.problem.beta = b;
        }
        if let Some(n) = overrides.n {
            cfg.problem.n = n;
        }
        if let Some(nu) = overrides.nu {
            cfg.problem.nu = nu;
        }
        if overrides.flip_shift_sign {
            cfg.problem.convention = cfg.problem.convention.other();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        if !(0.0..=1.0).contains(&p.alpha) {
            return Err(invalid(format!("alpha = {} outside the admissible range 0 ≤ α ≤ 1", p.alpha)));
        }
        if !(p.beta > 0.0 && p.beta < 3.0 + p.alpha) {
            return Err(invalid(format!("beta = {} outside the admissible range 0 < β < 3+α = {}", p.beta, 3.0 + p.alpha)));
        }
        if p.n == 0 {
            return Err(invalid("n must be a nonzero harmonic"));
        }
        if !(p.nu >= 0.0 && p.nu.is_finite()) {
            return Err(invalid(format!("nu = {} must be finite and ≥ 0", p.nu)));
        }
        if !(8..=1024).contains(&self.grid.len) {
            return Err(invalid(format!("grid N = {} must lie in [8, 1024]", self.grid.len)));
        }
        if !(self.grid.r_max > 0.0 && self.grid.r_max.is_finite()) {
            return Err(invalid(format!("grid r_max = {} must be positive", self.grid.r_max)));
        }
        let t = &self.tolerances;
        for (name, v) in [("eigen", t.eigen), ("residual", t.residual), ("slope", t.slope), ("energy", t.energy)] {
            if !(v > 0.0) {
                return Err(invalid(format!("tolerance {name} = {v} must be positive")));
            }
        }
        self.family()?;
        self.vortex_params()?;
        if self.spectrum.modes == 0 {
            return Err(invalid("spectrum.modes must be at least 1"));
        }
        if self.search.budget == 0 {
            return Err(invalid("search.budget must be at least 1"));
        }
        let c = &self.continuation;
        if !(c.nu_end >= p.nu && c.nu_end.is_finite()) {
            return Err(invalid(format!("continuation.nu_end = {} must be ≥ nu = {}", c.nu_end, p.nu)));
        }
        if !(c.initial_step > 0.0 && c.max_step >= c.initial_step) {
            return Err(invalid("continuation steps need 0 < initial_step ≤ max_step"));
        }
        let v = &self.verify;
        if v.taus.is_empty() || v.taus.iter().any(|t| !t.is_finite() || *t > 0.0) {
            return Err(invalid("verify.taus must be finite and ≤ 0"));
        }
        if !(v.t_min > 0.0 && v.t_min < v.t_max && v.t_max <= 1.0) {
            return Err(invalid("verify needs 0 < t_min < t_max ≤ 1"));
        }
        if v.t_points < 5 {
            return Err(invalid("verify.t_points must be at least 5"));
        }
        for &(s, q) in &v.norms {
            if s < -1.0 || ![1.0, 2.0, f64::INFINITY].contains(&q) {
                return Err(invalid(format!("verify norm (s = {s}, q = {q}) needs s ≥ −1 and q ∈ {{1, 2, inf}}")));
            }
        }
        if !(v.energy_t0 > 0.0 && v.energy_t1 > v.energy_t0) {
            return Err(invalid("verify needs 0 < energy_t0 < energy_t1"));
        }
        if v.snapshot_t.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("snapshot times must be positive"));
        }
        if !["csv", "binary"].contains(&v.snapshot_format.as_str()) {
            return Err(invalid(format!("snapshot_format must be csv or binary, got {:?}", v.snapshot_format)));
        }
        self.regime_query()?;
        let r = &self.regimes;
        if r.sweep_alpha < 2 || r.sweep_beta < 2 {
            return Err(invalid("regime sweeps need at least 2 points per axis"));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<VortexFamily, CliError> {
        let id = FamilyId::parse(&self.vortex.family).map_err(|e| invalid(e.to_string()))?;
        Ok(VortexFamily::standard(id))
    }

    pub fn vortex_params(&self) -> Result<Vec<f64>, CliError> {
        let fam = self.family()?;
        let params = self.vortex.params.clone().unwrap_or_else(|| fam.seeds[0].clone());
        if params.len() != fam.dim() {
            return Err(invalid(format!("family {} takes {} parameters, got {}", self.vortex.family, fam.dim(), params.len())));
        }
        if !fam.in_bounds(&params) {
            return Err(invalid(format!("vortex params {params:?} outside the bounds of family {}", self.vortex.family)));
        }
        Ok(params)
    }

    pub fn regime_query(&self) -> Result<RegimeQuery, CliError> {
        let r = &self.regimes;
        let exact = |x: f64| rational_from_f64(x).map_err(|e| invalid(e.to_string()));
        RegimeQuery::new(
            exact(self.problem.alpha)?,
            exact(self.problem.beta)?,
            r.s.rational()?,
            r.r.rational()?,
            r.p.exponent()?,
            r.q.exponent()?,
            r.a.exponent()?,
            r.b.exponent()?,
        )
        .map_err(|e| invalid(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn apply_set(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item.split_once('=').ok_or_else(|| invalid(format!("--set expects key=value, got {item:?}")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let value: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, parents) = path.split_last().expect("split yields one piece");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(format!("{key}: {p} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_hash_is_stable() {
        let a = RunConfig::load(None, &Overrides::default()).unwrap();
        let b = RunConfig::load(None, &Overrides::default()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[problem]\nbeta = 1.5\nnu = 0.002\n[grid]\nN = 64\n").unwrap();
        let o = Overrides { set: vec!["problem.nu=0.004".into()], beta: Some(1.25), ..Default::default() };
        let c = RunConfig::load(Some(&path), &o).unwrap();
        assert_eq!((c.problem.beta, c.problem.nu, c.grid.len), (1.25, 0.004, 64));
        let flipped = RunConfig::load(Some(&path), &Overrides { flip_shift_sign: true, ..Default::default() }).unwrap();
        assert_eq!(flipped.problem.convention, ShiftConvention::Flipped);
        assert_ne!(flipped.hash(), RunConfig::load(Some(&path), &Overrides::default()).unwrap().hash());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |s: &str| RunConfig::load(None, &Overrides { set: vec![s.into()], ..Default::default() }).unwrap_err();
        assert!(matches!(bad("problem.beta=5"), CliError::Validation(m) if m.contains("0 < β < 3+α")));
        assert!(matches!(bad("grid.bogus=1"), CliError::Validation(_)));
        assert!(matches!(bad("vortex.family=\"nope\""), CliError::Validation(_)));
        assert!(matches!(bad("regimes.p=\"1/2\""), CliError::Validation(_)));
        assert!(matches!(bad("regimes.s=-2"), CliError::Validation(_)));
    }
}
