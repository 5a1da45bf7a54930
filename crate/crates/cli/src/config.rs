//! Experiment configuration: a TOML file with a schema version, a master
//! seed and one section per experiment kind.

use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Ids,
    Thermo,
    Occupation,
    Fk,
    Scaled,
    Sweep,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ids => "ids",
            Self::Thermo => "thermo",
            Self::Occupation => "occupation",
            Self::Fk => "fk",
            Self::Scaled => "scaled",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// worker threads; 0 means all cores
    #[serde(default)]
    pub jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<IdsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermo: Option<ThermoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<OccupationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fk: Option<FkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled: Option<ScaledSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsSection {
    pub lambda: f64,
    pub length: f64,
    pub realizations: usize,
    #[serde(default = "d_e_lo")]
    pub e_lo: f64,
    #[serde(default = "d_e_hi")]
    pub e_hi: f64,
    #[serde(default = "d_points")]
    pub points: usize,
    #[serde(default = "d_lifshitz")]
    pub lifshitz_window: [f64; 2],
}

fn d_e_lo() -> f64 {
    0.05
}
fn d_e_hi() -> f64 {
    5.0
}
fn d_points() -> usize {
    40
}
fn d_lifshitz() -> [f64; 2] {
    [0.02, 0.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoSection {
    pub lambda: f64,
    pub beta: f64,
    /// ρ̄ as a multiple of ρ_c(λ, β)
    pub rho_ratio: f64,
    pub length: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationSection {
    pub lambda: f64,
    pub beta: f64,
    pub rho_ratio: f64,
    pub lengths: Vec<f64>,
    pub realizations: usize,
    #[serde(default = "d_gamma")]
    pub gamma_tail: f64,
    #[serde(default = "d_window_scale")]
    pub window_scale: f64,
    #[serde(default = "d_window_exponent")]
    pub window_exponent: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
}

fn d_gamma() -> f64 {
    60.0
}
fn d_window_scale() -> f64 {
    7.64
}
fn d_window_exponent() -> f64 {
    0.5
}
fn d_kappa() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkSection {
    pub lambda: f64,
    pub beta: f64,
    /// either mu or rho_ratio (μ_∞ then follows from the IDS oracle)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_ratio: Option<f64>,
    pub paths: usize,
    #[serde(default = "d_steps")]
    pub n_steps: usize,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_eps")]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub laplace_t: Vec<f64>,
}

fn d_steps() -> usize {
    1024
}
fn d_tol() -> f64 {
    1e-8
}
fn d_eps() -> Vec<f64> {
    (1..=40).map(|i| 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledSection {
    /// zero, abs or square
    pub potential: String,
    #[serde(default = "d_amplitude")]
    pub amplitude: f64,
    pub beta: f64,
    pub rho_ratio: f64,
    pub lengths: Vec<f64>,
    #[serde(default = "d_gamma")]
    pub gamma_tail: f64,
    #[serde(default = "d_eps_range")]
    pub compare: [f64; 2],
}

fn d_amplitude() -> f64 {
    1.0
}
fn d_eps_range() -> [f64; 2] {
    [0.2, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// experiment run at every grid point: thermo, occupation or scaled
    pub base: ExperimentKind,
    pub lengths: Vec<f64>,
    pub rho_ratios: Vec<f64>,
}

fn bad<T>(field: &str, reason: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Validation(format!("{field}: {}", reason.into())))
}

fn positive(field: &str, x: f64) -> Result<(), HarnessError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        bad(field, format!("must be positive and finite, got {x}"))
    }
}

fn nonneg(field: &str, x: f64) -> Result<(), HarnessError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        bad(field, format!("must be nonnegative and finite, got {x}"))
    }
}

fn lengths(field: &str, ls: &[f64]) -> Result<(), HarnessError> {
    if ls.is_empty() {
        return bad(field, "must be nonempty");
    }
    ls.iter().try_for_each(|l| positive(field, *l))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let c: Config = toml::from_str(text).map_err(|e| HarnessError::Validation(e.to_string()))?;
        if c.schema_version != SCHEMA_VERSION {
            return bad("schema_version", format!("expected {SCHEMA_VERSION}, got {}", c.schema_version));
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the section needed by `kind`, and for sweeps the base section.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), HarnessError> {
        let missing = || HarnessError::Validation(format!("missing [{}] section", kind.as_str()));
        match kind {
            ExperimentKind::Ids => {
                let s = self.ids.as_ref().ok_or_else(missing)?;
                nonneg("ids.lambda", s.lambda)?;
                positive("ids.length", s.length)?;
                if s.realizations == 0 {
                    return bad("ids.realizations", "must be at least 1");
                }
                positive("ids.e_lo", s.e_lo)?;
                if !(s.e_hi > s.e_lo) || s.points < 2 {
                    return bad("ids.e_hi", "need e_hi > e_lo and at least 2 points");
                }
                if !(s.lifshitz_window[0] > 0.0 && s.lifshitz_window[1] > s.lifshitz_window[0]) {
                    return bad("ids.lifshitz_window", "need 0 < lo < hi");
                }
            }
            ExperimentKind::Thermo => {
                let s = self.thermo.as_ref().ok_or_else(missing)?;
                positive("thermo.lambda", s.lambda)?;
                positive("thermo.beta", s.beta)?;
                positive("thermo.rho_ratio", s.rho_ratio)?;
                positive("thermo.length", s.length)?;
                if s.realizations == 0 {
                    return bad("thermo.realizations", "must be at least 1");
                }
            }
            ExperimentKind::Occupation => {
                let s = self.occupation.as_ref().ok_or_else(missing)?;
                positive("occupation.lambda", s.lambda)?;
                positive("occupation.beta", s.beta)?;
                positive("occupation.rho_ratio", s.rho_ratio)?;
                lengths("occupation.lengths", &s.lengths)?;
                if s.realizations == 0 {
                    return bad("occupation.realizations", "must be at least 1");
                }
                positive("occupation.gamma_tail", s.gamma_tail)?;
                positive("occupation.window_scale", s.window_scale)?;
                positive("occupation.window_exponent", s.window_exponent)?;
                positive("occupation.kappa", s.kappa)?;
            }
            ExperimentKind::Fk => {
                let s = self.fk.as_ref().ok_or_else(missing)?;
                nonneg("fk.lambda", s.lambda)?;
                positive("fk.beta", s.beta)?;
                match (s.mu, s.rho_ratio) {
                    (Some(mu), None) if mu <= 0.0 && mu.is_finite() => {}
                    (None, Some(r)) if s.lambda > 0.0 => positive("fk.rho_ratio", r)?,
                    (None, Some(_)) => return bad("fk.rho_ratio", "needs lambda > 0"),
                    _ => return bad("fk.mu", "give exactly one of mu (<= 0) and rho_ratio"),
                }
                if s.paths < 2 {
                    return bad("fk.paths", "must be at least 2");
                }
                if s.epsilon.iter().any(|e| !(*e > 0.0)) {
                    return bad("fk.epsilon", "entries must be positive");
                }
                if s.laplace_t.iter().any(|t| !(*t > 0.0)) {
                    return bad("fk.laplace_t", "entries must be positive");
                }
            }
            ExperimentKind::Scaled => {
                let s = self.scaled.as_ref().ok_or_else(missing)?;
                if !["zero", "abs", "square"].contains(&s.potential.as_str()) {
                    return bad("scaled.potential", format!("unknown potential {:?}", s.potential));
                }
                nonneg("scaled.amplitude", s.amplitude)?;
                positive("scaled.beta", s.beta)?;
                positive("scaled.rho_ratio", s.rho_ratio)?;
                lengths("scaled.lengths", &s.lengths)?;
                positive("scaled.gamma_tail", s.gamma_tail)?;
                if !(s.compare[0] > 0.0 && s.compare[1] > s.compare[0]) {
                    return bad("scaled.compare", "need 0 < lo < hi");
                }
            }
            ExperimentKind::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(missing)?;
                if !matches!(s.base, ExperimentKind::Thermo | ExperimentKind::Occupation | ExperimentKind::Scaled) {
                    return bad("sweep.base", "must be thermo, occupation or scaled");
                }
                lengths("sweep.lengths", &s.lengths)?;
                if s.rho_ratios.is_empty() {
                    return bad("sweep.rho_ratios", "must be nonempty");
                }
                s.rho_ratios.iter().try_for_each(|r| positive("sweep.rho_ratios", *r))?;
                self.validate(s.base)?;
            }
        }
        Ok(())
    }

    /// Copy of the config with the base section of a sweep pinned to one point.
    pub fn sweep_point(&self, l: f64, rho_ratio: f64) -> Config {
        let mut c = self.clone();
        c.sweep = None;
        if let Some(s) = c.thermo.as_mut() {
            s.length = l;
            s.rho_ratio = rho_ratio;
        }
        if let Some(s) = c.occupation.as_mut() {
            s.lengths = vec![l];
            s.rho_ratio = rho_ratio;
        }
        if let Some(s) = c.scaled.as_mut() {
            s.lengths = vec![l];
            s.rho_ratio = rho_ratio;
        }
        c
    }
}
