//! Grand-canonical thermodynamics of the perfect Bose gas.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::ids::{ls_ids_oracle, weyl_ids, IdsCurve};
use crate::numerics::{integrate, integrate_to_inf};

/// Mean occupation 1/(e^{β(E−μ)} − 1).
pub fn bose_occupation(e: f64, beta: f64, mu: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return invalid("beta", "must be positive");
    }
    if !(mu < e) {
        return invalid("mu", format!("must lie below the level energy {e}, got {mu}"));
    }
    Ok(bose_gap(beta, e - mu))
}

/// Occupation at a gap E − μ > 0.
#[inline]
pub fn bose_gap(beta: f64, gap: f64) -> f64 {
    1.0 / (beta * gap).exp_m1()
}

/// −d/dE of the Bose factor, β/(4 sinh²(β(E−μ)/2)).
#[inline]
fn bose_slope(beta: f64, gap: f64) -> f64 {
    let s = (0.5 * beta * gap).sinh();
    beta / (4.0 * s * s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdsModel {
    LuttingerSy { intensity: f64 },
    Weyl { dim: usize },
    /// linear interpolation of a tabulated curve, ν ∝ E below the first node
    Tabulated(IdsCurve),
    /// finite-volume step IDS of a level list in volume V
    Levels { energies: Vec<f64>, volume: f64 },
}

impl IdsModel {
    pub fn nu(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        match self {
            IdsModel::LuttingerSy { intensity } => ls_ids_oracle(e, *intensity).unwrap_or(0.0),
            IdsModel::Weyl { dim } => weyl_ids(e, *dim),
            IdsModel::Tabulated(c) => {
                if e < c.grid[0] {
                    c.values[0] * e / c.grid[0]
                } else {
                    c.value_at(e)
                }
            }
            IdsModel::Levels { energies, volume } => {
                energies.partition_point(|&x| x <= e) as f64 / volume
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IdsModel::LuttingerSy { intensity } if !(*intensity > 0.0 && intensity.is_finite()) => {
                invalid("intensity", "must be positive")
            }
            IdsModel::Weyl { dim: 0 } => invalid("dim", "must be at least 1"),
            IdsModel::Tabulated(c)
                if c.grid.is_empty()
                    || c.grid[0] <= 0.0
                    || c.values.windows(2).any(|w| w[1] < w[0])
                    || c.values.iter().any(|v| *v < 0.0 || !v.is_finite()) =>
            {
                Err(Error::Malformed("tabulated IDS must be nonnegative and nondecreasing on E > 0".into()))
            }
            IdsModel::Levels { energies, volume }
                if !(*volume > 0.0) || energies.windows(2).any(|w| w[1] < w[0]) =>
            {
                Err(Error::Malformed("levels must be sorted with positive volume".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Finite(f64),
    Divergent,
}

impl Density {
    pub fn finite(self) -> Option<f64> {
        match self {
            Density::Finite(x) => Some(x),
            Density::Divergent => None,
        }
    }

    pub fn value_or_inf(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

const QUAD_REL: f64 = 1e-11;

/// ∫ (e^{β(E−μ)}−1)^{-1} ν(dE) for μ ≤ 0, by parts against ν.
fn bose_integral(model: &IdsModel, beta: f64, mu: f64) -> Result<f64> {
    if let IdsModel::Levels { energies, volume } = model {
        if energies.first().is_some_and(|&e| e <= mu) {
            return Err(Error::Singular("level at or below mu".into()));
        }
        return Ok(energies.iter().map(|&e| bose_gap(beta, e - mu)).sum::<f64>() / volume);
    }
    let integrand = |e: f64| model.nu(e) * bose_slope(beta, e - mu);
    let split = 1.0 / beta;
    let u_max = split.sqrt();
    // E = u² near the origin tames E^{-1/2}-type behaviour
    let head = integrate(|u| 2.0 * u * integrand(u * u), 0.0, u_max, 0.0, QUAD_REL)?;
    let tail = integrate_to_inf(integrand, split, 0.0, QUAD_REL)?;
    Ok(head.value + tail.value)
}

/// Decay exponent of the by-parts integrand ν(E)·(−b'(E)) at the origin.
fn small_energy_exponent(model: &IdsModel, beta: f64) -> Option<f64> {
    let (e1, e2) = (1e-10 / beta, 1e-8 / beta);
    let f = |e: f64| model.nu(e) * bose_slope(beta, e);
    let (a, b) = (f(e1), f(e2));
    if a <= 0.0 || b <= 0.0 {
        return None;
    }
    Some((b / a).ln() / (e2 / e1).ln())
}

pub fn critical_density(model: &IdsModel, beta: f64) -> Result<Density> {
    if !(beta > 0.0 && beta.is_finite()) {
        return invalid("beta", "must be positive");
    }
    model.validate()?;
    if let IdsModel::Levels { .. } = model {
        return bose_integral(model, beta, 0.0).map(Density::Finite);
    }
    if small_energy_exponent(model, beta).is_some_and(|s| s <= -1.0 + 1e-6) {
        return Ok(Density::Divergent);
    }
    bose_integral(model, beta, 0.0).map(Density::Finite)
}

/// Limiting density ∫(e^{β(E−μ)}−1)^{-1}ν(dE) at μ < 0.
pub fn density_at(model: &IdsModel, beta: f64, mu: f64) -> Result<f64> {
    if !(mu < 0.0) {
        return invalid("mu", "must be negative");
    }
    bose_integral(model, beta, mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitingMu {
    pub mu: f64,
    pub rho_c: Density,
    /// |density(μ) − ρ̄|/ρ̄, zero on the condensed branch
    pub residual: f64,
}

pub fn limiting_mu(beta: f64, rho_bar: f64, model: &IdsModel) -> Result<LimitingMu> {
    if !(rho_bar > 0.0 && rho_bar.is_finite()) {
        return invalid("rho_bar", "must be positive");
    }
    let rho_c = critical_density(model, beta)?;
    if let Density::Finite(rc) = rho_c {
        if rho_bar >= rc {
            return Ok(LimitingMu { mu: 0.0, rho_c, residual: 0.0 });
        }
    }
    // density decreases in s = −μ
    let f = |s: f64| density_at(model, beta, -s).map(|d| d - rho_bar);
    let mut hi = 1.0 / beta;
    let mut guard = 0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NoBracket("limiting mu: density does not fall below rho_bar".into()));
        }
    }
    let mut lo = hi;
    guard = 0;
    while f(lo)? <= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 2000 || lo == 0.0 {
            return Err(Error::NoBracket("limiting mu: density does not reach rho_bar".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let r = f(mid)?;
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi / lo - 1.0) < 1e-14 || r.abs() <= 1e-13 * rho_bar {
            break;
        }
    }
    let s = (lo * hi).sqrt();
    let residual = (f(s)?.abs()) / rho_bar;
    Ok(LimitingMu { mu: -s, rho_c, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermoSolution {
    pub beta: f64,
    pub rho_bar: f64,
    pub volume: f64,
    pub mu: f64,
    /// E₁ − μ, kept separately for accurate occupations
    pub gap: f64,
    pub e1: f64,
    pub iterations: usize,
    /// |N(μ)/V − ρ̄|/ρ̄
    pub residual: f64,
    pub rho_c: Option<Density>,
    pub mu_inf: Option<f64>,
}

impl ThermoSolution {
    /// ⟨N_i⟩ for a level of energy e in the solved spectrum.
    pub fn occupation(&self, e: f64) -> f64 {
        bose_gap(self.beta, (e - self.e1) + self.gap)
    }

    pub fn with_limits(mut self, model: &IdsModel) -> Result<Self> {
        let lim = limiting_mu(self.beta, self.rho_bar, model)?;
        self.rho_c = Some(lim.rho_c);
        self.mu_inf = Some(lim.mu);
        Ok(self)
    }

    pub fn csv_header() -> &'static str {
        "lambda,l,seed,beta,rho_bar,mu_l,E1,rho_c,mu_inf,residual"
    }

    pub fn csv_row(&self, lambda: f64, l: f64, seed: u64) -> String {
        let mut s = String::new();
        let rc = self.rho_c.map_or(f64::NAN, Density::value_or_inf);
        write!(
            s,
            "{lambda:.16e},{l:.16e},{seed},{:.16e},{:.16e},{:.16e},{:.16e},{rc:.16e},{:.16e},{:.16e}",
            self.beta,
            self.rho_bar,
            self.mu,
            self.e1,
            self.mu_inf.unwrap_or(f64::NAN),
            self.residual
        )
        .unwrap();
        s
    }
}

const SOLVE_REL: f64 = 1e-12;

/// Finite-volume μ_l < E₁ with (1/V)Σ⟨N_i⟩ = ρ̄, by bisection in ln(E₁ − μ).
pub fn solve_chemical_potential(
    energies: &[f64],
    beta: f64,
    rho_bar: f64,
    volume: f64,
) -> Result<ThermoSolution> {
    if energies.is_empty() {
        return invalid("spectrum", "must be nonempty");
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return invalid("beta", "must be positive");
    }
    if !(rho_bar > 0.0 && rho_bar.is_finite()) {
        return invalid("rho_bar", "must be positive");
    }
    if !(volume > 0.0) {
        return invalid("volume", "must be positive");
    }
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Malformed("energies must be sorted".into()));
    }
    let e1 = energies[0];
    let target = rho_bar * volume;
    let count = |s: f64| -> f64 { energies.iter().map(|&e| bose_gap(beta, (e - e1) + s)).sum() };
    let mut hi = (10.0f64).max(10.0 / beta) * (1.0 + e1.abs());
    let mut iterations = 0;
    while count(hi) >= target {
        hi *= 2.0;
        iterations += 1;
        if iterations > 200 || !hi.is_finite() {
            return Err(Error::NoBracket("particle number stays above target".into()));
        }
    }
    let mut lo = 0.5 / (beta * target);
    while count(lo) <= target {
        lo *= 0.5;
        iterations += 1;
        if lo == 0.0 {
            return Err(Error::NoBracket("particle number stays below target".into()));
        }
    }
    let mut s = (lo * hi).sqrt();
    for _ in 0..400 {
        iterations += 1;
        s = (lo * hi).sqrt();
        let n = count(s);
        if n > target {
            lo = s;
        } else {
            hi = s;
        }
        if ((n - target) / target).abs() <= SOLVE_REL || hi / lo - 1.0 < 4.0 * f64::EPSILON {
            break;
        }
    }
    let residual = ((count(s) - target) / target).abs();
    if residual > 1e-10 {
        return Err(Error::NonConvergent(format!("chemical potential residual {residual:e}")));
    }
    Ok(ThermoSolution {
        beta,
        rho_bar,
        volume,
        mu: e1 - s,
        gap: s,
        e1,
        iterations,
        residual,
        rho_c: None,
        mu_inf: None,
    })
}
