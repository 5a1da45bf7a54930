//! Perfect Bose gas in a weak scaled potential v(x/l) on Λ_l = [−l/2, l/2]^d:
//! closed-form critical density and occupation density, and finite-volume
//! checks in one dimension.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::numerics::{integrate, integrate_to_inf};
use crate::occupation::{kinetic_measures, random_state_measure, EnergyBins, KineticMeasures, OccupationMeasure, LEVEL_CUTOFF};
use crate::spectral::{fd_spectrum_below, required_grid_k_max, BoundaryCondition, FdGrid, LabeledSpectrum};
use crate::thermo::{solve_chemical_potential, Density, ThermoSolution};

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// Euclidean norm |x|
    Abs,
    /// |x|²
    Square,
    /// d = 1 only: values on a uniform grid of [−½, ½], linear in between
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPotential {
    pub kind: PotentialKind,
    pub dim: usize,
    /// v = amplitude·(base shape)
    pub amplitude: f64,
}

const SPOT_CHECKS: usize = 257;

impl ScaledPotential {
    pub fn new(kind: PotentialKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dim", "must be at least 1");
        }
        if let PotentialKind::Tabulated(v) = &kind {
            if dim != 1 {
                return invalid("dim", "tabulated potentials are one-dimensional");
            }
            if v.len() < 2 {
                return invalid("potential", "need at least two tabulated values");
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return invalid("potential", "values must be finite and nonnegative");
            }
        }
        let p = Self { kind, dim, amplitude: 1.0 };
        // v ≥ 0 and finite along the diagonal of the unit cube
        for i in 0..SPOT_CHECKS {
            let t = -0.5 + i as f64 / (SPOT_CHECKS - 1) as f64;
            let v = p.eval(&vec![t; dim]);
            if !(v >= 0.0 && v.is_finite()) {
                return invalid("potential", format!("v({t}) = {v} is not finite and nonnegative"));
            }
        }
        Ok(p)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Zero => "zero",
            PotentialKind::Abs => "abs",
            PotentialKind::Square => "square",
            PotentialKind::Tabulated(_) => "tabulated",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude * self.shape(x)
    }

    fn shape(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Abs => x.iter().map(|t| t * t).sum::<f64>().sqrt(),
            PotentialKind::Square => x.iter().map(|t| t * t).sum(),
            PotentialKind::Tabulated(v) => {
                let s = ((x[0] + 0.5).clamp(0.0, 1.0)) * (v.len() - 1) as f64;
                let i = (s.floor() as usize).min(v.len() - 2);
                let f = s - i as f64;
                v[i] * (1.0 - f) + v[i + 1] * f
            }
        }
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x])
    }

    /// Pointwise multiple c·v.
    pub fn scaled_by(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return invalid("amplitude", "must be finite and nonnegative");
        }
        Ok(Self { amplitude: self.amplitude * c, ..self.clone() })
    }
}

const ABS_TOL: f64 = 1e-13;
const REL_TOL: f64 = 1e-11;

/// ∫ over the unit cube, nested adaptive quadrature with every coordinate
/// split at 0 (where the built-in potentials are not smooth).
fn cube_integral<F: Fn(&[f64]) -> f64>(dim: usize, f: &F) -> Result<f64> {
    fn rec<F: Fn(&[f64]) -> f64>(f: &F, x: &mut Vec<f64>, depth: usize, dim: usize, fail: &mut Option<Error>) -> f64 {
        if depth == dim {
            return f(x);
        }
        let mut total = 0.0;
        for (a, b) in [(-0.5, 0.0), (0.0, 0.5)] {
            let q = integrate(
                |t| {
                    x.truncate(depth);
                    x.push(t);
                    rec(f, x, depth + 1, dim, fail)
                },
                a,
                b,
                ABS_TOL,
                REL_TOL,
            );
            match q {
                Ok(q) => total += q.value,
                Err(e) => {
                    fail.get_or_insert(e);
                }
            }
        }
        x.truncate(depth);
        total
    }
    let mut fail = None;
    let mut x = Vec::with_capacity(dim);
    let v = rec(f, &mut x, 0, dim, &mut fail);
    match fail {
        Some(e) => Err(e),
        None if !v.is_finite() => Err(Error::Quadrature("non-finite cubature".into())),
        None => Ok(v),
    }
}

/// Complementary error function (libm).
fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Exponential integral E₁(z), z > 0.
fn exp_int_e1(z: f64) -> f64 {
    if z <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -z / k as f64;
            sum += term / k as f64;
        }
        -0.577_215_664_901_532_9 - z.ln() - sum
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..300 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// Upper incomplete gamma Γ(1 − d/2, z) by downward recursion from Γ(½, z)
/// or Γ(0, z).
fn upper_gamma_half_dim(dim: usize, z: f64) -> f64 {
    let (mut a, mut g) = if dim % 2 == 1 {
        (0.5, PI.sqrt() * erfc(z.sqrt()))
    } else {
        (0.0, exp_int_e1(z))
    };
    let target = 1.0 - dim as f64 / 2.0;
    while a > target + 0.25 {
        // Γ(a−1, z) = (Γ(a, z) − z^{a−1}e^{−z})/(a−1)
        g = (g - z.powf(a - 1.0) * (-z).exp()) / (a - 1.0);
        a -= 1.0;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCritical {
    pub density: Density,
    /// terms summed directly before the Euler-Maclaurin tail
    pub terms: usize,
    pub remainder_bound: f64,
}

/// Direct terms of the critical-density series.
const DIRECT_TERMS: usize = 256;

/// ρ_c = Σ_{n≥1} (2πnβ)^{−d/2} ∫_{Λ₁} e^{−nβv(x)} dx. The first terms are summed,
/// the rest from the integral over n (exact via incomplete gamma) with the
/// first Euler-Maclaurin correction; the remainder bound is
/// 2ζ(3)/(2π)³·|a''(N)|.
pub fn scaled_critical_density(v: &ScaledPotential, beta: f64) -> Result<ScaledCritical> {
    if !(beta > 0.0 && beta.is_finite()) {
        return invalid("beta", "must be positive");
    }
    shifted_series(v, beta, 0.0)
}

/// The same series for the potential v + shift (shift = −μ ≥ 0).
fn shifted_series(v: &ScaledPotential, beta: f64, shift: f64) -> Result<ScaledCritical> {
    let d = v.dim;
    let hd = d as f64 / 2.0;
    let pref = |s: f64| (2.0 * PI * s * beta).powf(-hd);
    let term = |s: f64| -> Result<f64> { Ok(pref(s) * cube_integral(d, &|x: &[f64]| (-s * beta * (v.eval(x) + shift)).exp())?) };
    let n = DIRECT_TERMS;
    let nf = n as f64;
    // ∫_N^∞ (2πβs)^{−d/2} e^{−sβv} ds per point
    let tail_point = |x: &[f64]| -> f64 {
        let w = beta * (v.eval(x) + shift);
        let c = (2.0 * PI * beta).powf(-hd);
        if w <= 0.0 {
            return if d <= 2 { f64::INFINITY } else { c * nf.powf(1.0 - hd) / (hd - 1.0) };
        }
        c * w.powf(hd - 1.0) * upper_gamma_half_dim(d, nf * w)
    };
    let tail = match cube_integral(d, &tail_point) {
        Ok(t) => t,
        Err(_) => {
            return Ok(ScaledCritical { density: Density::Divergent, terms: n, remainder_bound: 0.0 });
        }
    };
    if !tail.is_finite() {
        return Ok(ScaledCritical { density: Density::Divergent, terms: n, remainder_bound: 0.0 });
    }
    let mut sum = 0.0;
    for k in 1..n {
        sum += term(k as f64)?;
    }
    let a_n = term(nf)?;
    // a'(s) and a''(s) by differentiating under the integral
    let d1 = pref(nf)
        * cube_integral(d, &|x: &[f64]| {
            let w = beta * (v.eval(x) + shift);
            -(-nf * w).exp() * (hd / nf + w)
        })?;
    let d2 = pref(nf)
        * cube_integral(d, &|x: &[f64]| {
            let w = beta * (v.eval(x) + shift);
            (-nf * w).exp() * (hd * (hd + 1.0) / (nf * nf) + 2.0 * hd * w / nf + w * w)
        })?;
    let zeta3 = 1.202_056_903_159_594_3;
    let value = sum + tail + 0.5 * a_n - d1 / 12.0;
    Ok(ScaledCritical {
        density: Density::Finite(value),
        terms: n,
        remainder_bound: 2.0 * zeta3 / (2.0 * PI).powi(3) * d2.abs(),
    })
}

pub const ZETA_THREE_HALVES: f64 = 2.612_375_348_685_488;

/// v = |x|, d = 1: Σ (2πnβ)^{−1/2}·2(1−e^{−nβ/2})/(nβ)
/// = 2(2πβ)^{−1/2}β^{−1}(ζ(3/2) − Li_{3/2}(e^{−β/2})).
pub fn abs_potential_series(beta: f64) -> f64 {
    let q = (-beta / 2.0).exp();
    let mut li = 0.0;
    let mut qn = 1.0;
    for n in 1..100_000 {
        qn *= q;
        let t = qn / (n as f64).powf(1.5);
        li += t;
        if t < 1e-18 * li {
            break;
        }
    }
    2.0 * (2.0 * PI * beta).powf(-0.5) / beta * (ZETA_THREE_HALVES - li)
}

/// F(ε) = ∫_{Λ₁} (e^{β(ε + v(x) − μ)} − 1)^{−1} dx.
pub fn scaled_density_f(eps: f64, v: &ScaledPotential, beta: f64, mu: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("epsilon", "must be positive");
    }
    if !(mu <= 0.0) {
        return invalid("mu", "must be nonpositive");
    }
    let singular = std::cell::Cell::new(false);
    let val = cube_integral(v.dim, &|x: &[f64]| {
        let a = beta * (eps + v.eval(x) - mu);
        if a <= 0.0 {
            singular.set(true);
            return 0.0;
        }
        1.0 / a.exp_m1()
    })?;
    if singular.get() {
        return Err(Error::Singular(format!("eps + v(x) = mu inside the cube at eps = {eps}")));
    }
    Ok(val)
}

/// ∫₀^∞ F dν⁰ in d = 1, i.e. ∫₀^∞ F(k²/2) dk/π.
pub fn scaled_density_mass(v: &ScaledPotential, beta: f64, mu: f64) -> Result<f64> {
    if v.dim != 1 {
        return invalid("dim", "mass check is one-dimensional");
    }
    let mut fail = None;
    let q = integrate_to_inf(
        |k| {
            if k <= 0.0 {
                return 0.0;
            }
            scaled_density_f(0.5 * k * k, v, beta, mu).unwrap_or_else(|e| {
                fail.get_or_insert(e);
                0.0
            })
        },
        0.0,
        1e-11,
        1e-9,
    )?;
    match fail {
        Some(e) => Err(e),
        None => Ok(q.value / PI),
    }
}

/// Bin average of the predicted density F(ε)·dν⁰/dε over [a, b], d = 1.
pub fn predicted_bin_density(v: &ScaledPotential, beta: f64, mu: f64, a: f64, b: f64) -> Result<f64> {
    let mut fail = None;
    let q = integrate(
        |k| {
            scaled_density_f(0.5 * k * k, v, beta, mu).unwrap_or_else(|e| {
                fail.get_or_insert(e);
                0.0
            })
        },
        (2.0 * a).sqrt(),
        (2.0 * b).sqrt(),
        1e-12,
        1e-9,
    )?;
    match fail {
        Some(e) => Err(e),
        None => Ok(q.value / PI / (b - a)),
    }
}

/// Density Σ_n e^{nβμ}(2πnβ)^{−d/2} ∫ e^{−nβv} for μ < 0.
pub fn scaled_density_at(v: &ScaledPotential, beta: f64, mu: f64) -> Result<f64> {
    if !(mu < 0.0) {
        return invalid("mu", "must be negative");
    }
    shifted_series(v, beta, -mu)?
        .density
        .finite()
        .ok_or_else(|| Error::NonConvergent("density series".into()))
}

/// μ_∞: 0 if ρ̄ ≥ ρ_c, else the root of scaled_density_at(μ) = ρ̄.
pub fn scaled_limiting_mu(v: &ScaledPotential, beta: f64, rho_bar: f64) -> Result<f64> {
    if !(rho_bar > 0.0 && rho_bar.is_finite()) {
        return invalid("rho_bar", "must be positive");
    }
    let rc = scaled_critical_density(v, beta)?.density;
    if let Density::Finite(rc) = rc {
        if rho_bar >= rc {
            return Ok(0.0);
        }
    }
    // bisect in ln(−μ)
    let (mut lo, mut hi) = (-30.0f64, 5.0f64);
    while scaled_density_at(v, beta, -hi.exp())? > rho_bar {
        hi += 5.0;
        if hi > 50.0 {
            return Err(Error::NoBracket("limiting mu".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if scaled_density_at(v, beta, -mid.exp())? > rho_bar {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(-(0.5 * (lo + hi)).exp())
}

/// Eigenpairs of −½Δ + v(x/l) (Dirichlet) holding every level with
/// ⟨N_i⟩ ≥ 1e−12·ρ̄V, and μ_l on them.
pub fn solved_scaled_spectrum(
    v: &ScaledPotential,
    l: f64,
    points: usize,
    beta: f64,
    rho_bar: f64,
) -> Result<(LabeledSpectrum, ThermoSolution)> {
    if v.dim != 1 {
        return invalid("dim", "finite-volume spectra are one-dimensional");
    }
    let grid = FdGrid::from_fn(l, points, BoundaryCondition::Dirichlet, |x| v.eval1(x / l))?;
    let reach = (1.0 + 1.0 / (LEVEL_CUTOFF * rho_bar * l)).ln() / beta;
    let mut cap = 1.0 + reach;
    for _ in 0..20 {
        let s = fd_spectrum_below(&grid, cap)?;
        let t = solve_chemical_potential(&s.energies(), beta, rho_bar, l)?;
        if t.mu + reach <= cap {
            return Ok((s, t));
        }
        cap = t.mu + reach + 1.0;
    }
    Err(Error::NonConvergent("energy cap for the level list".into()))
}

#[derive(Debug, Clone)]
pub struct ScaledFiniteVolume {
    pub l: f64,
    pub thermo: ThermoSolution,
    pub random: OccupationMeasure,
    pub kinetic: KineticMeasures,
}

impl ScaledFiniteVolume {
    pub fn atoms(&self, window: f64) -> (f64, f64) {
        (self.random.mass_in(0.0, window), self.kinetic.total.mass_in(0.0, window))
    }
}

/// Grid spacing used for the finite-volume spectra.
pub const GRID_SPACING: f64 = 0.05;

pub fn scaled_finite_volume_measure(
    v: &ScaledPotential,
    l: f64,
    beta: f64,
    rho_bar: f64,
    gamma_tail: f64,
    bins: &EnergyBins,
) -> Result<ScaledFiniteVolume> {
    let points = ((l / GRID_SPACING).round() as usize).max(crate::spectral::MIN_GRID_POINTS);
    let (spectrum, thermo) = solved_scaled_spectrum(v, l, points, beta, rho_bar)?;
    let random = random_state_measure(&spectrum, &thermo, bins)?;
    let h = FdGrid::spacing(l, points, BoundaryCondition::Dirichlet);
    let k_max = required_grid_k_max(points, h, gamma_tail)
        .ok_or_else(|| Error::InvalidParameter { name: "gamma_tail", reason: "exceeds the grid's top mode".into() })?;
    let kinetic = kinetic_measures(&spectrum, &thermo, k_max, gamma_tail, bins)?;
    Ok(ScaledFiniteVolume { l, thermo, random, kinetic })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityComparison {
    pub epsilon: f64,
    pub predicted: f64,
    pub finite_volume: f64,
    pub rel_err: f64,
}

/// Histogram density of m̃_l against the bin-averaged F·dν⁰/dε, for bins
/// inside [lo, hi].
pub fn compare_with_limit(
    fv: &ScaledFiniteVolume,
    v: &ScaledPotential,
    mu_inf: f64,
    lo: f64,
    hi: f64,
) -> Result<Vec<DensityComparison>> {
    let m = &fv.kinetic.total;
    let mut out = Vec::new();
    for i in 0..m.bins.count() {
        let (a, b) = (m.bins.edges[i], m.bins.edges[i + 1]);
        if a < lo || b > hi {
            continue;
        }
        let predicted = predicted_bin_density(v, fv.thermo.beta, mu_inf, a, b)?;
        let fvd = m.bin_mass[i] / (b - a);
        out.push(DensityComparison {
            epsilon: 0.5 * (a + b),
            predicted,
            finite_volume: fvd,
            rel_err: (fvd - predicted) / predicted,
        });
    }
    Ok(out)
}

pub fn comparison_csv(rows: &[DensityComparison]) -> String {
    let mut s = String::from("epsilon,F_closed_form,fv_density,rel_err\n");
    for r in rows {
        writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", r.epsilon, r.predicted, r.finite_volume, r.rel_err).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::bose_occupation;

    fn abs1() -> ScaledPotential {
        ScaledPotential::new(PotentialKind::Abs, 1).unwrap()
    }

    #[test]
    fn special_functions() {
        assert!((exp_int_e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((exp_int_e1(3.0) - 0.013_048_381_094_197_04).abs() < 1e-16);
        // Γ(−½, 1) = 2e^{−1} − 2√π erfc(1)
        let g = upper_gamma_half_dim(3, 1.0);
        assert!((g - (2.0 * (-1f64).exp() - 2.0 * PI.sqrt() * erfc(1.0))).abs() < 1e-15);
    }

    #[test]
    fn zero_potential_one_dim_diverges() {
        let v = ScaledPotential::new(PotentialKind::Zero, 1).unwrap();
        assert_eq!(scaled_critical_density(&v, 1.0).unwrap().density, Density::Divergent);
    }

    #[test]
    fn zero_potential_three_dim_is_zeta() {
        let v = ScaledPotential::new(PotentialKind::Zero, 3).unwrap();
        let r = scaled_critical_density(&v, 1.0 / (2.0 * PI)).unwrap();
        assert!((r.density.finite().unwrap() - 2.612_375_348_685_488).abs() < 1e-6);
    }

    #[test]
    fn abs_potential_matches_series() {
        let r = scaled_critical_density(&abs1(), 1.0).unwrap();
        let rc = r.density.finite().unwrap();
        assert!((rc - 1.437_696_139_148_525).abs() < 1e-8, "{rc}");
        assert!(r.remainder_bound < 1e-8);
        assert!((abs_potential_series(1.0) - rc).abs() < 1e-9);
        let r2 = scaled_critical_density(&abs1(), 0.5).unwrap().density.finite().unwrap();
        assert!((abs_potential_series(0.5) - r2).abs() < 1e-8);
    }

    #[test]
    fn doubling_potential_lowers_critical_density() {
        let a = scaled_critical_density(&abs1(), 1.0).unwrap().density.finite().unwrap();
        let b = scaled_critical_density(&abs1().scaled_by(2.0).unwrap(), 1.0).unwrap().density.finite().unwrap();
        assert!(b < a);
        assert!((b - 0.871_263_855_190_952).abs() < 1e-6, "{b}");
    }

    #[test]
    fn zero_potential_f_is_bose() {
        let v = ScaledPotential::new(PotentialKind::Zero, 1).unwrap();
        for e in [0.1, 0.5, 2.0] {
            let f = scaled_density_f(e, &v, 1.3, -0.2).unwrap();
            assert!((f - bose_occupation(e, 1.3, -0.2).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn f_decreases() {
        let v = abs1();
        let fs: Vec<f64> = (1..30).map(|i| scaled_density_f(0.1 * i as f64, &v, 1.0, 0.0).unwrap()).collect();
        assert!(fs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn singular_f_is_an_error() {
        let v = ScaledPotential::new(PotentialKind::Zero, 1).unwrap();
        assert!(scaled_density_f(0.5, &v, 1.0, 0.0).is_ok());
        assert!(scaled_density_f(0.5, &v, 1.0, 1.0).is_err());
    }

    #[test]
    fn fubini_mass() {
        let v = abs1();
        let rc = scaled_critical_density(&v, 1.0).unwrap().density.finite().unwrap();
        let m = scaled_density_mass(&v, 1.0, 0.0).unwrap();
        assert!((m - rc).abs() < 1e-4, "{m} vs {rc}");
        let mu = scaled_limiting_mu(&v, 1.0, 0.5 * rc).unwrap();
        assert!(mu < 0.0);
        assert!((scaled_density_mass(&v, 1.0, mu).unwrap() - 0.5 * rc).abs() < 1e-4);
        assert_eq!(scaled_limiting_mu(&v, 1.0, 2.0 * rc).unwrap(), 0.0);
    }

    #[test]
    fn rejects_negative_tabulated() {
        assert!(ScaledPotential::new(PotentialKind::Tabulated(vec![0.0, -1.0, 0.0]), 1).is_err());
        assert!(ScaledPotential::new(PotentialKind::Tabulated(vec![0.0, 1.0]), 2).is_err());
    }
}
