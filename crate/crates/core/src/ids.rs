//! Integrated density of states: empirical curves, ensemble means, the
//! closed-form Luttinger-Sy oracle, Lifshitz-tail fits and finite-volume
//! tail checks.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::disorder::{interval_decomposition, sample_poisson_configuration, PoissonParams};
use crate::error::{invalid, Error, Result};
use crate::numerics::{derive_seed, linear_fit, summarize, LineFit};
use crate::spectral::{ls_spectrum, ls_spectrum_neumann_box, LabeledSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdsKind {
    EmpiricalSingle,
    EnsembleMean,
    Oracle,
    Weyl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdsCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// standard errors and medians, present for ensemble means
    pub se: Option<Vec<f64>>,
    pub median: Option<Vec<f64>>,
    pub kind: IdsKind,
}

impl IdsCurve {
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &[f64], kind: IdsKind, f: F) -> Result<Self> {
        check_grid(grid)?;
        Ok(Self {
            grid: grid.to_vec(),
            values: grid.iter().map(|&e| f(e)).collect(),
            se: None,
            median: None,
            kind,
        })
    }

    /// Linear interpolation, clamped to the end values.
    pub fn value_at(&self, e: f64) -> f64 {
        let g = &self.grid;
        if e <= g[0] {
            return self.values[0];
        }
        let i = g.partition_point(|&x| x < e);
        if i >= g.len() {
            return *self.values.last().unwrap();
        }
        let t = (e - g[i - 1]) / (g[i] - g[i - 1]);
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::Malformed("energy grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// ν_l(E) = #{E_i ≤ E}/l on the grid.
pub fn empirical_ids(spectrum: &LabeledSpectrum, grid: &[f64]) -> Result<IdsCurve> {
    check_grid(grid)?;
    let l = spectrum.length;
    Ok(IdsCurve {
        grid: grid.to_vec(),
        values: grid.iter().map(|&e| spectrum.count_at_most(e) as f64 / l).collect(),
        se: None,
        median: None,
        kind: IdsKind::EmpiricalSingle,
    })
}

pub fn ensemble_mean(curves: &[IdsCurve]) -> Result<IdsCurve> {
    let first = curves.first().ok_or(Error::InsufficientSample { needed: 1, got: 0 })?;
    if curves.iter().any(|c| c.grid != first.grid) {
        return Err(Error::Malformed("ensemble curves on different grids".into()));
    }
    let n = first.grid.len();
    let mut values = Vec::with_capacity(n);
    let mut se = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    let mut column = vec![0.0; curves.len()];
    for j in 0..n {
        for (c, out) in curves.iter().zip(column.iter_mut()) {
            *out = c.values[j];
        }
        let s = summarize(&column);
        values.push(s.mean);
        se.push(s.se);
        median.push(s.median);
    }
    Ok(IdsCurve {
        grid: first.grid.clone(),
        values,
        se: Some(se),
        median: Some(median),
        kind: IdsKind::EnsembleMean,
    })
}

#[derive(Debug, Clone)]
pub struct LsEnsemble {
    pub mean: IdsCurve,
    pub members: Vec<IdsCurve>,
}

/// Ensemble of Luttinger-Sy IDS curves; realization i uses seed
/// derive_seed(master_seed, i).
pub fn ls_ensemble_ids(
    intensity: f64,
    length: f64,
    realizations: usize,
    master_seed: u64,
    grid: &[f64],
) -> Result<LsEnsemble> {
    check_grid(grid)?;
    if realizations == 0 {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let cap = *grid.last().unwrap();
    let members = (0..realizations as u64)
        .into_par_iter()
        .map(|i| {
            let p = PoissonParams::new(intensity, length, derive_seed(master_seed, i))?;
            let d = interval_decomposition(&sample_poisson_configuration(p)?);
            empirical_ids(&ls_spectrum(&d, cap)?, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LsEnsemble { mean: ensemble_mean(&members)?, members })
}

/// Closed-form Luttinger-Sy IDS: λ/(e^{λL₀} − 1), L₀ = π/√(2E).
pub fn ls_ids_oracle(e: f64, intensity: f64) -> Result<f64> {
    if !(e > 0.0) {
        return invalid("energy", "must be positive");
    }
    if !(intensity > 0.0) {
        return invalid("intensity", "must be positive");
    }
    let l0 = PI / (2.0 * e).sqrt();
    Ok(intensity / (intensity * l0).exp_m1())
}

/// Volume of the unit ball in d dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// Free IDS ω_d (2E)^{d/2}/(2π)^d.
pub fn weyl_ids(e: f64, d: usize) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    unit_ball_volume(d) * (2.0 * e).powf(0.5 * d as f64) / (2.0 * PI).powi(d as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifshitzFit {
    /// ν ≈ exp(−â/E^γ̂)
    pub gamma: f64,
    pub amplitude: f64,
    pub line: LineFit,
    pub points: usize,
    /// relative change of the exponent between the lower and upper halves
    pub exponent_drift: f64,
    pub lifshitz_like: bool,
}

pub const LIFSHITZ_R2: f64 = 0.98;
pub const LIFSHITZ_MAX_DRIFT: f64 = 0.1;

/// Least squares of ln(−ln ν) against ln E on the grid points in the window.
pub fn lifshitz_fit(curve: &IdsCurve, window: (f64, f64)) -> Result<LifshitzFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .grid
        .iter()
        .zip(&curve.values)
        .filter(|(e, _)| **e >= window.0 && **e <= window.1)
        .map(|(&e, &v)| (e, v))
        .unzip();
    if x.len() < 4 {
        return Err(Error::InsufficientSample { needed: 4, got: x.len() });
    }
    if let Some(v) = y.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Malformed(format!("IDS value {v} in window is outside (0, 1)")));
    }
    let lx: Vec<f64> = x.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| (-v.ln()).ln()).collect();
    let line = linear_fit(&lx, &ly)?;
    let h = lx.len() / 2;
    let lo = linear_fit(&lx[..h], &ly[..h])?;
    let hi = linear_fit(&lx[lx.len() - h..], &ly[ly.len() - h..])?;
    let gamma = -line.slope;
    let exponent_drift = (lo.slope - hi.slope).abs() / line.slope.abs().max(f64::MIN_POSITIVE);
    Ok(LifshitzFit {
        gamma,
        amplitude: line.intercept.exp(),
        line,
        points: x.len(),
        exponent_drift,
        lifshitz_like: gamma > 0.0 && line.r2 >= LIFSHITZ_R2 && exponent_drift <= LIFSHITZ_MAX_DRIFT,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub energies: Vec<f64>,
    /// fraction of realizations with ν_l(E) > exp(−α/E^γ)
    pub violation_fraction: Vec<f64>,
}

pub fn finite_volume_tail_check(
    curves: &[IdsCurve],
    alpha: f64,
    gamma: f64,
    e_max: f64,
) -> Result<TailCheck> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return invalid("gamma", "must lie in (0, 1/2)");
    }
    if !(alpha > 0.0) {
        return invalid("alpha", "must be positive");
    }
    let first = curves.first().ok_or(Error::InsufficientSample { needed: 1, got: 0 })?;
    let mut energies = Vec::new();
    let mut violation_fraction = Vec::new();
    for (j, &e) in first.grid.iter().enumerate() {
        if e > e_max || e <= 0.0 {
            continue;
        }
        let bound = (-alpha / e.powf(gamma)).exp();
        let bad = curves.iter().filter(|c| c.values[j] > bound).count();
        energies.push(e);
        violation_fraction.push(bad as f64 / curves.len() as f64);
    }
    Ok(TailCheck { energies, violation_fraction })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannPoint {
    pub length: f64,
    pub probability: f64,
    pub se: f64,
    /// e^{−λl}, probability of an impurity-free box
    pub empty_box: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannReport {
    pub points: Vec<NeumannPoint>,
    /// fit of ln P̂ against l; None when degenerate (λ = 0 or a zero estimate)
    pub fit: Option<LineFit>,
}

pub const MIN_NEUMANN_REALIZATIONS: usize = 100;

/// P̂(E₁^N < B/l²) for each l from Neumann-box LS spectra.
pub fn neumann_ground_probability(
    intensity: f64,
    lengths: &[f64],
    realizations: usize,
    b: f64,
    master_seed: u64,
) -> Result<NeumannReport> {
    if realizations < MIN_NEUMANN_REALIZATIONS {
        return Err(Error::InsufficientSample { needed: MIN_NEUMANN_REALIZATIONS, got: realizations });
    }
    if !(b > 0.0) {
        return invalid("b", "must be positive");
    }
    let mut points = Vec::with_capacity(lengths.len());
    for (li, &l) in lengths.iter().enumerate() {
        let cap = b / (l * l);
        let hits = (0..realizations as u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(derive_seed(master_seed, li as u64), i);
                let d = interval_decomposition(&sample_poisson_configuration(PoissonParams::new(
                    intensity, l, seed,
                )?)?);
                let s = ls_spectrum_neumann_box(&d, cap)?;
                Ok(usize::from(s.ground_energy().is_some_and(|e| e < cap)))
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum::<usize>();
        let p = hits as f64 / realizations as f64;
        points.push(NeumannPoint {
            length: l,
            probability: p,
            se: (p * (1.0 - p) / realizations as f64).sqrt(),
            empty_box: (-intensity * l).exp(),
        });
    }
    let fit = if intensity > 0.0 && points.len() >= 2 && points.iter().all(|p| p.probability > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| p.length).collect();
        let y: Vec<f64> = points.iter().map(|p| p.probability.ln()).collect();
        linear_fit(&x, &y).ok()
    } else {
        None
    };
    Ok(NeumannReport { points, fit })
}

pub fn ids_csv(mean: &IdsCurve, intensity: f64) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("E,nu_mean,nu_se,nu_oracle,nu_weyl\n");
    for (j, &e) in mean.grid.iter().enumerate() {
        let se = mean.se.as_ref().map_or(0.0, |v| v[j]);
        let oracle = ls_ids_oracle(e, intensity).unwrap_or(f64::NAN);
        writeln!(s, "{e:.16e},{:.16e},{se:.16e},{oracle:.16e},{:.16e}", mean.values[j], weyl_ids(e, 1)).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{ImpurityConfiguration, PoissonParams};
    use crate::numerics::{linear_grid, log_grid};
    use proptest::prelude::*;

    #[test]
    fn oracle_at_half() {
        let e = PI * PI / (2.0 * 2f64.ln().powi(2));
        assert!((ls_ids_oracle(e, 1.0).unwrap() - 1.0).abs() < 1e-13);
        assert!(ls_ids_oracle(0.0, 1.0).is_err());
    }

    #[test]
    fn oracle_small_energy_log() {
        for e in [1e-3, 1e-4] {
            let v = ls_ids_oracle(e, 1.0).unwrap();
            let want = -PI / (2.0 * e).sqrt();
            assert!((v.ln() - want).abs() / want.abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_recovers_weyl() {
        let e = 1e3;
        let r = ls_ids_oracle(e, 0.5).unwrap() / weyl_ids(e, 1);
        assert!((r - 1.0).abs() < 0.02);
        // the floor in each interval costs half a level per impurity
        let gap = weyl_ids(e, 1) - ls_ids_oracle(e, 1.0).unwrap();
        assert!((gap - 0.5).abs() < 1e-2);
    }

    #[test]
    fn weyl_constants() {
        assert!((weyl_ids(2.0, 1) - 2.0 / PI).abs() < 1e-15);
        let e: f64 = 0.7;
        let d3 = 4.0_f64 * PI / 3.0 * (2.0 * e).powf(1.5) / (2.0 * PI).powi(3);
        assert!((weyl_ids(e, 3) - d3).abs() < 1e-15);
    }

    #[test]
    fn free_box_converges_to_weyl() {
        let l = 1000.0;
        let p = PoissonParams::new(0.0, l, 0).unwrap();
        let d = interval_decomposition(&ImpurityConfiguration::from_positions(p, vec![]).unwrap());
        let grid = linear_grid(0.01, 5.0, 50);
        let c = empirical_ids(&ls_spectrum(&d, 5.0).unwrap(), &grid).unwrap();
        for (e, v) in grid.iter().zip(&c.values) {
            assert!((v - weyl_ids(*e, 1)).abs() <= 2.0 / l);
        }
    }

    #[test]
    fn synthetic_stretched_exponential_fit() {
        let grid = log_grid(0.02, 0.2, 12);
        let c = IdsCurve::from_fn(&grid, IdsKind::Oracle, |e| (-2.0 / e.sqrt()).exp()).unwrap();
        let f = lifshitz_fit(&c, (0.02, 0.2)).unwrap();
        assert!((f.gamma - 0.5).abs() < 1e-6 && (f.amplitude - 2.0).abs() < 1e-6);
        assert!(f.lifshitz_like);
    }

    #[test]
    fn weyl_curve_is_not_lifshitz() {
        let grid = log_grid(0.02, 0.2, 12);
        let c = IdsCurve::from_fn(&grid, IdsKind::Weyl, |e| weyl_ids(e, 1)).unwrap();
        let f = lifshitz_fit(&c, (0.02, 0.2)).unwrap();
        assert!(!f.lifshitz_like, "{f:?}");
        assert!(f.exponent_drift > LIFSHITZ_MAX_DRIFT);
    }

    #[test]
    fn fit_rejects_zero_and_short() {
        let grid = log_grid(0.02, 0.2, 12);
        let c = IdsCurve::from_fn(&grid, IdsKind::Oracle, |_| 0.0).unwrap();
        assert!(lifshitz_fit(&c, (0.02, 0.2)).is_err());
        let c = IdsCurve::from_fn(&grid, IdsKind::Oracle, |e| (-1.0 / e).exp()).unwrap();
        assert!(matches!(lifshitz_fit(&c, (0.02, 0.03)), Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn free_gas_violates_tail_bound() {
        let grid = log_grid(0.001, 0.05, 10);
        let e = ls_ensemble_ids(0.0, 2000.0, 20, 1, &grid).unwrap();
        let t = finite_volume_tail_check(&e.members, 1.0, 0.4, 0.05).unwrap();
        assert!(t.violation_fraction.iter().all(|&f| f == 1.0));
        let t = finite_volume_tail_check(&e.members, 1e-9, 0.4, 0.05).unwrap();
        assert!(t.violation_fraction.iter().all(|&f| f == 0.0));
        assert!(finite_volume_tail_check(&e.members, 1.0, 0.5, 0.05).is_err());
    }

    #[test]
    fn neumann_free_box_always_below() {
        let r = neumann_ground_probability(0.0, &[10.0, 20.0], 100, PI / 2.0, 3).unwrap();
        assert!(r.points.iter().all(|p| p.probability == 1.0));
        assert!(r.fit.is_none());
        assert!(neumann_ground_probability(1.0, &[10.0], 99, 1.0, 3).is_err());
    }

    proptest! {
        #[test]
        fn oracle_monotone(e in 0.01f64..50.0, de in 0.001f64..5.0, lam in 0.05f64..5.0, dl in 0.01f64..2.0) {
            let v = ls_ids_oracle(e, lam).unwrap();
            prop_assert!(ls_ids_oracle(e + de, lam).unwrap() > v);
            // more impurities leave fewer low levels
            prop_assert!(ls_ids_oracle(e, lam + dl).unwrap() < v);
        }

        #[test]
        fn empirical_ids_dominated_by_weyl(lam in 0.0f64..3.0, l in 10.0f64..400.0, seed in any::<u64>()) {
            let p = PoissonParams::new(lam, l, seed).unwrap();
            let d = interval_decomposition(&sample_poisson_configuration(p).unwrap());
            let grid = log_grid(0.001, 20.0, 30);
            let c = empirical_ids(&ls_spectrum(&d, 20.0).unwrap(), &grid).unwrap();
            for (j, e) in grid.iter().enumerate() {
                prop_assert!(c.values[j] <= weyl_ids(*e, 1) + 1.0 / l + 1e-12);
                if j > 0 {
                    prop_assert!(c.values[j] >= c.values[j - 1]);
                }
                let k = (c.values[j] * l).round();
                prop_assert!((c.values[j] * l - k).abs() < 1e-9);
            }
        }
    }
}
