//! Occupation measures in the random eigenbasis (m_l) and in the kinetic
//! basis (m̃_l), the split of m̃_l by the n-sum indicator, and condensate
//! diagnostics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::disorder::{interval_decomposition, sample_poisson_configuration, IntervalDecomposition, PoissonParams};
use crate::error::{invalid, Error, Result};
use crate::numerics::linear_fit;
use crate::spectral::{kinetic_energy, ls_spectrum, required_k_max, LabeledSpectrum, OverlapEngine};
use crate::thermo::{solve_chemical_potential, ThermoSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBins {
    pub edges: Vec<f64>,
}

impl EnergyBins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges[0] <= 0.0 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Malformed("bin edges must be positive and strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    /// Log-spaced edges from `lo` to 1, then linear up to `hi`.
    pub fn standard(lo: f64, n_log: usize, hi: f64, n_lin: usize) -> Result<Self> {
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0) || n_log == 0 || n_lin == 0 {
            return invalid("bins", "need 0 < lo < 1 < hi and nonzero counts");
        }
        let mut edges: Vec<f64> = (0..n_log)
            .map(|i| (lo.ln() * (1.0 - i as f64 / n_log as f64)).exp())
            .collect();
        edges.extend((0..=n_lin).map(|i| 1.0 + (hi - 1.0) * i as f64 / n_lin as f64));
        Self::new(edges)
    }

    /// Moves each edge onto the nearest midpoint ε_{k+½} between kinetic
    /// levels of the box l, so every bin holds whole levels.
    pub fn kinetic_aligned(l: f64, approx: &[f64]) -> Result<Self> {
        let mut edges: Vec<f64> = approx
            .iter()
            .map(|&e| {
                let k = (l * (2.0 * e).sqrt() / PI - 0.5).round().max(0.0);
                let q = (k + 0.5) * PI / l;
                0.5 * q * q
            })
            .collect();
        edges.dedup();
        Self::new(edges)
    }

    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn index(&self, e: f64) -> Option<usize> {
        if e < self.edges[0] || e >= *self.edges.last().unwrap() {
            return None;
        }
        Some(self.edges.partition_point(|&x| x <= e) - 1)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    /// point masses (energy, density), sorted by energy
    pub levels: Vec<(f64, f64)>,
    pub bins: EnergyBins,
    pub bin_mass: Vec<f64>,
    /// mass at or above the last bin edge
    pub overflow: f64,
    pub total_mass: f64,
    /// mass lost to the k-cutoff (exact, from row partial sums)
    pub truncation_deficit: f64,
    /// a priori bound Σ⟨N_i⟩E_i/(γV) on the deficit
    pub truncation_bound: f64,
}

impl OccupationMeasure {
    fn from_levels(levels: Vec<(f64, f64)>, bins: &EnergyBins, deficit: f64, bound: f64) -> Self {
        let mut bin_mass = vec![0.0; bins.count()];
        let mut overflow = 0.0;
        let mut total = 0.0;
        for &(e, w) in &levels {
            total += w;
            if let Some(i) = bins.index(e) {
                bin_mass[i] += w;
            } else if e >= *bins.edges.last().unwrap() {
                overflow += w;
            }
        }
        Self {
            levels,
            bins: bins.clone(),
            bin_mass,
            overflow,
            total_mass: total,
            truncation_deficit: deficit,
            truncation_bound: bound,
        }
    }

    /// Levels below the first bin edge.
    pub fn atoms(&self) -> &[(f64, f64)] {
        let n = self.levels.partition_point(|p| p.0 < self.bins.edges[0]);
        &self.levels[..n]
    }

    /// Mass of the closed window [lo, hi].
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let a = self.levels.partition_point(|p| p.0 < lo);
        let b = self.levels.partition_point(|p| p.0 <= hi);
        self.levels[a..b.max(a)].iter().map(|p| p.1).sum()
    }

    pub fn cdf(&self, e: f64) -> f64 {
        self.mass_in(f64::NEG_INFINITY, e)
    }

    /// Heaviest single level.
    pub fn max_level(&self) -> (f64, f64) {
        self.levels
            .iter()
            .copied()
            .fold((f64::NAN, 0.0), |m, p| if p.1 > m.1 { p } else { m })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,mass,kind\n");
        for &(e, w) in self.atoms() {
            writeln!(s, "{e:.16e},{e:.16e},{w:.16e},atom").unwrap();
        }
        for (i, m) in self.bin_mass.iter().enumerate() {
            writeln!(s, "{:.16e},{:.16e},{m:.16e},bin", self.bins.edges[i], self.bins.edges[i + 1]).unwrap();
        }
        s
    }
}

fn check_solved(spectrum: &LabeledSpectrum, thermo: &ThermoSolution) -> Result<()> {
    match spectrum.ground_energy() {
        Some(e1) if e1 == thermo.e1 && thermo.volume == spectrum.length => Ok(()),
        _ => Err(Error::Malformed("thermodynamics was not solved on this spectrum".into())),
    }
}

/// m_l: level E_i carries ⟨N_i⟩/V.
pub fn random_state_measure(
    spectrum: &LabeledSpectrum,
    thermo: &ThermoSolution,
    bins: &EnergyBins,
) -> Result<OccupationMeasure> {
    check_solved(spectrum, thermo)?;
    let v = thermo.volume;
    let levels = spectrum
        .entries
        .iter()
        .map(|e| (e.energy, thermo.occupation(e.energy) / v))
        .collect();
    Ok(OccupationMeasure::from_levels(levels, bins, 0.0, 0.0))
}

/// Occupation of one level split by the n-sum: terms with μ ≤ 1/n and
/// terms with μ > 1/n. Returns (total, first, second).
pub fn split_occupation(thermo: &ThermoSolution, e: f64) -> (f64, f64, f64) {
    let x = thermo.beta * ((e - thermo.e1) + thermo.gap);
    let total = 1.0 / x.exp_m1();
    let mu = thermo.mu;
    if mu <= 0.0 {
        return (total, total, 0.0);
    }
    let n0 = (1.0 / mu).floor() + 1.0;
    let denom = -(-x).exp_m1();
    let second = (-n0 * x).exp() / denom;
    let first = (-x).exp() * (-(-(n0 - 1.0) * x).exp_m1()) / denom;
    (total, first, second)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCheck {
    pub rows: usize,
    /// max over rows of (partial sum − 1)
    pub max_excess: f64,
    /// min over rows of (partial sum + tail bound − 1)
    pub min_slack: f64,
}

impl RowCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_excess <= tol && self.min_slack >= -tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticMeasures {
    pub total: OccupationMeasure,
    pub first: OccupationMeasure,
    pub second: OccupationMeasure,
    pub rows: RowCheck,
    pub k_max: usize,
}

const CHUNK: usize = 32;

struct ChunkSums {
    w: [Vec<f64>; 3],
    deficit: [f64; 3],
    bound: [f64; 3],
    max_excess: f64,
    min_slack: f64,
}

/// One pass over all overlap rows, accumulating m̃ and both split parts.
pub fn kinetic_measures(
    spectrum: &LabeledSpectrum,
    thermo: &ThermoSolution,
    k_max: usize,
    gamma_tail: f64,
    bins: &EnergyBins,
) -> Result<KineticMeasures> {
    check_solved(spectrum, thermo)?;
    let engine = OverlapEngine::new(spectrum, k_max, gamma_tail)?;
    let n = spectrum.len();
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let chunks = starts
        .par_iter()
        .map(|&start| -> Result<ChunkSums> {
            let mut c = ChunkSums {
                w: [vec![0.0; k_max], vec![0.0; k_max], vec![0.0; k_max]],
                deficit: [0.0; 3],
                bound: [0.0; 3],
                max_excess: f64::NEG_INFINITY,
                min_slack: f64::INFINITY,
            };
            for i in start..(start + CHUNK).min(n) {
                let row = engine.row(i)?;
                let (t, a, b) = split_occupation(thermo, row.energy);
                let occ = [t, a, b];
                let partial = row.partial_sum();
                c.max_excess = c.max_excess.max(partial - 1.0);
                c.min_slack = c.min_slack.min(partial + row.tail_bound - 1.0);
                for j in 0..3 {
                    let o = occ[j];
                    if o == 0.0 {
                        continue;
                    }
                    c.deficit[j] += o * (1.0 - partial);
                    c.bound[j] += o * row.tail_bound;
                    for (w, s) in c.w[j].iter_mut().zip(&row.squared) {
                        *w += o * s;
                    }
                }
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    // fixed-order reduction keeps results independent of scheduling
    let mut w = [vec![0.0; k_max], vec![0.0; k_max], vec![0.0; k_max]];
    let mut deficit = [0.0; 3];
    let mut bound = [0.0; 3];
    let mut rows = RowCheck { rows: n, max_excess: f64::NEG_INFINITY, min_slack: f64::INFINITY };
    for c in &chunks {
        for j in 0..3 {
            w[j].iter_mut().zip(&c.w[j]).for_each(|(a, b)| *a += b);
            deficit[j] += c.deficit[j];
            bound[j] += c.bound[j];
        }
        rows.max_excess = rows.max_excess.max(c.max_excess);
        rows.min_slack = rows.min_slack.min(c.min_slack);
    }
    let v = thermo.volume;
    let l = spectrum.length;
    let build = |j: usize| {
        let levels = w[j].iter().enumerate().map(|(k, x)| (kinetic_energy(k + 1, l), x / v)).collect();
        OccupationMeasure::from_levels(levels, bins, deficit[j] / v, bound[j] / v)
    };
    Ok(KineticMeasures { total: build(0), first: build(1), second: build(2), rows, k_max })
}

/// m̃_l alone.
pub fn kinetic_state_measure(
    spectrum: &LabeledSpectrum,
    thermo: &ThermoSolution,
    k_max: usize,
    gamma_tail: f64,
    bins: &EnergyBins,
) -> Result<OccupationMeasure> {
    kinetic_measures(spectrum, thermo, k_max, gamma_tail, bins).map(|m| m.total)
}

/// (m̃⁽¹⁾, m̃⁽²⁾).
pub fn split_measure(
    spectrum: &LabeledSpectrum,
    thermo: &ThermoSolution,
    k_max: usize,
    gamma_tail: f64,
    bins: &EnergyBins,
) -> Result<(OccupationMeasure, OccupationMeasure)> {
    kinetic_measures(spectrum, thermo, k_max, gamma_tail, bins).map(|m| (m.first, m.second))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSchedule {
    pub scale: f64,
    pub exponent: f64,
}

impl WindowSchedule {
    pub fn new(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return invalid("scale", "window scale must be positive");
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return invalid("exponent", "window must shrink to zero: exponent must be positive");
        }
        Ok(Self { scale, exponent })
    }

    pub fn delta(&self, l: f64) -> f64 {
        self.scale * l.powf(-self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensateReport {
    pub l: f64,
    pub window: f64,
    /// m_l([0, δ])
    pub atom_random: f64,
    /// m̃_l([0, δ])
    pub atom_kinetic: f64,
    /// max_k ⟨N(ψ_k)⟩/V
    pub max_mode: f64,
    /// ⟨N(φ₁)⟩/V
    pub ground_random: f64,
    /// ρ̄(κ/λ)·ln l / l
    pub bound: f64,
}

pub fn condensate_report(
    l: f64,
    random: &OccupationMeasure,
    kinetic: &OccupationMeasure,
    schedule: &WindowSchedule,
    rho_bar: f64,
    kappa: f64,
    intensity: f64,
) -> CondensateReport {
    let window = schedule.delta(l);
    CondensateReport {
        l,
        window,
        atom_random: random.mass_in(0.0, window),
        atom_kinetic: kinetic.mass_in(0.0, window),
        max_mode: kinetic.max_level().1,
        ground_random: random.levels.first().map_or(0.0, |p| p.1),
        bound: if intensity > 0.0 { rho_bar * kappa / intensity * l.ln() / l } else { f64::INFINITY },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensateTrend {
    pub reports: Vec<CondensateReport>,
    /// slope of ln(max mode) against ln l
    pub max_mode_slope: f64,
    pub atom_gap: Vec<f64>,
    pub atom_gap_decreasing: bool,
    pub max_mode_decreasing: bool,
    pub ground_increasing: bool,
}

/// Trend analysis over a family of volumes (one report per l, increasing).
pub fn condensate_diagnostics(reports: &[CondensateReport]) -> Result<CondensateTrend> {
    if reports.len() < 3 {
        return Err(Error::InsufficientSample { needed: 3, got: reports.len() });
    }
    if reports.windows(2).any(|w| w[1].l <= w[0].l) {
        return Err(Error::Malformed("volumes must increase".into()));
    }
    if reports.windows(2).any(|w| w[1].window >= w[0].window) || reports.iter().any(|r| r.window <= 0.0) {
        return invalid("schedule", "window must decrease to zero along the family");
    }
    let x: Vec<f64> = reports.iter().map(|r| r.l.ln()).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.max_mode.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let atom_gap: Vec<f64> = reports.iter().map(|r| (r.atom_kinetic - r.atom_random).abs()).collect();
    Ok(CondensateTrend {
        max_mode_slope: fit.slope,
        atom_gap_decreasing: atom_gap.windows(2).all(|w| w[1] < w[0]),
        max_mode_decreasing: reports.windows(2).all(|w| w[1].max_mode < w[0].max_mode),
        ground_increasing: reports.windows(2).all(|w| w[1].ground_random > w[0].ground_random),
        atom_gap,
        reports: reports.to_vec(),
    })
}

pub fn condensate_csv(reports: &[CondensateReport]) -> String {
    let mut s = String::from("l,atom,atom_kinetic,max_mode,ground_random,bound\n");
    for r in reports {
        writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.l, r.atom_random, r.atom_kinetic, r.max_mode, r.ground_random, r.bound
        )
        .unwrap();
    }
    s
}

/// Relative particle-number cutoff for the eigenstate list.
pub const LEVEL_CUTOFF: f64 = 1e-12;

/// Spectrum holding every level with ⟨N_i⟩ ≥ 1e−12·ρ̄V, and μ_l solved on it.
pub fn solved_ls_spectrum(
    decomp: &IntervalDecomposition,
    beta: f64,
    rho_bar: f64,
) -> Result<(LabeledSpectrum, ThermoSolution)> {
    let v = decomp.length;
    let reach = (1.0 + 1.0 / (LEVEL_CUTOFF * rho_bar * v)).ln() / beta;
    let mut cap = 1.0 + reach;
    for _ in 0..20 {
        let s = ls_spectrum(decomp, cap)?;
        let t = solve_chemical_potential(&s.energies(), beta, rho_bar, v)?;
        if t.mu + reach <= cap {
            return Ok((s, t));
        }
        cap = t.mu + reach + 1.0;
    }
    Err(Error::NonConvergent("energy cap for the level list".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsRunParams {
    pub intensity: f64,
    pub length: f64,
    pub beta: f64,
    pub rho_bar: f64,
    pub gamma_tail: f64,
    pub schedule: WindowSchedule,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct LsRealization {
    pub seed: u64,
    pub thermo: ThermoSolution,
    pub report: CondensateReport,
    /// m̃⁽¹⁾ and m̃⁽²⁾ masses of [0, δ]
    pub split_window: (f64, f64),
    pub random: OccupationMeasure,
    pub kinetic: KineticMeasures,
}

impl LsRealization {
    pub fn random_mass_error(&self) -> f64 {
        (self.random.total_mass - self.thermo.rho_bar).abs()
    }

    pub fn kinetic_mass_error(&self) -> f64 {
        let k = &self.kinetic.total;
        (k.total_mass + k.truncation_deficit - self.thermo.rho_bar).abs()
    }
}

/// disorder → spectrum → μ_l → m_l, m̃_l and the split → report.
pub fn ls_realization(p: &LsRunParams, seed: u64, bins: &EnergyBins) -> Result<LsRealization> {
    let config = sample_poisson_configuration(PoissonParams::new(p.intensity, p.length, seed)?)?;
    let decomp = interval_decomposition(&config);
    let (spectrum, thermo) = solved_ls_spectrum(&decomp, p.beta, p.rho_bar)?;
    let random = random_state_measure(&spectrum, &thermo, bins)?;
    let k_max = required_k_max(p.length, p.gamma_tail);
    let kinetic = kinetic_measures(&spectrum, &thermo, k_max, p.gamma_tail, bins)?;
    let report = condensate_report(p.length, &random, &kinetic.total, &p.schedule, p.rho_bar, p.kappa, p.intensity);
    let w = report.window;
    let split_window = (kinetic.first.mass_in(0.0, w), kinetic.second.mass_in(0.0, w));
    Ok(LsRealization { seed, thermo, report, split_window, random, kinetic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::ImpurityConfiguration;
    use crate::spectral::ls_spectrum;

    fn bins() -> EnergyBins {
        EnergyBins::standard(1e-3, 12, 5.0, 16).unwrap()
    }

    fn empty_box(l: f64) -> IntervalDecomposition {
        let p = PoissonParams::new(0.0, l, 0).unwrap();
        interval_decomposition(&ImpurityConfiguration::from_positions(p, vec![]).unwrap())
    }

    fn decomp(lambda: f64, l: f64, seed: u64) -> IntervalDecomposition {
        interval_decomposition(&sample_poisson_configuration(PoissonParams::new(lambda, l, seed).unwrap()).unwrap())
    }

    #[test]
    fn free_box_kinetic_equals_random() {
        let (s, t) = solved_ls_spectrum(&empty_box(50.0), 1.0, 0.8).unwrap();
        let m = random_state_measure(&s, &t, &bins()).unwrap();
        let k = kinetic_state_measure(&s, &t, required_k_max(50.0, 60.0), 60.0, &bins()).unwrap();
        for (a, b) in m.levels.iter().zip(&k.levels) {
            assert!((a.0 - b.0).abs() < 1e-12);
            assert!((a.1 - b.1).abs() < 1e-12 * t.rho_bar.max(a.1));
        }
        assert!((m.total_mass - t.rho_bar).abs() < 1e-10);
    }

    #[test]
    fn mass_and_split_partition() {
        let d = decomp(1.0, 300.0, 11);
        let (s, t) = solved_ls_spectrum(&d, 1.0, 0.55).unwrap();
        assert!(t.mu < t.e1);
        let km = kinetic_measures(&s, &t, required_k_max(300.0, 40.0), 40.0, &bins()).unwrap();
        assert!((km.total.total_mass + km.total.truncation_deficit - 0.55).abs() < 1e-8);
        assert!(km.total.truncation_deficit <= km.total.truncation_bound + 1e-12);
        assert!(km.rows.holds(1e-10), "{:?}", km.rows);
        for ((a, b), c) in km.first.levels.iter().zip(&km.second.levels).zip(&km.total.levels) {
            assert!((a.1 + b.1 - c.1).abs() <= 1e-10 * c.1.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn negative_mu_has_empty_second_part() {
        let d = decomp(1.0, 200.0, 5);
        let (s, t) = solved_ls_spectrum(&d, 1.0, 0.05).unwrap();
        assert!(t.mu < 0.0);
        let (_, second) = split_measure(&s, &t, required_k_max(200.0, 30.0), 30.0, &bins()).unwrap();
        assert!(second.levels.iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn lemma_window_inequality() {
        let d = decomp(1.0, 400.0, 2);
        let (s, t) = solved_ls_spectrum(&d, 1.0, 0.6).unwrap();
        let m = random_state_measure(&s, &t, &bins()).unwrap();
        let k = kinetic_state_measure(&s, &t, required_k_max(400.0, 40.0), 40.0, &bins()).unwrap();
        for &(delta, gamma) in &[(0.05, 0.1), (0.1, 0.5), (0.2, 2.0), (0.01, 0.2)] {
            assert!(k.mass_in(0.0, gamma) >= (1.0 - delta / gamma) * m.mass_in(0.0, delta) - 1e-12);
        }
    }

    #[test]
    fn kinetic_window_bound_away_from_zero() {
        // m̃(A) ≤ αρ̄/a + ρ̄ν⁰(A)/ν^ω(α) for A ⊂ [a, ∞)
        let l = 400.0;
        let d = decomp(1.0, l, 4);
        let (s, t) = solved_ls_spectrum(&d, 1.0, 0.6).unwrap();
        let k = kinetic_state_measure(&s, &t, required_k_max(l, 40.0), 40.0, &bins()).unwrap();
        let alpha = 0.1;
        let nu_alpha = s.count_at_most(alpha) as f64 / l;
        for &(a, b) in &[(0.2, 0.4), (0.5, 1.0), (1.0, 3.0)] {
            let nu0 = k.levels.iter().filter(|p| p.0 >= a && p.0 <= b).count() as f64 / l;
            let bound = alpha * t.rho_bar / a + t.rho_bar * nu0 / nu_alpha;
            assert!(k.mass_in(a, b) <= bound);
        }
    }

    #[test]
    fn unsolved_thermo_is_rejected() {
        let s = ls_spectrum(&decomp(1.0, 100.0, 1), 5.0).unwrap();
        let t = solve_chemical_potential(&[0.3, 1.0], 1.0, 1.0, 100.0).unwrap();
        assert!(random_state_measure(&s, &t, &bins()).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(WindowSchedule::new(1.0, 0.0).is_err());
        assert!(WindowSchedule::new(0.0, 0.5).is_err());
        let w = WindowSchedule::new(2.0, 0.5).unwrap();
        assert!((w.delta(4.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aligned_bins_sit_between_levels() {
        let l = 100.0;
        let b = EnergyBins::kinetic_aligned(l, &[0.2, 0.5, 1.0]).unwrap();
        for e in &b.edges {
            let k = l * (2.0 * e).sqrt() / PI;
            assert!((k - k.floor() - 0.5).abs() < 1e-9);
        }
    }
}
