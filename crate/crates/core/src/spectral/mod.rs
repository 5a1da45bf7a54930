//! One-particle spectra for h = −½Δ + v on the box (−l/2, l/2): the exact
//! Luttinger-Sy spectrum, a three-point finite-difference solver, the kinetic
//! basis and overlaps between the two.

pub mod tridiag;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::disorder::{BoundaryKind, IntervalDecomposition};
use crate::error::{invalid, Error, Result};
use tridiag::SymTridiag;

pub const CONVENTION: &str = "h = -1/2 Laplacian";

pub fn kinetic_energy(k: usize, l: f64) -> f64 {
    let a = k as f64 * PI / l;
    0.5 * a * a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticMode {
    pub k: usize,
    pub length: f64,
    pub energy: f64,
}

impl KineticMode {
    pub fn eval(&self, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * (self.k as f64 * PI * (x + 0.5 * self.length) / self.length).sin()
    }
}

pub fn kinetic_basis(l: f64, k_max: usize) -> Result<Vec<KineticMode>> {
    if !(l > 0.0 && l.is_finite()) {
        return invalid("length", "must be positive and finite");
    }
    if k_max == 0 {
        return invalid("k_max", "must be at least 1");
    }
    Ok((1..=k_max)
        .map(|k| KineticMode { k, length: l, energy: kinetic_energy(k, l) })
        .collect())
}

/// Smallest k with ε_k ≥ γ.
pub fn required_k_max(l: f64, gamma: f64) -> usize {
    ((l * (2.0 * gamma).sqrt() / PI).ceil() as usize).max(1)
}

/// Smallest k whose sampled sine mode on an n-point Dirichlet grid with
/// spacing h has discrete energy ≥ γ; None if even k = n falls short.
pub fn required_grid_k_max(n: usize, h: f64, gamma: f64) -> Option<usize> {
    let s = (gamma * h * h / 2.0).sqrt();
    if s >= 1.0 {
        return None;
    }
    let k = (s.asin() * 2.0 * (n + 1) as f64 / PI).ceil() as usize;
    // guard the rounding at the boundary
    let e = |k: usize| 2.0 * (PI * k as f64 / (2.0 * (n + 1) as f64)).sin().powi(2) / (h * h);
    let k = if e(k) < gamma { k + 1 } else { k.max(1) };
    (k <= n).then_some(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateLabel {
    Ls {
        interval: usize,
        n: u32,
        kind: BoundaryKind,
        left: f64,
        right: f64,
    },
    Grid {
        index: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEntry {
    pub energy: f64,
    pub label: StateLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBasis {
    pub bc: BoundaryCondition,
    pub spacing: f64,
    pub nodes: Vec<f64>,
    /// normalized so that Σ h·u² = 1
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrum {
    pub length: f64,
    pub entries: Vec<SpectralEntry>,
    pub grid: Option<GridBasis>,
    pub convention: &'static str,
}

impl LabeledSpectrum {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ground_energy(&self) -> Option<f64> {
        self.entries.first().map(|e| e.energy)
    }

    /// Number of levels ≤ e.
    pub fn count_at_most(&self, e: f64) -> usize {
        self.entries.partition_point(|x| x.energy <= e)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,energy,interval_index,quantum_number,kind\n");
        for (r, e) in self.entries.iter().enumerate() {
            match e.label {
                StateLabel::Ls { interval, n, kind, .. } => writeln!(
                    s,
                    "{},{:.16e},{},{},{}",
                    r + 1,
                    e.energy,
                    interval,
                    n,
                    kind.as_str()
                ),
                StateLabel::Grid { index } => {
                    writeln!(s, "{},{:.16e},,{},grid", r + 1, e.energy, index + 1)
                }
            }
            .unwrap();
        }
        s
    }
}

fn sort_entries(entries: &mut [SpectralEntry]) {
    entries.sort_by(|a, b| a.energy.total_cmp(&b.energy));
}

/// Luttinger-Sy spectrum under Dirichlet box conditions: every interval of
/// length L contributes n²π²/(2L²), n ≥ 1.
pub fn ls_spectrum(decomp: &IntervalDecomposition, energy_cap: f64) -> Result<LabeledSpectrum> {
    ls_spectrum_with(decomp, energy_cap, |_, n, len| {
        let a = n as f64 * PI / len;
        0.5 * a * a
    })
}

/// Variant with Neumann conditions at the box walls: edge intervals give
/// (n−½)²π²/(2L²), an impurity-free box gives (n−1)²π²/(2L²).
pub fn ls_spectrum_neumann_box(
    decomp: &IntervalDecomposition,
    energy_cap: f64,
) -> Result<LabeledSpectrum> {
    ls_spectrum_with(decomp, energy_cap, |kind, n, len| {
        let m = match kind {
            BoundaryKind::DirichletDirichlet => n as f64,
            BoundaryKind::EdgeLeft | BoundaryKind::EdgeRight => n as f64 - 0.5,
            BoundaryKind::WholeBox => n as f64 - 1.0,
        };
        let a = m * PI / len;
        0.5 * a * a
    })
}

fn ls_spectrum_with<F>(decomp: &IntervalDecomposition, energy_cap: f64, level: F) -> Result<LabeledSpectrum>
where
    F: Fn(BoundaryKind, u32, f64) -> f64,
{
    if !(energy_cap > 0.0) {
        return invalid("energy_cap", "must be positive");
    }
    if decomp.intervals.is_empty() {
        return Err(Error::Malformed("empty decomposition".into()));
    }
    let mut entries = Vec::new();
    for (j, iv) in decomp.intervals.iter().enumerate() {
        let len = iv.len();
        let mut n = 1u32;
        loop {
            let e = level(iv.kind, n, len);
            if e > energy_cap {
                break;
            }
            entries.push(SpectralEntry {
                energy: e,
                label: StateLabel::Ls { interval: j, n, kind: iv.kind, left: iv.left, right: iv.right },
            });
            n += 1;
        }
    }
    sort_entries(&mut entries);
    Ok(LabeledSpectrum { length: decomp.length, entries, grid: None, convention: CONVENTION })
}

/// √(2/L)·sin(nπ(x−a)/L) on [a, b], zero outside.
pub fn ls_wavefunction(left: f64, right: f64, n: u32, x: f64) -> f64 {
    if x <= left || x >= right {
        return 0.0;
    }
    let len = right - left;
    (2.0 / len).sqrt() * (n as f64 * PI * (x - left) / len).sin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    pub length: f64,
    pub bc: BoundaryCondition,
    pub potential: Vec<f64>,
}

pub const MIN_GRID_POINTS: usize = 64;

impl FdGrid {
    /// Dirichlet: interior nodes −l/2 + j·h, h = l/(n+1). Neumann: cell
    /// centres −l/2 + (j+½)·h, h = l/n.
    pub fn spacing(length: f64, n: usize, bc: BoundaryCondition) -> f64 {
        match bc {
            BoundaryCondition::Dirichlet => length / (n + 1) as f64,
            BoundaryCondition::Neumann => length / n as f64,
        }
    }

    pub fn nodes(length: f64, n: usize, bc: BoundaryCondition) -> Vec<f64> {
        let h = Self::spacing(length, n, bc);
        let off = match bc {
            BoundaryCondition::Dirichlet => 1.0,
            BoundaryCondition::Neumann => 0.5,
        };
        (0..n).map(|j| -0.5 * length + (j as f64 + off) * h).collect()
    }

    pub fn new(length: f64, bc: BoundaryCondition, potential: Vec<f64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return invalid("length", "must be positive and finite");
        }
        if potential.len() < MIN_GRID_POINTS {
            return invalid("grid_points", format!("need at least {MIN_GRID_POINTS}"));
        }
        if let Some(v) = potential.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return invalid("potential", format!("entries must be finite and nonnegative, found {v}"));
        }
        Ok(Self { length, bc, potential })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(length: f64, n: usize, bc: BoundaryCondition, v: F) -> Result<Self> {
        let pot = Self::nodes(length, n, bc).into_iter().map(v).collect();
        Self::new(length, bc, pot)
    }

    pub fn points(&self) -> usize {
        self.potential.len()
    }

    pub fn h(&self) -> f64 {
        Self::spacing(self.length, self.points(), self.bc)
    }

    pub fn matrix(&self) -> SymTridiag {
        let n = self.points();
        let h = self.h();
        let k = 1.0 / (h * h);
        let mut diag: Vec<f64> = self.potential.iter().map(|v| v + k).collect();
        if self.bc == BoundaryCondition::Neumann {
            diag[0] -= 0.5 * k;
            diag[n - 1] -= 0.5 * k;
        }
        SymTridiag { diag, off: vec![-0.5 * k; n - 1] }
    }
}

fn grid_spectrum(grid: &FdGrid, vals: Vec<f64>, t: &SymTridiag) -> Result<LabeledSpectrum> {
    let vecs = t.eigenvectors_for(&vals)?;
    let h = grid.h();
    let scale = 1.0 / h.sqrt();
    let vectors = vecs
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * scale).collect())
        .collect();
    let entries = vals
        .iter()
        .enumerate()
        .map(|(index, &energy)| SpectralEntry { energy, label: StateLabel::Grid { index } })
        .collect();
    Ok(LabeledSpectrum {
        length: grid.length,
        entries,
        grid: Some(GridBasis {
            bc: grid.bc,
            spacing: h,
            nodes: FdGrid::nodes(grid.length, grid.points(), grid.bc),
            vectors,
        }),
        convention: CONVENTION,
    })
}

/// Lowest `num_eigs` eigenpairs of the three-point discretization.
pub fn fd_spectrum(grid: &FdGrid, num_eigs: usize) -> Result<LabeledSpectrum> {
    if num_eigs == 0 || num_eigs > grid.points() {
        return invalid("num_eigs", format!("must lie in 1..={}", grid.points()));
    }
    let t = grid.matrix();
    let vals = t.lowest_eigenvalues(num_eigs);
    grid_spectrum(grid, vals, &t)
}

/// All eigenpairs with energy ≤ cap.
pub fn fd_spectrum_below(grid: &FdGrid, cap: f64) -> Result<LabeledSpectrum> {
    let t = grid.matrix();
    let vals = t.eigenvalues_below(cap);
    if vals.is_empty() {
        return Err(Error::InvalidParameter {
            name: "energy_cap",
            reason: format!("no eigenvalue below {cap}"),
        });
    }
    grid_spectrum(grid, vals, &t)
}

pub fn fd_eigenvalues(grid: &FdGrid, num_eigs: usize) -> Vec<f64> {
    grid.matrix().lowest_eigenvalues(num_eigs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirringBound {
    pub bound: f64,
    /// second Neumann eigenvalue of the free discretized operator
    pub eps2: f64,
    /// [(1/V)∫(v+s)^{-1}]^{-1}
    pub harmonic: f64,
}

/// −s + min(ε₂^N, harmonic mean of v+s) on the grid of `grid`, whose
/// potential samples are read as cell values.
pub fn thirring_lower_bound(grid: &FdGrid, shift: f64) -> Result<ThirringBound> {
    if !(shift > 0.0 && shift.is_finite()) {
        return invalid("shift", "must be positive");
    }
    let free = FdGrid { length: grid.length, bc: BoundaryCondition::Neumann, potential: vec![0.0; grid.points()] };
    let eps2 = fd_eigenvalues(&free, 2)[1];
    let n = grid.points() as f64;
    let mean_inv = grid.potential.iter().map(|v| 1.0 / (v + shift)).sum::<f64>() / n;
    let harmonic = 1.0 / mean_inv;
    Ok(ThirringBound { bound: -shift + eps2.min(harmonic), eps2, harmonic })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRow {
    pub state: usize,
    pub energy: f64,
    /// |(φ_i, ψ_k)|² for k = 1..k_max
    pub squared: Vec<f64>,
    pub tail_bound: f64,
}

impl OverlapRow {
    pub fn partial_sum(&self) -> f64 {
        self.squared.iter().sum()
    }

    pub fn kinetic_energy_sum(&self, l: f64) -> f64 {
        self.squared
            .iter()
            .enumerate()
            .map(|(k, c)| kinetic_energy(k + 1, l) * c)
            .sum()
    }
}

/// Computes overlap rows of one spectrum against ψ_1..ψ_{k_max}.
pub struct OverlapEngine<'a> {
    spectrum: &'a LabeledSpectrum,
    k_max: usize,
    gamma_tail: f64,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl<'a> OverlapEngine<'a> {
    pub fn new(spectrum: &'a LabeledSpectrum, k_max: usize, gamma_tail: f64) -> Result<Self> {
        if !(gamma_tail > 0.0) {
            return invalid("gamma_tail", "must be positive");
        }
        let l = spectrum.length;
        let mut fft = None;
        if let Some(g) = &spectrum.grid {
            if g.bc != BoundaryCondition::Dirichlet {
                return invalid("spectrum", "grid overlaps need Dirichlet eigenvectors");
            }
            let n = g.nodes.len();
            if k_max > n {
                return invalid("k_max", format!("grid basis has only {n} modes"));
            }
            // discrete energy of the sampled sine mode k_max
            let s = (PI * k_max as f64 / (2.0 * (n + 1) as f64)).sin();
            if 2.0 * s * s / (g.spacing * g.spacing) < gamma_tail {
                return invalid("k_max", format!("discrete mode {k_max} lies below gamma_tail {gamma_tail}"));
            }
            fft = Some(FftPlanner::new().plan_fft_forward(2 * (n + 1)));
        } else if kinetic_energy(k_max, l) < gamma_tail {
            return invalid(
                "k_max",
                format!("epsilon_{k_max} = {} < gamma_tail {gamma_tail}", kinetic_energy(k_max, l)),
            );
        }
        Ok(Self { spectrum, k_max, gamma_tail, fft })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn row(&self, state: usize) -> Result<OverlapRow> {
        let entry = self
            .spectrum
            .entries
            .get(state)
            .ok_or_else(|| Error::Malformed(format!("no state {state}")))?;
        let squared = match entry.label {
            StateLabel::Ls { n, left, right, .. } => {
                ls_overlaps(left, right, n, self.spectrum.length, self.k_max)
            }
            StateLabel::Grid { index } => self.grid_overlaps(index),
        };
        Ok(OverlapRow {
            state,
            energy: entry.energy,
            squared,
            tail_bound: entry.energy.max(0.0) / self.gamma_tail,
        })
    }

    fn grid_overlaps(&self, index: usize) -> Vec<f64> {
        let g = self.spectrum.grid.as_ref().unwrap();
        let u = &g.vectors[index];
        let n = u.len();
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * (n + 1)];
        for (j, &x) in u.iter().enumerate() {
            buf[j + 1].re = x;
            buf[2 * (n + 1) - 1 - j].re = -x;
        }
        self.fft.as_ref().unwrap().process(&mut buf);
        let scale = g.spacing * (2.0 / self.spectrum.length).sqrt() * 0.5;
        (1..=self.k_max)
            .map(|k| {
                let a = -buf[k].im * scale;
                a * a
            })
            .collect()
    }
}

pub fn overlap_row(
    spectrum: &LabeledSpectrum,
    state: usize,
    k_max: usize,
    gamma_tail: f64,
) -> Result<OverlapRow> {
    OverlapEngine::new(spectrum, k_max, gamma_tail)?.row(state)
}

/// Unit phasor e^{i(k·w − φ)} for k = 0, 1, ... with periodic exact resync.
struct Phasor {
    w: f64,
    phi: f64,
    k: usize,
    re: f64,
    im: f64,
    step_re: f64,
    step_im: f64,
}

impl Phasor {
    const RESYNC: usize = 32;

    fn new(w: f64, phi: f64) -> Self {
        let (s, c) = (-phi).sin_cos();
        let (ss, sc) = w.sin_cos();
        Self { w, phi, k: 0, re: c, im: s, step_re: sc, step_im: ss }
    }

    fn advance(&mut self) {
        self.k += 1;
        if self.k % Self::RESYNC == 0 {
            let (s, c) = (self.k as f64 * self.w - self.phi).sin_cos();
            self.re = c;
            self.im = s;
        } else {
            let re = self.re * self.step_re - self.im * self.step_im;
            self.im = self.re * self.step_im + self.im * self.step_re;
            self.re = re;
        }
    }
}

/// Squared overlaps of the LS state n on [a, a+L] with ψ_1..ψ_K.
///
/// With p = nπ/L, q = kπ/l, m = a + L/2 + l/2 and d = (q−p)L/2,
/// (φ, ψ_k) = 2p√(L/l)/(p+q) · cos(qm − nπ/2) · sin(d)/d.
pub fn ls_overlaps(left: f64, right: f64, n: u32, l: f64, k_max: usize) -> Vec<f64> {
    let len = right - left;
    let p = n as f64 * PI / len;
    let m = left + 0.5 * len + 0.5 * l;
    let half_n = 0.5 * n as f64 * PI;
    let pref = 2.0 * p * (len / l).sqrt();
    let mut cosine = Phasor::new(PI * m / l, half_n);
    let mut sine = Phasor::new(0.5 * PI * len / l, half_n);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        cosine.advance();
        sine.advance();
        let q = k as f64 * PI / l;
        let d = 0.5 * (q - p) * len;
        let sinc = if d.abs() < 1e-9 { 1.0 - d * d / 6.0 } else { sine.im / d };
        let a = pref / (p + q) * cosine.re * sinc;
        out.push(a * a);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{interval_decomposition, ImpurityConfiguration, PoissonParams};
    use crate::numerics::integrate;

    fn decomp(l: f64, xs: Vec<f64>) -> IntervalDecomposition {
        let p = PoissonParams::new(1.0, l, 0).unwrap();
        interval_decomposition(&ImpurityConfiguration::from_positions(p, xs).unwrap())
    }

    #[test]
    fn single_interval_of_length_pi() {
        let s = ls_spectrum(&decomp(PI, vec![]), 2.0).unwrap();
        assert_eq!(s.energies(), vec![0.5, 2.0]);
    }

    #[test]
    fn empty_box_matches_kinetic_basis() {
        let l = 13.7;
        let s = ls_spectrum(&decomp(l, vec![]), 50.0).unwrap();
        let b = kinetic_basis(l, s.len()).unwrap();
        for (e, m) in s.entries.iter().zip(&b) {
            assert_eq!(e.energy, m.energy);
        }
        assert!(kinetic_energy(s.len() + 1, l) > 50.0);
    }

    #[test]
    fn interval_count_formula() {
        for &(len, e) in &[(3.3, 7.0), (10.0, 0.3), (1.0, 100.0)] {
            let s = ls_spectrum(&decomp(len, vec![]), e).unwrap();
            assert_eq!(s.len(), (len * (2.0f64 * e).sqrt() / PI).floor() as usize);
        }
    }

    #[test]
    fn kinetic_mode_normalization() {
        let l = PI;
        let b = kinetic_basis(l, 6).unwrap();
        assert_eq!(b[0].energy, 0.5);
        for j in [0usize, 2, 5] {
            for k in [0usize, 2, 5] {
                let q = integrate(|x| b[j].eval(x) * b[k].eval(x), -l / 2.0, l / 2.0, 1e-13, 0.0).unwrap();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((q.value - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn overlap_matches_quadrature() {
        let l = 40.0;
        let (a, b) = (-3.17, 2.4);
        for n in [1u32, 2, 7] {
            let row = ls_overlaps(a, b, n, l, 120);
            for k in [1usize, 9, 33, 34, 77, 120] {
                let q = integrate(
                    |x| ls_wavefunction(a, b, n, x) * KineticMode { k, length: l, energy: 0.0 }.eval(x),
                    a,
                    b,
                    1e-14,
                    0.0,
                )
                .unwrap();
                assert!((row[k - 1] - q.value * q.value).abs() < 1e-9, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn overlap_resonance_branch() {
        // L/l rational makes nπ/L = kπ/l exactly for some k
        let l = 30.0;
        let row = ls_overlaps(-15.0, -5.0, 2, l, 10);
        let q = integrate(
            |x| ls_wavefunction(-15.0, -5.0, 2, x) * KineticMode { k: 6, length: l, energy: 0.0 }.eval(x),
            -15.0,
            -5.0,
            1e-14,
            0.0,
        )
        .unwrap();
        assert!((row[5] - q.value * q.value).abs() < 1e-12);
    }

    #[test]
    fn whole_box_overlap_is_identity() {
        let l = 9.0;
        for n in 1..6u32 {
            let row = ls_overlaps(-4.5, 4.5, n, l, 8);
            for (k, c) in row.iter().enumerate() {
                let want = if k + 1 == n as usize { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn free_dirichlet_fd_converges_second_order() {
        let errs: Vec<f64> = [127usize, 255, 511]
            .iter()
            .map(|&n| {
                let g = FdGrid::new(1.0, BoundaryCondition::Dirichlet, vec![0.0; n]).unwrap();
                (fd_eigenvalues(&g, 1)[0] - PI * PI / 2.0).abs()
            })
            .collect();
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!((3.5..4.5).contains(&r1) && (3.5..4.5).contains(&r2), "{r1} {r2}");
    }

    #[test]
    fn constant_shift_and_neumann_zero() {
        let n = 100;
        let g0 = FdGrid::new(5.0, BoundaryCondition::Dirichlet, vec![0.0; n]).unwrap();
        let g1 = FdGrid::new(5.0, BoundaryCondition::Dirichlet, vec![0.75; n]).unwrap();
        let a = fd_eigenvalues(&g0, 5);
        let b = fd_eigenvalues(&g1, 5);
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 0.75).abs() < 1e-11);
        }
        let gn = FdGrid::new(1.0, BoundaryCondition::Neumann, vec![0.0; 64]).unwrap();
        assert!(fd_eigenvalues(&gn, 1)[0].abs() < 1e-10);
    }

    #[test]
    fn fd_rejects_bad_potential() {
        assert!(FdGrid::new(1.0, BoundaryCondition::Dirichlet, vec![0.0; 10]).is_err());
        let mut v = vec![0.0; 64];
        v[3] = -1.0;
        assert!(FdGrid::new(1.0, BoundaryCondition::Dirichlet, v.clone()).is_err());
        v[3] = f64::NAN;
        assert!(FdGrid::new(1.0, BoundaryCondition::Dirichlet, v).is_err());
    }

    #[test]
    fn grid_rows_are_complete() {
        let n = 127;
        let g = FdGrid::from_fn(10.0, n, BoundaryCondition::Dirichlet, |x| 0.3 * x * x).unwrap();
        let s = fd_spectrum(&g, 10).unwrap();
        let eng = OverlapEngine::new(&s, n, 1.0).unwrap();
        for i in 0..10 {
            let row = eng.row(i).unwrap();
            assert!((row.partial_sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn free_grid_vectors_are_sampled_sines() {
        let n = 99;
        let l = 4.0;
        let g = FdGrid::new(l, BoundaryCondition::Dirichlet, vec![0.0; n]).unwrap();
        let s = fd_spectrum(&g, 3).unwrap();
        let row = overlap_row(&s, 2, n, 1.0).unwrap();
        assert!((row.squared[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn thirring_constant_potential() {
        let c = 0.4;
        let g = FdGrid::new(10.0, BoundaryCondition::Neumann, vec![c; 128]).unwrap();
        let t = thirring_lower_bound(&g, 0.2).unwrap();
        assert!((t.harmonic - (c + 0.2)).abs() < 1e-12);
        assert!((t.bound - (-0.2 + t.eps2.min(c + 0.2))).abs() < 1e-12);
        assert!(fd_eigenvalues(&g, 1)[0] >= t.bound);
        let z = FdGrid::new(10.0, BoundaryCondition::Neumann, vec![0.0; 128]).unwrap();
        assert!(thirring_lower_bound(&z, 0.2).unwrap().bound <= 0.0);
        assert!(thirring_lower_bound(&z, 0.0).is_err());
    }

    #[test]
    fn k_max_must_reach_gamma() {
        let s = ls_spectrum(&decomp(10.0, vec![1.0]), 5.0).unwrap();
        assert!(overlap_row(&s, 0, 3, 10.0).is_err());
        let k = required_k_max(10.0, 10.0);
        assert!(overlap_row(&s, 0, k, 10.0).is_ok());
    }
}
