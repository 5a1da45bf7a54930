//! Poisson impurity configurations on the box (−l/2, l/2) and the interval
//! decomposition they induce.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::numerics::{self, ks_critical_1pct, ks_statistic, median, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonParams {
    /// impurities per unit length
    pub intensity: f64,
    /// full box length l
    pub length: f64,
    pub seed: u64,
}

impl PoissonParams {
    pub fn new(intensity: f64, length: f64, seed: u64) -> Result<Self> {
        let p = Self { intensity, length, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("intensity", self.intensity)?;
        ensure_finite("length", self.length)?;
        if self.intensity < 0.0 {
            return invalid("intensity", "must be nonnegative");
        }
        if self.length <= 0.0 {
            return invalid("length", "must be positive");
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpurityConfiguration {
    positions: Vec<f64>,
    params: PoissonParams,
}

impl ImpurityConfiguration {
    /// Build from explicit positions, which must be strictly increasing and
    /// inside the open box.
    pub fn from_positions(params: PoissonParams, positions: Vec<f64>) -> Result<Self> {
        params.validate()?;
        let h = params.half_length();
        if positions.iter().any(|&x| !(x > -h && x < h)) {
            return Err(Error::Malformed("impurity outside the open box".into()));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Malformed("positions not strictly increasing".into()));
        }
        Ok(Self { positions, params })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn params(&self) -> &PoissonParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Distance from the box centre to the first impurity on its right.
    pub fn nearest_right_of_center(&self) -> Option<f64> {
        let i = self.positions.partition_point(|&x| x <= 0.0);
        self.positions.get(i).copied()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        writeln!(s, "# lambda = {:.16e}", p.intensity).unwrap();
        writeln!(s, "# length = {:.16e}", p.length).unwrap();
        writeln!(s, "# seed = {}", p.seed).unwrap();
        for x in &self.positions {
            writeln!(s, "{x:.16e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lambda = None;
        let mut length = None;
        let mut seed = None;
        let mut positions = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Malformed(format!("bad header line `{line}`")))?;
                let v = v.trim();
                let bad = |_| Error::Malformed(format!("bad header value `{v}`"));
                match k.trim() {
                    "lambda" => lambda = Some(v.parse::<f64>().map_err(bad)?),
                    "length" => length = Some(v.parse::<f64>().map_err(bad)?),
                    "seed" => {
                        seed = Some(v.parse::<u64>().map_err(|_| {
                            Error::Malformed(format!("bad seed `{v}`"))
                        })?)
                    }
                    other => return Err(Error::Malformed(format!("unknown header `{other}`"))),
                }
            } else {
                positions.push(
                    line.parse::<f64>()
                        .map_err(|_| Error::Malformed(format!("bad position `{line}`")))?,
                );
            }
        }
        let missing = |k: &str| Error::Malformed(format!("missing header `{k}`"));
        let params = PoissonParams::new(
            lambda.ok_or_else(|| missing("lambda"))?,
            length.ok_or_else(|| missing("length"))?,
            seed.ok_or_else(|| missing("seed"))?,
        )?;
        Self::from_positions(params, positions)
    }
}

/// Count-then-uniform sampling of the Poisson set.
pub fn sample_poisson_configuration(params: PoissonParams) -> Result<ImpurityConfiguration> {
    params.validate()?;
    let mut rng = rng_from_seed(params.seed);
    let mean = params.intensity * params.length;
    let count = if mean > 0.0 {
        let d = Poisson::new(mean)
            .map_err(|e| Error::InvalidParameter { name: "intensity", reason: e.to_string() })?;
        d.sample(&mut rng) as usize
    } else {
        0
    };
    let h = params.half_length();
    let mut positions = Vec::with_capacity(count);
    while positions.len() < count {
        let u: f64 = rng.random();
        let x = -h + u * params.length;
        if x > -h && x < h {
            positions.push(x);
        }
    }
    positions.sort_by(f64::total_cmp);
    let before = positions.len();
    positions.dedup();
    if positions.len() != before {
        log::warn!(
            "seed {}: dropped {} coincident impurity positions",
            params.seed,
            before - positions.len()
        );
    }
    Ok(ImpurityConfiguration { positions, params })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    DirichletDirichlet,
    EdgeLeft,
    EdgeRight,
    WholeBox,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::DirichletDirichlet => "dirichlet-dirichlet",
            BoundaryKind::EdgeLeft => "edge-left",
            BoundaryKind::EdgeRight => "edge-right",
            BoundaryKind::WholeBox => "whole-box",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
    pub kind: BoundaryKind,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.right - self.left
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDecomposition {
    pub intervals: Vec<Interval>,
    pub length: f64,
}

impl IntervalDecomposition {
    pub fn lengths(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::len).collect()
    }

    pub fn max_gap(&self) -> f64 {
        self.intervals.iter().map(Interval::len).fold(0.0, f64::max)
    }

    /// Lengths of intervals bounded by impurities on both sides.
    pub fn interior_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.intervals
            .iter()
            .filter(|i| i.kind == BoundaryKind::DirichletDirichlet)
            .map(Interval::len)
    }
}

pub fn interval_decomposition(config: &ImpurityConfiguration) -> IntervalDecomposition {
    let h = config.params.half_length();
    let xs = &config.positions;
    let mut intervals = Vec::with_capacity(xs.len() + 1);
    if xs.is_empty() {
        intervals.push(Interval { left: -h, right: h, kind: BoundaryKind::WholeBox });
    } else {
        intervals.push(Interval { left: -h, right: xs[0], kind: BoundaryKind::EdgeLeft });
        for w in xs.windows(2) {
            intervals.push(Interval {
                left: w[0],
                right: w[1],
                kind: BoundaryKind::DirichletDirichlet,
            });
        }
        intervals.push(Interval {
            left: xs[xs.len() - 1],
            right: h,
            kind: BoundaryKind::EdgeRight,
        });
    }
    IntervalDecomposition { intervals, length: config.params.length }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// (bin_lo, bin_hi, count) over interior gap lengths
    pub histogram: Vec<(f64, f64, usize)>,
    pub interior_count: usize,
    /// KS distance of interior gaps to Exponential(λ); None without interior gaps
    pub ks_distance: Option<f64>,
    pub ks_critical: Option<f64>,
    pub max_gaps: Vec<f64>,
    pub median_max_gap: f64,
    /// (κ/λ)·ln l
    pub log_bound: f64,
}

impl GapReport {
    pub fn ks_pass(&self) -> bool {
        matches!((self.ks_distance, self.ks_critical), (Some(d), Some(c)) if d < c)
    }
}

pub const MIN_GAP_REALIZATIONS: usize = 30;

pub fn gap_statistics(
    ensemble: &[IntervalDecomposition],
    intensity: f64,
    kappa: f64,
) -> Result<GapReport> {
    if ensemble.len() < MIN_GAP_REALIZATIONS {
        return Err(Error::InsufficientSample {
            needed: MIN_GAP_REALIZATIONS,
            got: ensemble.len(),
        });
    }
    let l = ensemble[0].length;
    if ensemble.iter().any(|d| d.length != l) {
        return Err(Error::Malformed("mixed box lengths in ensemble".into()));
    }
    let gaps: Vec<f64> = ensemble.iter().flat_map(|d| d.interior_lengths()).collect();
    let max_gaps: Vec<f64> = ensemble.iter().map(IntervalDecomposition::max_gap).collect();
    let (ks_distance, ks_critical) = if gaps.is_empty() || intensity <= 0.0 {
        (None, None)
    } else {
        let d = ks_statistic(&gaps, |b| -(-intensity * b).exp_m1());
        (Some(d), Some(ks_critical_1pct(gaps.len())))
    };
    let nbins = 40;
    let top = gaps.iter().copied().fold(0.0, f64::max);
    let mut histogram = Vec::new();
    if top > 0.0 {
        let w = top / nbins as f64;
        let mut counts = vec![0usize; nbins];
        for g in &gaps {
            counts[((g / w) as usize).min(nbins - 1)] += 1;
        }
        histogram = counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (i as f64 * w, (i + 1) as f64 * w, c))
            .collect();
    }
    Ok(GapReport {
        histogram,
        interior_count: gaps.len(),
        ks_distance,
        ks_critical,
        median_max_gap: median(&max_gaps),
        max_gaps,
        log_bound: if intensity > 0.0 { kappa / intensity * l.ln() } else { f64::INFINITY },
    })
}

/// Configurations for realizations 0..count under a master seed.
pub fn sample_ensemble(
    intensity: f64,
    length: f64,
    master_seed: u64,
    count: usize,
) -> Result<Vec<ImpurityConfiguration>> {
    (0..count as u64)
        .map(|i| {
            sample_poisson_configuration(PoissonParams::new(
                intensity,
                length,
                numerics::derive_seed(master_seed, i),
            )?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(lambda: f64, l: f64, seed: u64) -> PoissonParams {
        PoissonParams::new(lambda, l, seed).unwrap()
    }

    #[test]
    fn zero_intensity_is_empty() {
        let c = sample_poisson_configuration(params(0.0, 123.0, 9)).unwrap();
        assert!(c.is_empty());
        let d = interval_decomposition(&c);
        assert_eq!(d.intervals.len(), 1);
        assert_eq!(d.intervals[0].kind, BoundaryKind::WholeBox);
        assert_eq!(d.max_gap(), 123.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PoissonParams::new(f64::NAN, 1.0, 0).is_err());
        assert!(PoissonParams::new(1.0, f64::INFINITY, 0).is_err());
        assert!(PoissonParams::new(-1.0, 1.0, 0).is_err());
        assert!(PoissonParams::new(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn two_impurities_in_box_of_four() {
        let c = ImpurityConfiguration::from_positions(params(1.0, 4.0, 0), vec![-1.0, 1.0]).unwrap();
        let d = interval_decomposition(&c);
        assert_eq!(d.lengths(), vec![1.0, 2.0, 1.0]);
        let kinds: Vec<_> = d.intervals.iter().map(|i| i.kind).collect();
        assert_eq!(
            kinds,
            vec![BoundaryKind::EdgeLeft, BoundaryKind::DirichletDirichlet, BoundaryKind::EdgeRight]
        );
    }

    #[test]
    fn empty_box_of_four() {
        let c = ImpurityConfiguration::from_positions(params(1.0, 4.0, 0), vec![]).unwrap();
        let d = interval_decomposition(&c);
        assert_eq!(d.lengths(), vec![4.0]);
    }

    #[test]
    fn text_round_trip() {
        let c = sample_poisson_configuration(params(0.7, 31.0, 42)).unwrap();
        let back = ImpurityConfiguration::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(ImpurityConfiguration::from_text("# lambda = 1\n0.0\n").is_err());
    }

    #[test]
    fn gap_statistics_needs_thirty() {
        let e: Vec<_> = (0..10)
            .map(|s| interval_decomposition(&sample_poisson_configuration(params(1.0, 50.0, s)).unwrap()))
            .collect();
        assert!(matches!(
            gap_statistics(&e, 1.0, 4.5),
            Err(Error::InsufficientSample { needed: 30, got: 10 })
        ));
    }

    proptest! {
        #[test]
        fn tiling_and_determinism(lambda in 0.0f64..5.0, l in 0.5f64..300.0, seed in any::<u64>()) {
            let p = params(lambda, l, seed);
            let a = sample_poisson_configuration(p).unwrap();
            let b = sample_poisson_configuration(p).unwrap();
            prop_assert_eq!(&a, &b);
            let d = interval_decomposition(&a);
            prop_assert_eq!(d.intervals.len(), a.len() + 1);
            prop_assert_eq!(d.intervals[0].left, -l / 2.0);
            prop_assert_eq!(d.intervals.last().unwrap().right, l / 2.0);
            for w in d.intervals.windows(2) {
                prop_assert_eq!(w[0].right, w[1].left);
                prop_assert!(w[0].left < w[0].right);
            }
            let total: f64 = d.lengths().iter().sum();
            prop_assert!((total - l).abs() <= 1e-12 * l);
        }
    }
}
