//! Brownian-bridge Monte Carlo for the limiting Luttinger-Sy formulas: the
//! Laplace transform f(t), the function g(k), the density F(ε), and bridge
//! exit probabilities.
//!
//! A term of duration T = nβ and endpoint x is driven by one standard bridge
//! α on [0, 1] through ξ(τ) = (τ/T)x + √T·α(τ/T), so its range is
//! √T·R_α(x/√T) with R_α(u) = max_s(su + α(s)) − min_s(su + α(s)). The same
//! α therefore serves every n and every endpoint.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::numerics::{derive_seed, gauss_hermite, linear_fit, rng_from_seed, summarize, LineFit, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSample {
    pub duration: f64,
    pub start: f64,
    pub end: f64,
    /// values on the uniform grid, endpoints included
    pub path: Vec<f64>,
}

impl BridgeSample {
    pub fn n_steps(&self) -> usize {
        self.path.len() - 1
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .path
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        hi - lo
    }

    /// Whether a grid point leaves (−l/2, l/2).
    pub fn exits(&self, l: f64) -> bool {
        let h = 0.5 * l;
        self.path.iter().any(|&x| x <= -h || x >= h)
    }
}

/// Standard bridge on n_steps uniform intervals of [0, 1] by sequential
/// Gaussian conditioning; both ends are exactly zero.
fn unit_bridge(n_steps: usize, rng: &mut Rng, out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let dt = 1.0 / n_steps as f64;
    let mut a = 0.0;
    for j in 0..n_steps - 1 {
        // remaining time before and after the step
        let r0 = 1.0 - j as f64 * dt;
        let r1 = 1.0 - (j + 1) as f64 * dt;
        let z: f64 = StandardNormal.sample(rng);
        a = a * (r1 / r0) + (dt * r1 / r0).sqrt() * z;
        out.push(a);
    }
    out.push(0.0);
}

pub fn sample_bridge(duration: f64, start: f64, end: f64, n_steps: usize, seed: u64) -> Result<BridgeSample> {
    if !(duration > 0.0 && duration.is_finite()) {
        return invalid("duration", "must be positive");
    }
    if n_steps < 2 {
        return invalid("n_steps", "must be at least 2");
    }
    let mut rng = rng_from_seed(seed);
    let mut alpha = Vec::with_capacity(n_steps + 1);
    unit_bridge(n_steps, &mut rng, &mut alpha);
    let sd = duration.sqrt();
    let mut path: Vec<f64> = alpha
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let s = j as f64 / n_steps as f64;
            start + s * (end - start) + sd * a
        })
        .collect();
    path[0] = start;
    path[n_steps] = end;
    Ok(BridgeSample { duration, start, end, path })
}

/// Upper and lower convex hulls of the points (s_j, α_j).
#[derive(Debug, Clone)]
struct RangeHull {
    upper: Vec<(f64, f64)>,
    lower: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl RangeHull {
    /// Hull of every `stride`-th grid point of a bridge with n_steps intervals.
    fn new(alpha: &[f64], stride: usize) -> Self {
        let n = alpha.len() - 1;
        let pts = (0..=n).step_by(stride).map(|j| (j as f64 / n as f64, alpha[j]));
        let mut upper: Vec<(f64, f64)> = Vec::new();
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) >= 0.0 {
                upper.pop();
            }
            upper.push(p);
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        Self { upper, lower }
    }

    fn range(&self, u: f64) -> f64 {
        let hi = self.upper.iter().map(|p| p.0 * u + p.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.lower.iter().map(|p| p.0 * u + p.1).fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// R(u) for ascending `us`. The maximizer on the upper hull moves right
    /// as u grows, the minimizer on the lower hull moves left.
    fn ranges_sorted(&self, us: &[f64], out: &mut [f64]) {
        let up = &self.upper;
        let lo = &self.lower;
        let mut i = 0;
        let mut k = lo.len() - 1;
        for (u, r) in us.iter().zip(out.iter_mut()) {
            while i + 1 < up.len() && up[i + 1].0 * u + up[i + 1].1 >= up[i].0 * u + up[i].1 {
                i += 1;
            }
            while k > 0 && lo[k - 1].0 * u + lo[k - 1].1 <= lo[k].0 * u + lo[k].1 {
                k -= 1;
            }
            *r = (up[i].0 * u + up[i].1) - (lo[k].0 * u + lo[k].1);
        }
    }

    /// min_u R(u) by golden section; R is convex with R(u) ≥ |u|.
    fn min_range(&self) -> f64 {
        let r0 = self.range(0.0);
        let (mut a, mut b) = (-r0, r0);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.range(c), self.range(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.range(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.range(d);
            }
        }
        fc.min(fd).min(r0)
    }
}

/// Refinement levels used for the range functional: n/4, n/2, n steps.
pub const LEVELS: usize = 3;

fn level_hulls(alpha: &[f64]) -> [RangeHull; LEVELS] {
    [RangeHull::new(alpha, 4), RangeHull::new(alpha, 2), RangeHull::new(alpha, 1)]
}

/// √Δt extrapolation from a level and the level with half the spacing.
#[inline]
fn extrapolate(coarse: f64, fine: f64) -> f64 {
    fine + (fine - coarse) / (SQRT_2 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    /// finest grid; the coarser levels use n_steps/2 and n_steps/4
    pub n_steps: usize,
    pub seed: u64,
    /// batches for batch-means standard errors
    pub batches: usize,
    /// relative tolerance of the n-truncation certificate
    pub tol: f64,
    pub n_cap: usize,
    pub hermite_nodes: usize,
    /// trapezoid grid for the g(k) integral in u = x/√(nβ)
    pub u_max: f64,
    pub u_step: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            n_steps: 1024,
            seed: 1,
            batches: 20,
            tol: 1e-10,
            n_cap: 20_000,
            hermite_nodes: 48,
            u_max: 8.0,
            u_step: 0.05,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 8 || self.n_steps % 4 != 0 {
            return invalid("n_steps", "must be a multiple of 4, at least 8");
        }
        if self.batches < 2 || self.paths < self.batches {
            return invalid("paths", "need at least two batches with one path each");
        }
        if !(self.tol > 0.0) {
            return invalid("tol", "must be positive");
        }
        if self.hermite_nodes < 4 {
            return invalid("hermite_nodes", "need at least 4");
        }
        if !(self.u_max > 0.0 && self.u_step > 0.0 && self.u_step < self.u_max) {
            return invalid("u_step", "need 0 < u_step < u_max");
        }
        Ok(())
    }

    fn batch_paths(&self, b: usize) -> std::ops::Range<usize> {
        let per = self.paths / self.batches;
        let extra = self.paths % self.batches;
        let start = b * per + b.min(extra);
        start..start + per + usize::from(b < extra)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkParams {
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl FkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid("beta", "must be positive");
        }
        if !(self.mu <= 0.0 && self.mu.is_finite()) {
            return invalid("mu", "must be finite and nonpositive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return invalid("lambda", "must be finite and nonnegative");
        }
        if self.lambda == 0.0 && self.mu == 0.0 {
            return Err(Error::NonConvergent("n-series diverges for lambda = 0 at mu = 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub n_max: usize,
    /// bound on the neglected tail of the sample-mean estimator
    pub remainder_bound: f64,
    /// lower bound on the full sum used as the reference scale
    pub reference: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TailShape {
    /// n^{-1/2} prefactor (Laplace transform)
    HalfPower,
    /// no n-dependence in the prefactor (g(k))
    Flat,
}

/// Σ_{n>N} e^{nβμ}·p(n)·e^{−c√n} for one sample with c = λ√β·r.
fn tail_bound(p: &FkParams, shape: TailShape, n: usize, c: f64) -> f64 {
    let nf = n as f64;
    let q = (p.beta * p.mu).exp();
    let pref = |m: f64| match shape {
        TailShape::HalfPower => (2.0 * PI * m * p.beta).powf(-0.5),
        TailShape::Flat => (2.0 * PI).powf(-0.5),
    };
    let geo = if p.mu < 0.0 {
        q.powf(nf + 1.0) / (1.0 - q) * pref(nf + 1.0)
    } else {
        f64::INFINITY
    };
    let int = if c > 0.0 {
        let e = (-c * nf.sqrt()).exp();
        match shape {
            TailShape::HalfPower => (2.0 * PI * p.beta).powf(-0.5) * 2.0 / c * e,
            TailShape::Flat => (2.0 * PI).powf(-0.5) * 2.0 / (c * c) * (1.0 + c * nf.sqrt()) * e,
        }
    } else {
        f64::INFINITY
    };
    geo.min(int)
}

/// Extrapolation can amplify a level's truncation error by this factor.
const EXTRAPOLATION_GAIN: f64 = 1.0 + 1.0 / (SQRT_2 - 1.0);

fn choose_n_max(
    p: &FkParams,
    shape: TailShape,
    min_ranges: &[f64],
    reference: f64,
    mc: &McConfig,
) -> Result<Truncation> {
    let mean_tail = |n: usize| {
        let s: f64 = min_ranges
            .iter()
            .map(|r| tail_bound(p, shape, n, p.lambda * p.beta.sqrt() * r))
            .sum();
        EXTRAPOLATION_GAIN * s / min_ranges.len() as f64
    };
    let target = mc.tol * reference;
    let mut hi = 1;
    while mean_tail(hi) > target {
        hi *= 2;
        if hi > mc.n_cap {
            if mean_tail(mc.n_cap) <= target {
                hi = mc.n_cap;
                break;
            }
            return Err(Error::NonConvergent(format!(
                "n-truncation certificate needs more than {} terms (tail {:e} vs target {:e})",
                mc.n_cap,
                mean_tail(mc.n_cap),
                target
            )));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if mean_tail(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let n_max = hi.max(1);
    Ok(Truncation { n_max, remainder_bound: mean_tail(n_max), reference, tol: mc.tol })
}

/// Per-path pilot: min_u R_α(u) at the coarsest level, and R_α(0) at all levels.
fn pilot(mc: &McConfig) -> (Vec<f64>, Vec<[f64; LEVELS]>) {
    let out: Vec<(f64, [f64; LEVELS])> = (0..mc.paths)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let mut rng = rng_from_seed(derive_seed(mc.seed, i as u64));
            unit_bridge(mc.n_steps, &mut rng, buf);
            let h = level_hulls(buf);
            let r0 = [h[0].range(0.0), h[1].range(0.0), h[2].range(0.0)];
            (h[0].min_range(), r0)
        })
        .collect();
    out.into_iter().unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub steps: [usize; LEVELS],
    pub values: [f64; LEVELS],
    /// extrapolations from levels (0,1) and (1,2)
    pub extrapolated: [f64; 2],
    /// |extrapolated[1] − extrapolated[0]| < SE/2
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkEstimate {
    pub value: f64,
    pub se: f64,
    pub n_max: usize,
    /// (n, term, term_se)
    pub terms: Vec<(usize, f64, f64)>,
    pub refinement: Refinement,
    pub truncation: Truncation,
}

impl FkEstimate {
    pub fn terms_csv(&self) -> String {
        let mut s = String::from("n,term,term_se\n");
        for (n, t, se) in &self.terms {
            writeln!(s, "{n},{t:.16e},{se:.16e}").unwrap();
        }
        s
    }
}

fn refinement(steps: usize, values: [f64; LEVELS], se: f64) -> Refinement {
    let extrapolated = [extrapolate(values[0], values[1]), extrapolate(values[1], values[2])];
    Refinement {
        steps: [steps / 4, steps / 2, steps],
        values,
        extrapolated,
        converged: (extrapolated[1] - extrapolated[0]).abs() < 0.5 * se || se == 0.0 && extrapolated[1] == extrapolated[0],
    }
}

/// Above this exponent a weight e^{−a} is dropped (below 1e−15 relative).
const WEIGHT_CUT: f64 = 36.0;

/// f(t) = Σ_n e^{nβμ} ∫dx e^{−x²(1/2nβ+1/2t)}/(4π²tnβ)^{1/2} E[e^{−λ·range}].
pub fn ls_laplace_transform(t: f64, params: FkParams, mc: &McConfig) -> Result<FkEstimate> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid("t", "must be positive");
    }
    params.validate()?;
    mc.validate()?;
    let (y, w) = gauss_hermite(mc.hermite_nodes);
    let w_norm: Vec<f64> = w.iter().map(|x| x / PI.sqrt()).collect();
    let beta = params.beta;
    let prefactor = |n: usize| {
        let nf = n as f64;
        (nf * beta * params.mu).exp() / (2.0 * PI * (nf * beta + t)).sqrt()
    };
    if params.lambda == 0.0 {
        // the weight is identically one, so the estimator has no variance
        let trunc = choose_n_max(&params, TailShape::HalfPower, &[0.0], prefactor(1), mc)?;
        let terms: Vec<(usize, f64, f64)> = (1..=trunc.n_max).map(|n| (n, prefactor(n), 0.0)).collect();
        let value = terms.iter().map(|x| x.1).sum();
        return Ok(FkEstimate {
            value,
            se: 0.0,
            n_max: trunc.n_max,
            terms,
            refinement: refinement(mc.n_steps, [value; LEVELS], 0.0),
            truncation: trunc,
        });
    }
    let (min_ranges, r0) = pilot(mc);
    // term n = 1 at x = 0 bounds the sum from below only loosely; use the
    // full Gaussian average of term 1 instead, which is a genuine lower bound
    let reference = prefactor(1)
        * r0.iter().map(|r| (-params.lambda * beta.sqrt() * r[0].max(0.0) * 4.0).exp()).sum::<f64>()
        / r0.len() as f64;
    let trunc = choose_n_max(&params, TailShape::HalfPower, &min_ranges, reference.max(f64::MIN_POSITIVE), mc)?;
    let n_max = trunc.n_max;
    let sq: Vec<f64> = (1..=n_max).map(|n| params.lambda * (n as f64 * beta).sqrt()).collect();
    let scale: Vec<f64> = (1..=n_max).map(|n| (2.0 * t / (t + n as f64 * beta)).sqrt()).collect();
    // per batch: level sums of E-weights per n
    let batches: Vec<Vec<[f64; LEVELS]>> = (0..mc.batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![[0.0; LEVELS]; n_max];
            let mut buf = Vec::new();
            let mut us = vec![0.0; y.len()];
            let mut rs = vec![0.0; y.len()];
            for i in mc.batch_paths(b) {
                let mut rng = rng_from_seed(derive_seed(mc.seed, i as u64));
                unit_bridge(mc.n_steps, &mut rng, &mut buf);
                let hulls = level_hulls(&buf);
                for (lv, hull) in hulls.iter().enumerate() {
                    for n in 0..n_max {
                        for (u, yy) in us.iter_mut().zip(&y) {
                            *u = scale[n] * yy;
                        }
                        hull.ranges_sorted(&us, &mut rs);
                        let mut s = 0.0;
                        for (r, wj) in rs.iter().zip(&w_norm) {
                            let a = sq[n] * r;
                            if a < WEIGHT_CUT {
                                s += wj * (-a).exp();
                            }
                        }
                        acc[n][lv] += s;
                    }
                }
            }
            let cnt = mc.batch_paths(b).len() as f64;
            acc.iter_mut().for_each(|a| a.iter_mut().for_each(|x| *x /= cnt));
            acc
        })
        .collect();
    let nb = mc.batches as f64;
    let weights: Vec<f64> = (0..mc.batches).map(|b| mc.batch_paths(b).len() as f64 / mc.paths as f64).collect();
    let mut terms = Vec::with_capacity(n_max);
    let mut batch_totals = vec![0.0; mc.batches];
    let mut levels = [0.0; LEVELS];
    for n in 0..n_max {
        let pf = prefactor(n + 1);
        let per_batch: Vec<f64> = batches.iter().map(|a| pf * extrapolate(a[n][1], a[n][2])).collect();
        for (tot, v) in batch_totals.iter_mut().zip(&per_batch) {
            *tot += v;
        }
        for lv in 0..LEVELS {
            levels[lv] += pf * batches.iter().zip(&weights).map(|(a, wb)| wb * a[n][lv]).sum::<f64>();
        }
        let mean: f64 = per_batch.iter().zip(&weights).map(|(v, wb)| v * wb).sum();
        let se = summarize(&per_batch).se * (nb / mc.batches as f64);
        terms.push((n + 1, mean, se));
    }
    let value: f64 = batch_totals.iter().zip(&weights).map(|(v, wb)| v * wb).sum();
    let se = summarize(&batch_totals).se;
    Ok(FkEstimate { value, se, n_max, terms, refinement: refinement(mc.n_steps, levels, se), truncation: trunc })
}

/// Monte Carlo table of E[e^{−λ√(nβ)R_α(u_j)}] on the symmetric u grid,
/// from which g(k) and F(ε) follow for any k.
#[derive(Debug, Clone)]
pub struct GTable {
    pub params: FkParams,
    pub u: Vec<f64>,
    pub u_step: f64,
    pub n_max: usize,
    pub truncation: Truncation,
    pub steps: usize,
    /// per batch, extrapolated table [j][n]
    batch_ext: Vec<Vec<f64>>,
    batch_weight: Vec<f64>,
    /// path-averaged tables per refinement level, [j][n]
    level: [Vec<f64>; LEVELS],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

pub fn build_g_table(params: FkParams, mc: &McConfig) -> Result<GTable> {
    params.validate()?;
    mc.validate()?;
    let half = (mc.u_max / mc.u_step).round() as usize;
    let u: Vec<f64> = (0..=2 * half).map(|j| (j as f64 - half as f64) * mc.u_step).collect();
    let nu = u.len();
    let beta = params.beta;
    let lam = params.lambda;
    // g(0) ≥ (2π)^{-1/2}·e^{βμ}·E[e^{−λ√β R(u)}] averaged over the Gaussian
    // in u; R(u) ≤ R(0) + |u| gives a cheap lower bound for the reference
    let (min_ranges, r0) = if lam > 0.0 { pilot(mc) } else { (vec![0.0], vec![[0.0; LEVELS]]) };
    let gauss_lower: f64 = {
        let mean_r0 = r0.iter().map(|r| r[0]).sum::<f64>() / r0.len() as f64;
        let q = crate::numerics::integrate(
            |v| (-0.5 * v * v - lam * beta.sqrt() * (mean_r0 + v.abs())).exp(),
            -mc.u_max,
            mc.u_max,
            1e-14,
            1e-10,
        )?;
        // Jensen: E[e^{−cR}] ≥ e^{−c·E[R]}
        (2.0 * PI).recip() * (beta * params.mu).exp() * q.value
    };
    let trunc = choose_n_max(&params, TailShape::Flat, &min_ranges, gauss_lower, mc)?;
    let n_max = trunc.n_max;
    let sq: Vec<f64> = (1..=n_max).map(|n| lam * (n as f64 * beta).sqrt()).collect();
    let paths_w: Vec<f64> = (0..mc.batches).map(|b| mc.batch_paths(b).len() as f64 / mc.paths as f64).collect();
    let mut level: [Vec<f64>; LEVELS] = [vec![0.0; nu * n_max], vec![0.0; nu * n_max], vec![0.0; nu * n_max]];
    let mut batch_ext = Vec::with_capacity(mc.batches);
    if lam == 0.0 {
        for lv in level.iter_mut() {
            lv.iter_mut().for_each(|x| *x = 1.0);
        }
        batch_ext = vec![vec![1.0; nu * n_max]; mc.batches];
    } else {
        let group = rayon::current_num_threads().max(1);
        for chunk in (0..mc.batches).collect::<Vec<_>>().chunks(group) {
            let results: Vec<[Vec<f64>; LEVELS]> = chunk
                .par_iter()
                .map(|&b| {
                    let mut acc: [Vec<f64>; LEVELS] = [vec![0.0; nu * n_max], vec![0.0; nu * n_max], vec![0.0; nu * n_max]];
                    let mut buf = Vec::new();
                    let mut rs = vec![0.0; nu];
                    for i in mc.batch_paths(b) {
                        let mut rng = rng_from_seed(derive_seed(mc.seed, i as u64));
                        unit_bridge(mc.n_steps, &mut rng, &mut buf);
                        for (lv, hull) in level_hulls(&buf).iter().enumerate() {
                            hull.ranges_sorted(&u, &mut rs);
                            let table = &mut acc[lv];
                            for (j, &r) in rs.iter().enumerate() {
                                let row = &mut table[j * n_max..(j + 1) * n_max];
                                for (cell, s) in row.iter_mut().zip(&sq) {
                                    let a = s * r;
                                    if a >= WEIGHT_CUT {
                                        break;
                                    }
                                    *cell += (-a).exp();
                                }
                            }
                        }
                    }
                    let cnt = mc.batch_paths(b).len() as f64;
                    for t in acc.iter_mut() {
                        t.iter_mut().for_each(|x| *x /= cnt);
                    }
                    acc
                })
                .collect();
            for (b, acc) in chunk.iter().zip(results) {
                let wb = paths_w[*b];
                for lv in 0..LEVELS {
                    level[lv].iter_mut().zip(&acc[lv]).for_each(|(a, x)| *a += wb * x);
                }
                batch_ext.push(acc[1].iter().zip(&acc[2]).map(|(c, f)| extrapolate(*c, *f)).collect());
            }
        }
    }
    Ok(GTable {
        params,
        u,
        u_step: mc.u_step,
        n_max,
        truncation: trunc,
        steps: mc.n_steps,
        batch_ext,
        batch_weight: paths_w,
        level,
    })
}

impl GTable {
    /// (2π)^{-1} Σ_n e^{nβμ} Σ_j h e^{−u_j²/2} cos(k√(nβ)u_j) table[j][n].
    fn contract(&self, k: f64, table: &[f64]) -> f64 {
        let n_max = self.n_max;
        let beta = self.params.beta;
        let mut total = 0.0;
        for n in 0..n_max {
            let omega = k * ((n + 1) as f64 * beta).sqrt();
            let damp = ((n + 1) as f64 * beta * self.params.mu).exp();
            let mut s = 0.0;
            for (j, &u) in self.u.iter().enumerate() {
                let v = table[j * n_max + n];
                if v != 0.0 {
                    s += (-0.5 * u * u).exp() * (omega * u).cos() * v;
                }
            }
            total += damp * s;
        }
        total * self.u_step / (2.0 * PI)
    }

    pub fn g(&self, k: f64) -> Result<Estimate> {
        if !k.is_finite() {
            return invalid("k", "must be finite");
        }
        let per: Vec<f64> = self.batch_ext.iter().map(|t| self.contract(k, t)).collect();
        let value = per.iter().zip(&self.batch_weight).map(|(v, w)| v * w).sum();
        let se = if self.params.lambda == 0.0 { 0.0 } else { summarize(&per).se };
        Ok(Estimate { value, se })
    }

    pub fn g_refinement(&self, k: f64) -> Result<Refinement> {
        let est = self.g(k)?;
        let values = [
            self.contract(k, &self.level[0]),
            self.contract(k, &self.level[1]),
            self.contract(k, &self.level[2]),
        ];
        Ok(refinement(self.steps, values, est.se))
    }

    /// F(ε) = (2π)^{-1/2}(2ε)^{-1/2}(g(√(2ε)) + g(−√(2ε))).
    pub fn density(&self, eps: f64) -> Result<Estimate> {
        if !(eps > 0.0 && eps.is_finite()) {
            return invalid("epsilon", "must be positive");
        }
        let k = (2.0 * eps).sqrt();
        let plus = self.g(k)?;
        let minus = self.g(-k)?;
        let c = (2.0 * PI).powf(-0.5) / k;
        Ok(Estimate { value: c * (plus.value + minus.value), se: c * (plus.se + minus.se) })
    }

    /// ∫₀^∞ F(ε)dε from F on ε = k²/2, k ∈ [0, k_max], by Simpson in k
    /// (dε = k dk removes the ε^{-1/2} endpoint behaviour).
    pub fn integrated_density(&self, k_max: f64, intervals: usize) -> Result<Estimate> {
        let m = intervals + intervals % 2;
        let h = k_max / m as f64;
        let per_batch = |t: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..=m {
                let k = i as f64 * h;
                let wgt = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                // F(ε)·k = (2π)^{-1/2}·2g(k)
                s += wgt * 2.0 * (2.0 * PI).powf(-0.5) * self.contract(k, t);
            }
            s * h / 3.0
        };
        let per: Vec<f64> = self.batch_ext.iter().map(|t| per_batch(t)).collect();
        let value = per.iter().zip(&self.batch_weight).map(|(v, w)| v * w).sum();
        let se = if self.params.lambda == 0.0 { 0.0 } else { summarize(&per).se };
        Ok(Estimate { value, se })
    }

    /// (1/(b−a))∫_a^b F dε, Simpson in k = √(2ε) with `intervals` panels.
    pub fn bin_average(&self, a: f64, b: f64, intervals: usize) -> Result<Estimate> {
        if !(a >= 0.0 && b > a) {
            return invalid("bin", "need 0 <= a < b");
        }
        let (ka, kb) = ((2.0 * a).sqrt(), (2.0 * b).sqrt());
        let m = intervals.max(2) + intervals % 2;
        let h = (kb - ka) / m as f64;
        let per_batch = |t: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..=m {
                let wgt = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += wgt * self.contract(ka + i as f64 * h, t);
            }
            2.0 * (2.0 * PI).powf(-0.5) * s * h / 3.0 / (b - a)
        };
        let per: Vec<f64> = self.batch_ext.iter().map(|t| per_batch(t)).collect();
        let value = per.iter().zip(&self.batch_weight).map(|(v, w)| v * w).sum();
        let se = if self.params.lambda == 0.0 { 0.0 } else { summarize(&per).se };
        Ok(Estimate { value, se })
    }

    pub fn density_csv(&self, eps: &[f64]) -> Result<String> {
        let mut s = String::from("epsilon,F,F_se\n");
        for &e in eps {
            let f = self.density(e)?;
            writeln!(s, "{e:.16e},{:.16e},{:.16e}", f.value, f.se).unwrap();
        }
        Ok(s)
    }
}

pub fn ls_g_function(k: f64, params: FkParams, mc: &McConfig) -> Result<Estimate> {
    if !k.is_finite() {
        return invalid("k", "must be finite");
    }
    build_g_table(params, mc)?.g(k)
}

pub fn ls_density_f(eps: f64, params: FkParams, mc: &McConfig) -> Result<Estimate> {
    if !(eps > 0.0) {
        return invalid("epsilon", "must be positive");
    }
    build_g_table(params, mc)?.density(eps)
}

/// Free-gas density (e^{β(ε−μ)}−1)^{-1}/(π√(2ε)).
pub fn free_density(eps: f64, beta: f64, mu: f64) -> f64 {
    1.0 / ((beta * (eps - mu)).exp_m1() * PI * (2.0 * eps).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEstimate {
    pub probability: f64,
    pub se: f64,
    pub hits: usize,
    pub paths: usize,
}

/// P(bridge from x to x' in time T leaves (−l/2, l/2)), grid-monitored.
pub fn exit_probability(
    x: f64,
    x_end: f64,
    duration: f64,
    l: f64,
    paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<ExitEstimate> {
    let h = 0.5 * l;
    if !(x.abs() < h && x_end.abs() < h) {
        return invalid("x", "endpoints must lie inside the box");
    }
    if paths == 0 {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let hits: usize = (0..paths)
        .into_par_iter()
        .map(|i| sample_bridge(duration, x, x_end, n_steps, derive_seed(seed, i as u64)).map(|b| usize::from(b.exits(l))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let p = hits as f64 / paths as f64;
    Ok(ExitEstimate { probability: p, se: (p * (1.0 - p) / paths as f64).sqrt(), hits, paths })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitDecay {
    /// (distance to the boundary, estimate)
    pub points: Vec<(f64, ExitEstimate)>,
    /// ln P̂ against distance²
    pub fit: LineFit,
}

/// Exit probabilities for bridges from c back to c at each centre offset c.
pub fn exit_decay(offsets: &[f64], duration: f64, l: f64, paths: usize, n_steps: usize, seed: u64) -> Result<ExitDecay> {
    let mut points = Vec::with_capacity(offsets.len());
    for (i, &c) in offsets.iter().enumerate() {
        let e = exit_probability(c, c, duration, l, paths, n_steps, derive_seed(seed, i as u64))?;
        points.push((0.5 * l - c.abs(), e));
    }
    if points.iter().any(|p| p.1.hits == 0) {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let x: Vec<f64> = points.iter().map(|p| p.0 * p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.probability.ln()).collect();
    Ok(ExitDecay { fit: linear_fit(&x, &y)?, points })
}

/// Mean bridge range at each refinement level and extrapolated, for x = 0.
pub fn mean_range(duration: f64, paths: usize, n_steps: usize, seed: u64) -> Result<(Refinement, f64)> {
    let mc = McConfig { paths, n_steps, seed, batches: 2.max(paths.min(20)), ..McConfig::default() };
    mc.validate()?;
    let (_, r0) = pilot(&mc);
    let sd = duration.sqrt();
    let mut values = [0.0; LEVELS];
    for lv in 0..LEVELS {
        values[lv] = sd * r0.iter().map(|r| r[lv]).sum::<f64>() / paths as f64;
    }
    let ext: Vec<f64> = r0.iter().map(|r| sd * extrapolate(r[1], r[2])).collect();
    let se = summarize(&ext).se;
    Ok((refinement(n_steps, values, se), se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ks_two_sample, ks_two_sample_critical_1pct};

    #[test]
    fn endpoints_exact() {
        for seed in 0..20 {
            let b = sample_bridge(2.7, -0.3, 1.9, 64, seed).unwrap();
            assert_eq!(b.path[0], -0.3);
            assert_eq!(b.path[64], 1.9);
            assert!(b.range() >= 2.2 - 1e-15);
        }
    }

    #[test]
    fn tiny_duration_has_tiny_range() {
        let m: f64 = (0..200).map(|s| sample_bridge(1e-6, 0.0, 0.0, 256, s).unwrap().range()).sum::<f64>() / 200.0;
        assert!(m <= 1e-2);
    }

    #[test]
    fn hull_query_matches_brute_force() {
        let mut rng = rng_from_seed(9);
        let mut a = Vec::new();
        unit_bridge(128, &mut rng, &mut a);
        let h = RangeHull::new(&a, 1);
        let us: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
        let mut rs = vec![0.0; us.len()];
        h.ranges_sorted(&us, &mut rs);
        for (u, r) in us.iter().zip(&rs) {
            let vals: Vec<f64> = a.iter().enumerate().map(|(j, x)| j as f64 / 128.0 * u + x).collect();
            let brute = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((r - brute).abs() < 1e-14);
            assert!(*r >= u.abs() - 1e-15);
        }
        let m = h.min_range();
        assert!(rs.iter().all(|r| *r >= m - 1e-12));
    }

    #[test]
    fn range_scales_like_root_duration() {
        let n: usize = 2000;
        let a: Vec<f64> = (0..n as u64).map(|s| 3.0 * sample_bridge(1.0, 0.0, 0.0, 64, s).unwrap().range()).collect();
        let b: Vec<f64> = (0..n as u64).map(|s| sample_bridge(9.0, 0.0, 0.0, 64, 10_000 + s).unwrap().range()).collect();
        assert!(ks_two_sample(&a, &b) < ks_two_sample_critical_1pct(n, n));
    }

    #[test]
    fn free_laplace_transform_closed_form() {
        let p = FkParams { beta: 1.0, mu: -0.5, lambda: 0.0 };
        let e = ls_laplace_transform(1.0, p, &McConfig::default()).unwrap();
        let exact: f64 = (1..400).map(|n| (-0.5 * n as f64).exp() / (2.0 * PI * (n as f64 + 1.0)).sqrt()).sum();
        assert!((e.value - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn zero_lambda_zero_mu_is_rejected() {
        let p = FkParams { beta: 1.0, mu: 0.0, lambda: 0.0 };
        assert!(matches!(ls_laplace_transform(1.0, p, &McConfig::default()), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn free_g_matches_gaussian_sum() {
        let p = FkParams { beta: 1.0, mu: -1.0, lambda: 0.0 };
        let t = build_g_table(p, &McConfig::default()).unwrap();
        for k in [0.0, 0.5, 1.0, 2.0] {
            let exact: f64 = (1..200)
                .map(|n| (-(n as f64)).exp() * (-(n as f64) * k * k / 2.0).exp())
                .sum::<f64>()
                / (2.0 * PI).sqrt();
            let g = t.g(k).unwrap();
            assert!((g.value - exact).abs() < 1e-9, "k={k}: {} vs {exact}", g.value);
            assert_eq!(g.value, t.g(-k).unwrap().value);
        }
        let f = t.density(0.7).unwrap().value;
        assert!((f - free_density(0.7, 1.0, -1.0)).abs() < 1e-8);
    }
}
