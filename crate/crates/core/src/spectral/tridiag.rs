//! Symmetric tridiagonal eigenproblems: Sturm-sequence bisection for the
//! lowest eigenvalues and inverse iteration for their eigenvectors.

use crate::error::{Error, Result};
use crate::numerics::splitmix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// off-diagonal, length n-1
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::Malformed("tridiagonal shape mismatch".into()));
        }
        if diag.iter().chain(&off).any(|x| !x.is_finite()) {
            return Err(Error::Malformed("non-finite tridiagonal entry".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE.sqrt() * self.norm().max(1.0);
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.dim() {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `count` smallest eigenvalues in ascending order.
    pub fn lowest_eigenvalues(&self, count: usize) -> Vec<f64> {
        let count = count.min(self.dim());
        if count == 0 {
            return Vec::new();
        }
        let (glo, ghi) = self.gershgorin();
        let pad = f64::EPSILON * self.norm() * 4.0;
        let mut lower = vec![glo - pad; count];
        let mut upper = vec![ghi + pad; count];
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let (mut lo, mut hi) = (lower[k], upper[k]);
            if k > 0 {
                lo = lo.max(out[k - 1] - pad);
            }
            while hi - lo > 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let c = self.count_below(mid);
                // eigenvalues with index < c lie below mid
                for j in k..count {
                    if j < c {
                        upper[j] = upper[j].min(mid);
                    } else {
                        lower[j] = lower[j].max(mid);
                    }
                }
                if c > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }

    /// All eigenvalues not exceeding `cap`.
    pub fn eigenvalues_below(&self, cap: f64) -> Vec<f64> {
        let c = self.count_below(cap);
        let mut v = self.lowest_eigenvalues(c + usize::from(c < self.dim()));
        v.retain(|&e| e <= cap);
        v
    }

    /// Eigenvector for the (accurate) eigenvalue `lambda`, orthogonalized
    /// against `against`. Unit Euclidean norm.
    pub fn eigenvector(&self, lambda: f64, against: &[&[f64]], salt: u64) -> Result<Vec<f64>> {
        let n = self.dim();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let tiny = f64::EPSILON * self.norm();
        // LU of T - lambda I with partial pivoting
        let mut d: Vec<f64> = self.diag.iter().map(|x| x - lambda).collect();
        let mut dl = self.off.clone();
        let mut du = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n - 1];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swap[i] = true;
            }
        }
        for x in d.iter_mut() {
            if x.abs() < tiny {
                *x = if *x < 0.0 { -tiny } else { tiny };
            }
        }
        let solve = |b: &mut [f64]| {
            for i in 0..n - 1 {
                if swap[i] {
                    b.swap(i, i + 1);
                }
                b[i + 1] -= dl[i] * b[i];
            }
            b[n - 1] /= d[n - 1];
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
            for i in (0..n.saturating_sub(2)).rev() {
                b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
            }
        };
        let mut state = splitmix64(salt ^ lambda.to_bits());
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state = splitmix64(state);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        for _ in 0..3 {
            for v in against {
                let c: f64 = x.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(v.iter()).for_each(|(a, b)| *a -= c * b);
            }
            let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::NonConvergent(format!("inverse iteration at {lambda}")));
            }
            x.iter_mut().for_each(|a| *a /= nrm);
            solve(&mut x);
        }
        for v in against {
            let c: f64 = x.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(v.iter()).for_each(|(a, b)| *a -= c * b);
        }
        let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter_mut().for_each(|a| *a /= nrm);
        let big = x.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        if big < 0.0 {
            x.iter_mut().for_each(|a| *a = -*a);
        }
        Ok(x)
    }

    /// Lowest `count` eigenpairs; vectors have unit Euclidean norm.
    pub fn lowest_eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let vals = self.lowest_eigenvalues(count);
        let vecs = self.eigenvectors_for(&vals)?;
        Ok((vals, vecs))
    }

    pub fn eigenvectors_for(&self, vals: &[f64]) -> Result<Vec<Vec<f64>>> {
        let cluster_tol = 1e-7 * self.norm();
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(vals.len());
        let mut start = 0;
        for (k, &lam) in vals.iter().enumerate() {
            if k > 0 && lam - vals[k - 1] > cluster_tol {
                start = k;
            }
            let against: Vec<&[f64]> = vecs[start..k].iter().map(Vec::as_slice).collect();
            let v = self.eigenvector(lam, &against, k as u64)?;
            vecs.push(v);
        }
        Ok(vecs)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}
