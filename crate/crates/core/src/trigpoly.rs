//! Finite cosine series on `[0, pi]`.
//!
//! A [`CosPoly`] stores `c_0, ..., c_L` and represents
//! `p(t) = c_0 + sum_{j>=1} c_j cos(j t)`. Under `z = cos t` the same function
//! is an algebraic polynomial in `z` whose coefficients are obtained through
//! [`chebyshev_coeff_matrix`].
//!
//! The extremum search ([`global_extrema`], [`local_maxima`]) is what the
//! semi-infinite LP solver uses for pricing: a coarse uniform scan followed by
//! safeguarded Newton refinement on `p'(t)`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_COARSE_GRID: usize = 8192;
pub const DEFAULT_REFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosPoly {
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumMode {
    Max,
    Min,
}

impl CosPoly {
    /// Builds `c_0 + sum c_j cos(jt)`. An empty coefficient list is the zero polynomial.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self { coeffs: vec![0.0] };
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn zero(degree: usize) -> Self {
        Self {
            coeffs: vec![0.0; degree + 1],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Sum of absolute coefficients; an upper bound on `max |p(t)|`.
    pub fn abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Value at `t`, rejecting points outside `[0, pi]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&t) {
            return Err(Error::Domain(t));
        }
        Ok(self.value(t))
    }

    /// Value at `t` without the domain check. Each term uses its own `cos`
    /// call so the error stays at a few ulps of `sum |c_j|`.
    pub fn value(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0];
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            acc += c * (j as f64 * t).cos();
        }
        acc
    }

    /// `p'(t) = -sum j c_j sin(jt)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let jf = j as f64;
            acc -= jf * c * (jf * t).sin();
        }
        acc
    }

    /// `p''(t) = -sum j^2 c_j cos(jt)`.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let jf = j as f64;
            acc -= jf * jf * c * (jf * t).cos();
        }
        acc
    }

    /// Evaluates on the uniform grid `t_i = i pi / intervals`, `i = 0..=intervals`,
    /// using the Clenshaw recurrence in `z = cos t`.
    pub fn eval_uniform_grid(&self, intervals: usize) -> Vec<f64> {
        let h = PI / intervals as f64;
        (0..=intervals)
            .map(|i| self.clenshaw((i as f64 * h).cos()))
            .collect()
    }

    fn clenshaw(&self, z: f64) -> f64 {
        let l = self.degree();
        if l == 0 {
            return self.coeffs[0];
        }
        let (mut b1, mut b2) = (0.0, 0.0);
        for k in (1..=l).rev() {
            let b0 = self.coeffs[k] + 2.0 * z * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + z * b1 - b2
    }

    /// Coefficients `m_0..m_L` of the algebraic polynomial `sum m_j z^j` that
    /// equals this series under `z = cos t`. Ill-conditioned for large degree.
    pub fn to_monomial(&self) -> Vec<f64> {
        let size = self.coeffs.len();
        let p = chebyshev_coeff_matrix(size);
        (0..size)
            .map(|j| (0..size).map(|k| self.coeffs[k] * p[(k, j)]).sum())
            .collect()
    }

    /// `sum_i weights[i] * polys[i]`, padded to the largest degree.
    pub fn linear_combination(polys: &[CosPoly], weights: &[f64]) -> CosPoly {
        assert_eq!(polys.len(), weights.len());
        let len = polys.iter().map(|p| p.coeffs.len()).max().unwrap_or(1);
        let mut out = vec![0.0; len];
        for (p, w) in polys.iter().zip(weights) {
            for (o, c) in out.iter_mut().zip(&p.coeffs) {
                *o += w * c;
            }
        }
        CosPoly::new(out)
    }

    fn zip_with(&self, other: &CosPoly, f: impl Fn(f64, f64) -> f64) -> CosPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        CosPoly::new(
            (0..len)
                .map(|i| f(get(&self.coeffs, i), get(&other.coeffs, i)))
                .collect(),
        )
    }
}

impl Add for &CosPoly {
    type Output = CosPoly;
    fn add(self, rhs: &CosPoly) -> CosPoly {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &CosPoly {
    type Output = CosPoly;
    fn sub(self, rhs: &CosPoly) -> CosPoly {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &CosPoly {
    type Output = CosPoly;
    fn neg(self) -> CosPoly {
        CosPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul<f64> for &CosPoly {
    type Output = CosPoly;
    fn mul(self, rhs: f64) -> CosPoly {
        CosPoly::new(self.coeffs.iter().map(|c| c * rhs).collect())
    }
}

/// Matrix `P` with `sum_j P[k][j] cos^j(t) = cos(kt)`, i.e. row `k` holds the
/// monomial coefficients of the Chebyshev polynomial `T_k`.
pub fn chebyshev_coeff_matrix(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    if n == 0 {
        return p;
    }
    p[(0, 0)] = 1.0;
    if n > 1 {
        p[(1, 1)] = 1.0;
    }
    // T_{k+1} = 2 z T_k - T_{k-1}
    for k in 1..n.saturating_sub(1) {
        for j in 0..n {
            let shifted = if j > 0 { 2.0 * p[(k, j - 1)] } else { 0.0 };
            p[(k + 1, j)] = shifted - p[(k - 1, j)];
        }
    }
    p
}

/// Global maximizer (or minimizer) of `p` on `[0, pi]` and the value there.
///
/// Ties are broken toward the smallest `t`. Both endpoints are always
/// candidates.
pub fn global_extrema(
    p: &CosPoly,
    mode: ExtremumMode,
    coarse_grid: usize,
    refine_tol: f64,
) -> (f64, f64) {
    match mode {
        ExtremumMode::Max => global_max(p, coarse_grid, refine_tol),
        ExtremumMode::Min => {
            let (t, v) = global_max(&-p, coarse_grid, refine_tol);
            (t, -v)
        }
    }
}

fn global_max(p: &CosPoly, coarse_grid: usize, refine_tol: f64) -> (f64, f64) {
    let mut candidates = max_candidates(p, coarse_grid, refine_tol);
    candidates.push((0.0, p.value(0.0)));
    candidates.push((PI, p.value(PI)));
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tie = 8.0 * f64::EPSILON * p.abs_sum();
    let mut best = candidates[0];
    for &(t, v) in &candidates[1..] {
        if v > best.1 + tie {
            best = (t, v);
        }
    }
    best
}

/// All refined local maxima of `p` on `[0, pi]` detected by the coarse scan,
/// sorted by `t`. Plateaus report their leftmost grid point only.
pub fn local_maxima(p: &CosPoly, coarse_grid: usize, refine_tol: f64) -> Vec<(f64, f64)> {
    let mut out = max_candidates(p, coarse_grid, refine_tol);
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.dedup_by(|a, b| (a.0 - b.0).abs() <= refine_tol.max(1e-14));
    out
}

fn max_candidates(p: &CosPoly, coarse_grid: usize, refine_tol: f64) -> Vec<(f64, f64)> {
    let intervals = coarse_grid.max(4 * (p.degree() + 1)).max(4);
    let h = PI / intervals as f64;
    let grid_t = |i: usize| if i == intervals { PI } else { i as f64 * h };
    let v = p.eval_uniform_grid(intervals);
    let last = intervals;
    let mut out = Vec::new();

    if v[0] >= v[1] {
        // p'(0) = 0 always; an interior maximum can still hide in (0, h)
        // when p curves upward at 0 and comes back down before t_1.
        if p.second_derivative(0.0) > 0.0 && p.derivative(h) < 0.0 {
            let t = refine_max(p, 0.0, h, 0.5 * h, refine_tol);
            out.push((t, p.value(t)));
        } else {
            out.push((0.0, p.value(0.0)));
        }
    }
    for i in 1..last {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            let t = refine_max(p, grid_t(i - 1), grid_t(i + 1), grid_t(i), refine_tol);
            let (vt, vi) = (p.value(t), p.value(grid_t(i)));
            out.push(if vt >= vi { (t, vt) } else { (grid_t(i), vi) });
        }
    }
    if v[last] > v[last - 1] {
        if p.second_derivative(PI) > 0.0 && p.derivative(PI - h) > 0.0 {
            let t = refine_max(p, PI - h, PI, PI - 0.5 * h, refine_tol);
            out.push((t, p.value(t)));
        } else {
            out.push((PI, p.value(PI)));
        }
    }
    out
}

/// Safeguarded Newton on `p'` inside `[lo, hi]`, assuming `p'(lo) >= 0 >= p'(hi)`.
/// Falls back to bisection whenever the Newton step leaves the bracket or the
/// curvature has the wrong sign.
fn refine_max(p: &CosPoly, lo: f64, hi: f64, start: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut t = start.clamp(lo, hi);
    for _ in 0..200 {
        let f = p.derivative(t);
        if f > 0.0 {
            a = t;
        } else if f < 0.0 {
            b = t;
        } else {
            break;
        }
        let g = p.second_derivative(t);
        let newton = t - f / g;
        let next = if g < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let step = (next - t).abs();
        t = next;
        if step <= tol || b - a <= tol {
            break;
        }
    }
    t.clamp(0.0, PI)
}
