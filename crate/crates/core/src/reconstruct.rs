//! Turns a solved measure pair into the completed Toeplitz first row and
//! certifies the rank bound.
//!
//! Each atom `(t, w)` contributes `w cos(j t)` to `x_j`. After mirroring an
//! interior atom to `2 pi - t`, its moment matrix is `w/2 (v(t) v(t)^* +
//! v(-t) v(-t)^*)` with `v(theta) = (1, e^{i theta}, ..., e^{i (n-1) theta})`,
//! i.e. rank two; an atom at `0` or `pi` gives a single real column. Summing
//! over at most `m` atoms gives `rank T(x) <= 2m`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Atom, AtomicMeasure};
use crate::problem::CompletionInstance;
use crate::silp::{
    solve_primal_column_generation, BoundPolys, SilpOptions, SilpSolution, TraceEntry,
};
use crate::toeplitz::{moments_from_measure, numerical_rank, SymToeplitz, Toeplitz, DEFAULT_RANK_TOL};

/// `w_j = sum_k w_k cos(j t_k)`, `j = 0..n`.
pub fn measure_to_w(mu: &AtomicMeasure, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for a in mu.atoms() {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj += a.w * (j as f64 * a.t).cos();
        }
    }
    w
}

/// Vandermonde factor `V` (`n x p`) and diagonal `D` with `V D V^* = T(w)`.
///
/// Columns are ordered `t_1, ..., t_r` (every atom, ascending) followed by
/// the mirrored nodes `2 pi - t` of the interior atoms in descending order.
pub fn vandermonde_factor(mu: &AtomicMeasure, n: usize) -> (DMatrix<Complex64>, Vec<f64>) {
    let mut thetas = Vec::with_capacity(mu.column_multiplicity());
    let mut diag = Vec::with_capacity(mu.column_multiplicity());
    for a in mu.atoms() {
        thetas.push(a.t);
        diag.push(if a.is_endpoint() { a.w } else { a.w / 2.0 });
    }
    for a in mu.atoms().iter().rev().filter(|a| !a.is_endpoint()) {
        thetas.push(2.0 * PI - a.t);
        diag.push(a.w / 2.0);
    }
    let v = DMatrix::from_fn(n, thetas.len(), |k, c| {
        Complex64::from_polar(1.0, k as f64 * thetas[c])
    });
    (v, diag)
}

/// `V D V^*` as a complex matrix.
pub fn vandermonde_product(v: &DMatrix<Complex64>, diag: &[f64]) -> DMatrix<Complex64> {
    let mut vd = v.clone();
    for (c, &d) in diag.iter().enumerate() {
        vd.column_mut(c).scale_mut(d);
    }
    &vd * v.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyTols {
    pub rank_tol: f64,
    /// Residual tolerance relative to `1 + ||d||_inf`.
    pub feas_tol_rel: f64,
}

impl Default for CertifyTols {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            feas_tol_rel: 1e-9,
        }
    }
}

impl CertifyTols {
    pub fn feas_tol(&self, inst: &CompletionInstance) -> f64 {
        self.feas_tol_rel * (1.0 + inst.d_inf_norm())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub support_size: usize,
    pub max_violation: f64,
    /// `m == n`: `x` is pinned by `B` alone and the bound `2m >= n` is vacuous.
    pub square_system: bool,
    pub rank_tol: f64,
    pub feas_tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub n: usize,
    pub m: usize,
    pub x: Vec<f64>,
    pub rank: usize,
    pub rank_bound: usize,
    pub predicted_rank: usize,
    pub residual: f64,
    pub atoms1: Vec<Atom>,
    pub atoms2: Vec<Atom>,
    pub objective: f64,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

impl CompletionResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn toeplitz(&self) -> SymToeplitz {
        SymToeplitz::new(self.x.clone()).expect("n >= 1")
    }
}

/// Predicted rank from the atom layout: two per interior atom, one per endpoint atom.
pub fn predicted_rank(mu1: &AtomicMeasure, mu2: &AtomicMeasure) -> usize {
    mu1.column_multiplicity() + mu2.column_multiplicity()
}

fn certification(check: &str, detail: String) -> Error {
    Error::Certification {
        check: check.into(),
        detail,
    }
}

/// Builds `x = w(mu1) - w(mu2)`, recomputes residual and rank from scratch and
/// checks the whole certificate chain before returning.
pub fn assemble_completion(
    sol: &SilpSolution,
    inst: &CompletionInstance,
    tols: &CertifyTols,
) -> Result<CompletionResult> {
    let n = inst.n();
    let m = inst.m();
    let w1 = measure_to_w(&sol.mu1, n);
    let w2 = measure_to_w(&sol.mu2, n);
    let x: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();

    let residual = inst.residual_inf(&x);
    let feas_tol = tols.feas_tol(inst);
    let rank = numerical_rank(&SymToeplitz::new(x.clone())?.to_dense(), tols.rank_tol)?;
    let predicted = predicted_rank(&sol.mu1, &sol.mu2);
    let support = sol.support_size();

    if support > m {
        return Err(certification(
            "support",
            format!("{support} atoms exceed m = {m}"),
        ));
    }
    if !(residual <= feas_tol) {
        return Err(certification(
            "residual",
            format!("||Bx - d||_inf = {residual:e} > {feas_tol:e}"),
        ));
    }
    if rank > predicted {
        return Err(certification(
            "rank<=predicted",
            format!("numerical rank {rank} exceeds atom count bound {predicted}"),
        ));
    }
    if predicted > 2 * m {
        return Err(certification(
            "predicted<=2m",
            format!("predicted rank {predicted} exceeds 2m = {}", 2 * m),
        ));
    }

    Ok(CompletionResult {
        n,
        m,
        x,
        rank,
        rank_bound: 2 * m,
        predicted_rank: predicted,
        residual,
        atoms1: sol.mu1.atoms().to_vec(),
        atoms2: sol.mu2.atoms().to_vec(),
        objective: sol.objective,
        iterations: sol.iterations,
        diagnostics: Diagnostics {
            support_size: support,
            max_violation: sol.max_violation,
            square_system: m == n,
            rank_tol: tols.rank_tol,
            feas_tol,
            trace: sol.trace.clone(),
        },
    })
}

/// Solves and certifies one instance with the total-mass objective.
pub fn complete(
    inst: &CompletionInstance,
    opts: &SilpOptions,
    tols: &CertifyTols,
) -> Result<CompletionResult> {
    let sol = solve_primal_column_generation(inst, &BoundPolys::unit(), opts)?;
    assemble_completion(&sol, inst, tols)
}

/// Relative Frobenius error of the Vandermonde reconstruction against the
/// moment Toeplitz matrix of `mu`.
pub fn vandermonde_error(mu: &AtomicMeasure, n: usize) -> Result<f64> {
    let (v, d) = vandermonde_factor(mu, n);
    let prod = vandermonde_product(&v, &d);
    let t = moments_from_measure(mu, n)?.to_dense();
    let diff: f64 = prod
        .iter()
        .zip(t.iter())
        .map(|(p, &r)| (p - Complex64::new(r, 0.0)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm = t.norm();
    Ok(if norm == 0.0 { diff } else { diff / norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn measure_to_w_examples() {
        let mu = AtomicMeasure::from_pairs(&[(0.0, 1.0)]).unwrap();
        assert_eq!(measure_to_w(&mu, 3), vec![1.0, 1.0, 1.0]);
        let mu = AtomicMeasure::from_pairs(&[(PI, 2.0)]).unwrap();
        assert!(close(&measure_to_w(&mu, 3), &[2.0, -2.0, 2.0], 1e-14));
        let mu = AtomicMeasure::from_pairs(&[(FRAC_PI_3, 1.0), (2.0 * FRAC_PI_3, 1.0)]).unwrap();
        // cos(pi/3) + cos(2pi/3) = 0; cos(2pi/3) + cos(4pi/3) = -1
        assert!(close(&measure_to_w(&mu, 3), &[2.0, 0.0, -1.0], 1e-14));
    }

    #[test]
    fn vandermonde_endpoint_examples() {
        let mu = AtomicMeasure::from_pairs(&[(0.0, 1.0)]).unwrap();
        let (v, d) = vandermonde_factor(&mu, 2);
        assert_eq!(v.ncols(), 1);
        assert_eq!(d, vec![1.0]);
        let prod = vandermonde_product(&v, &d);
        assert!(prod.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let mu = AtomicMeasure::from_pairs(&[(PI, 1.0)]).unwrap();
        let (v, d) = vandermonde_factor(&mu, 2);
        assert!((v[(1, 0)] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let prod = vandermonde_product(&v, &d);
        let expect = [[1.0, -1.0], [-1.0, 1.0]];
        for k in 0..2 {
            for j in 0..2 {
                assert!((prod[(k, j)] - Complex64::new(expect[k][j], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn vandermonde_interior_atom() {
        let mu = AtomicMeasure::from_pairs(&[(PI / 2.0, 2.0)]).unwrap();
        let (v, d) = vandermonde_factor(&mu, 3);
        assert_eq!(v.ncols(), 2);
        assert_eq!(d, vec![1.0, 1.0]);
        let prod = vandermonde_product(&v, &d);
        let expect = [[2.0, 0.0, -2.0], [0.0, 2.0, 0.0], [-2.0, 0.0, 2.0]];
        for k in 0..3 {
            for j in 0..3 {
                assert!((prod[(k, j)] - Complex64::new(expect[k][j], 0.0)).norm() < 1e-14);
            }
        }
        assert!(vandermonde_error(&mu, 3).unwrap() < 1e-14);
    }

    fn inst(rows: usize, b: &[f64], d: &[f64]) -> CompletionInstance {
        CompletionInstance::new(DMatrix::from_row_slice(rows, b.len() / rows, b), d.to_vec())
            .unwrap()
    }

    fn solution(mu1: AtomicMeasure, mu2: AtomicMeasure, m: usize) -> SilpSolution {
        SilpSolution {
            objective: mu1.total_mass() + mu2.total_mass(),
            mu1,
            mu2,
            y: vec![0.0; m],
            iterations: 0,
            max_violation: 0.0,
            trace: Vec::new(),
        }
    }

    #[test]
    fn assemble_homogeneous() {
        let i = inst(1, &[1.0, 0.0, 0.0], &[0.0]);
        let r = assemble_completion(
            &solution(AtomicMeasure::empty(), AtomicMeasure::empty(), 1),
            &i,
            &CertifyTols::default(),
        )
        .unwrap();
        assert_eq!(r.x, vec![0.0; 3]);
        assert_eq!(r.rank, 0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn assemble_single_endpoint_atom() {
        let i = inst(1, &[0.0, 1.0], &[1.0]);
        let mu1 = AtomicMeasure::from_pairs(&[(0.0, 1.0)]).unwrap();
        let r = assemble_completion(&solution(mu1, AtomicMeasure::empty(), 1), &i, &CertifyTols::default())
            .unwrap();
        assert_eq!(r.x, vec![1.0, 1.0]);
        assert_eq!(r.rank, 1);
        assert_eq!(r.rank_bound, 2);
        assert_eq!(r.predicted_rank, 1);
    }

    #[test]
    fn assemble_interior_atom_rank_two() {
        let i = inst(1, &[1.0, 0.0, 0.0], &[1.0]);
        for t in [0.4, 1.0, 2.2] {
            let mu1 = AtomicMeasure::from_pairs(&[(t, 1.0)]).unwrap();
            let r = assemble_completion(
                &solution(mu1, AtomicMeasure::empty(), 1),
                &i,
                &CertifyTols::default(),
            )
            .unwrap();
            assert_eq!(r.rank, 2, "t = {t}");
            assert_eq!(r.predicted_rank, 2);
        }
    }

    #[test]
    fn assemble_rejects_infeasible_measure() {
        let i = inst(1, &[1.0, 0.0, 0.0], &[2.0]);
        let mu1 = AtomicMeasure::from_pairs(&[(0.3, 1.0)]).unwrap();
        let err = assemble_completion(&solution(mu1, AtomicMeasure::empty(), 1), &i, &CertifyTols::default())
            .unwrap_err();
        assert!(matches!(err, Error::Certification { ref check, .. } if check == "residual"));
    }

    #[test]
    fn assemble_rejects_oversized_support() {
        let i = inst(1, &[1.0, 0.0, 0.0], &[2.0]);
        let mu1 = AtomicMeasure::from_pairs(&[(0.3, 1.0), (1.3, 1.0)]).unwrap();
        let err = assemble_completion(&solution(mu1, AtomicMeasure::empty(), 1), &i, &CertifyTols::default())
            .unwrap_err();
        assert!(matches!(err, Error::Certification { ref check, .. } if check == "support"));
    }

    #[test]
    fn complete_end_to_end() {
        let i = inst(1, &[0.0, 1.0], &[1.0]);
        let r = complete(&i, &SilpOptions::default(), &CertifyTols::default()).unwrap();
        assert_eq!(r.x, vec![1.0, 1.0]);
        assert_eq!(r.rank, 1);
        let back = CompletionResult::from_json_str(&r.to_json_string()).unwrap();
        assert_eq!(back, r);
    }
}
