//! Symmetric and general Toeplitz matrices, plus the dense spectral checks
//! (numerical rank, smallest eigenvalue) the rest of the crate relies on.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;

pub const DEFAULT_RANK_TOL: f64 = 1e-7;

/// Anything that can be expanded to a dense Toeplitz matrix.
pub trait Toeplitz {
    fn order(&self) -> usize;

    /// Entry `(k, j)` of the dense expansion, zero-based.
    fn entry(&self, k: usize, j: usize) -> f64;

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.order();
        DMatrix::from_fn(n, n, |k, j| self.entry(k, j))
    }
}

/// `n x n` symmetric Toeplitz matrix stored as its first row `x_0..x_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymToeplitz {
    x: Vec<f64>,
}

impl SymToeplitz {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Contract("Toeplitz order must be at least 1".into()));
        }
        Ok(Self { x })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        Self { x: vec![0.0; n] }
    }

    pub fn first_row(&self) -> &[f64] {
        &self.x
    }

    pub fn into_first_row(self) -> Vec<f64> {
        self.x
    }
}

impl Toeplitz for SymToeplitz {
    fn order(&self) -> usize {
        self.x.len()
    }

    fn entry(&self, k: usize, j: usize) -> f64 {
        self.x[k.abs_diff(j)]
    }
}

/// `n x n` Toeplitz matrix with `D[k][j] = xbar[j - k]`, where `xbar` is
/// indexed `-(n-1)..=(n-1)` and stored with offset `n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenToeplitz {
    n: usize,
    xbar: Vec<f64>,
}

impl GenToeplitz {
    pub fn new(n: usize, xbar: Vec<f64>) -> Result<Self> {
        if n == 0 || xbar.len() != 2 * n - 1 {
            return Err(Error::Contract(format!(
                "general Toeplitz of order {n} needs {} entries, got {}",
                (2 * n).saturating_sub(1),
                xbar.len()
            )));
        }
        Ok(Self { n, xbar })
    }

    /// Entry with signed index `j` in `-(n-1)..=(n-1)`.
    pub fn at(&self, j: isize) -> f64 {
        self.xbar[(j + self.n as isize - 1) as usize]
    }

    pub fn is_symmetric(&self) -> bool {
        (1..self.n as isize).all(|j| self.at(j) == self.at(-j))
    }
}

impl Toeplitz for GenToeplitz {
    fn order(&self) -> usize {
        self.n
    }

    fn entry(&self, k: usize, j: usize) -> f64 {
        self.at(j as isize - k as isize)
    }
}

pub fn to_dense(spec: &impl Toeplitz) -> DMatrix<f64> {
    spec.to_dense()
}

fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if !(asym <= 1e-12 * scale) {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max |M - M'| = {asym:e})"
        )));
    }
    Ok(())
}

/// Count of singular values above `tol_rel * sigma_max`; zero for the zero matrix.
pub fn numerical_rank(m: &DMatrix<f64>, tol_rel: f64) -> Result<usize> {
    check_square_symmetric(m)?;
    if !(tol_rel > 0.0) {
        return Err(Error::Contract("rank tolerance must be positive".into()));
    }
    Ok(rank_from_singular_values(&singular_values(m), tol_rel))
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub(crate) fn rank_from_singular_values(s: &[f64], tol_rel: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol_rel * smax).count()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    check_square_symmetric(m)?;
    if m.nrows() == 0 {
        return Err(Error::Contract("empty matrix".into()));
    }
    Ok(m.clone().symmetric_eigenvalues().min())
}

/// First row `x_j = sum_k w_k cos(j t_k)` of the moment Toeplitz matrix of `mu`.
pub fn moments_from_measure(mu: &AtomicMeasure, n: usize) -> Result<SymToeplitz> {
    let mut x = vec![0.0; n];
    for atom in mu.atoms() {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += atom.w * (j as f64 * atom.t).cos();
        }
    }
    SymToeplitz::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn dense_examples() {
        let d = SymToeplitz::new(vec![1.0, 2.0]).unwrap().to_dense();
        assert_eq!(d, mat(&[&[1.0, 2.0], &[2.0, 1.0]]));
        assert_eq!(SymToeplitz::new(vec![7.0]).unwrap().to_dense(), mat(&[&[7.0]]));
        let d = SymToeplitz::new(vec![1.0, 0.0, -1.0]).unwrap().to_dense();
        assert_eq!(
            d,
            mat(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, 0.0], &[-1.0, 0.0, 1.0]])
        );
    }

    #[test]
    fn general_toeplitz_layout() {
        // xbar indexed -1, 0, 1
        let g = GenToeplitz::new(2, vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.to_dense(), mat(&[&[1.0, 2.0], &[3.0, 1.0]]));
        assert!(!g.is_symmetric());
        assert!(GenToeplitz::new(2, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn rank_examples() {
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert_eq!(numerical_rank(&ones, 1e-7).unwrap(), 1);
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4), 1e-7).unwrap(), 4);
        let m = mat(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, 0.0], &[-1.0, 0.0, 1.0]]);
        assert_eq!(numerical_rank(&m, 1e-7).unwrap(), 2);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-7).unwrap(), 0);
    }

    #[test]
    fn rank_rejects_bad_input() {
        assert!(numerical_rank(&DMatrix::zeros(2, 3), 1e-7).is_err());
        let m = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(numerical_rank(&m, 1e-7), Err(Error::Contract(_))));
        assert!(matches!(min_eigenvalue(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-14);
        assert!(min_eigenvalue(&DMatrix::from_element(2, 2, 1.0)).unwrap().abs() < 1e-14);
        let m = mat(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, 0.0], &[-1.0, 0.0, 1.0]]);
        assert!(min_eigenvalue(&m).unwrap().abs() < 1e-14);
    }

    #[test]
    fn moment_examples() {
        let one = |t: f64| AtomicMeasure::from_pairs(&[(t, 1.0)]).unwrap();
        assert_eq!(moments_from_measure(&one(0.0), 3).unwrap().first_row(), &[1.0, 1.0, 1.0]);
        let x = moments_from_measure(&one(PI), 3).unwrap();
        for (a, b) in x.first_row().iter().zip([1.0, -1.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let x = moments_from_measure(&one(FRAC_PI_2), 3).unwrap();
        for (a, b) in x.first_row().iter().zip([1.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(min_eigenvalue(&x.to_dense()).unwrap() > -1e-14);
    }
}
