//! Dense two-phase revised simplex for `min c'z  s.t.  A z = b, z >= 0`.
//!
//! Small dense problems only (tens of rows, up to a few thousand columns).
//! The basis matrix is refactored from the original columns at every pivot,
//! so there is no drift in `B^-1`. Only vertex solutions are returned: at most
//! `m` entries of `z` are positive.
//!
//! Pricing is Dantzig's most-negative rule. After a run of degenerate pivots
//! the solver switches to Bland's smallest-index rule for both the entering
//! and the leaving choice until the next nondegenerate step, which rules out
//! cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// Structural columns in the final basis, ascending.
    pub basis: Vec<usize>,
    pub objective: f64,
    pub pivots: usize,
}

/// Solves `min c'z  s.t.  A z = b, z >= 0` and returns an optimal basic solution.
pub fn solve_finite_lp(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let (m, p) = a.shape();
    if p == 0 || c.len() != p || b.len() != m {
        return Err(Error::Shape(format!(
            "A is {m}x{p}, b has {} entries, c has {}",
            b.len(),
            c.len()
        )));
    }
    let mut lp = Simplex::new(b.to_vec());
    for (j, &cost) in c.iter().enumerate() {
        lp.add_column(a.column(j).as_slice(), cost);
    }
    match lp.solve()? {
        Status::Optimal => Ok(lp.solution()),
        Status::Infeasible {
            farkas,
            infeasibility,
        } => Err(Error::Infeasible {
            farkas,
            infeasibility,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Status {
    Optimal,
    Infeasible { farkas: Vec<f64>, infeasibility: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// Restartable simplex state. Variables `0..m` are artificials `sign(b_i) e_i`;
/// variable `m + j` is structural column `j`. Columns may be appended between
/// solves and the current basis is reused as a warm start.
#[derive(Debug, Clone)]
pub(crate) struct Simplex {
    m: usize,
    rhs: Vec<f64>,
    art_sign: Vec<f64>,
    cols: Vec<f64>,
    costs: Vec<f64>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    y: Vec<f64>,
    pub pivots: usize,
    pub max_pivots: usize,
    feas_tol: f64,
    opt_tol: f64,
}

impl Simplex {
    pub fn new(rhs: Vec<f64>) -> Self {
        let m = rhs.len();
        let art_sign = rhs.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let bnorm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Self {
            m,
            xb: rhs.iter().map(|v| v.abs()).collect(),
            rhs,
            art_sign,
            cols: Vec::new(),
            costs: Vec::new(),
            basis: (0..m).collect(),
            y: vec![0.0; m],
            pivots: 0,
            max_pivots: 0,
            feas_tol: 1e-11 * (1.0 + bnorm),
            opt_tol: 1e-11,
        }
    }

    pub fn num_columns(&self) -> usize {
        self.costs.len()
    }

    pub fn add_column(&mut self, col: &[f64], cost: f64) -> usize {
        assert_eq!(col.len(), self.m);
        self.cols.extend_from_slice(col);
        self.costs.push(cost);
        self.opt_tol = self.opt_tol.max(1e-11 * cost.abs());
        self.costs.len() - 1
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    /// Replaces the basis with the given structural columns, padding with
    /// artificials, provided the result is nonsingular and primal feasible.
    pub fn try_structural_basis(&mut self, structural: &[usize]) -> bool {
        if structural.len() > self.m {
            return false;
        }
        let mut basis: Vec<usize> = structural.iter().map(|j| self.m + j).collect();
        for i in 0..self.m {
            if basis.len() == self.m {
                break;
            }
            let candidate = {
                let mut b = basis.clone();
                b.push(i);
                b
            };
            if self.basis_matrix(&candidate).rank(1e-12) == candidate.len() {
                basis = candidate;
            }
        }
        if basis.len() != self.m {
            return false;
        }
        let Some(lu_xb) = self.basis_matrix(&basis).lu().solve(&DVector::from_column_slice(&self.rhs))
        else {
            return false;
        };
        if lu_xb.iter().any(|&v| v < -self.feas_tol) {
            return false;
        }
        self.basis = basis;
        self.xb = lu_xb.iter().copied().collect();
        true
    }

    fn var_column(&self, var: usize, out: &mut [f64]) {
        if var < self.m {
            out.fill(0.0);
            out[var] = self.art_sign[var];
        } else {
            out.copy_from_slice(self.column(var - self.m));
        }
    }

    fn basis_matrix(&self, basis: &[usize]) -> DMatrix<f64> {
        let mut bm = DMatrix::zeros(self.m, basis.len());
        let mut buf = vec![0.0; self.m];
        for (c, &var) in basis.iter().enumerate() {
            self.var_column(var, &mut buf);
            bm.column_mut(c).copy_from_slice(&buf);
        }
        bm
    }

    fn phase_cost(&self, var: usize, phase: Phase) -> f64 {
        match (phase, var < self.m) {
            (Phase::One, true) => 1.0,
            (Phase::One, false) => 0.0,
            (Phase::Two, true) => 0.0,
            (Phase::Two, false) => self.costs[var - self.m],
        }
    }

    fn artificial_level(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&v, _)| v < self.m)
            .map(|(_, &x)| x.max(0.0))
            .sum()
    }

    pub fn solve(&mut self) -> Result<Status> {
        if self.m == 0 {
            return Ok(Status::Optimal);
        }
        if self.max_pivots == 0 {
            self.max_pivots = 50 * (self.m + self.num_columns()) + 1000;
        }
        self.refresh()?;
        if self.artificial_level() > self.feas_tol {
            self.run(Phase::One)?;
            let level = self.artificial_level();
            if level > self.feas_tol {
                return Ok(Status::Infeasible {
                    farkas: self.y.clone(),
                    infeasibility: level,
                });
            }
        }
        self.run(Phase::Two)?;
        Ok(Status::Optimal)
    }

    /// Recomputes `x_B` for the current basis.
    fn refresh(&mut self) -> Result<()> {
        let lu = self.basis_matrix(&self.basis).lu();
        let xb = lu
            .solve(&DVector::from_column_slice(&self.rhs))
            .ok_or(Error::SingularBasis)?;
        self.xb = xb.iter().copied().collect();
        Ok(())
    }

    fn run(&mut self, phase: Phase) -> Result<()> {
        let m = self.m;
        let nvars = m + self.num_columns();
        let mut degenerate_run = 0usize;
        let mut buf = vec![0.0; m];
        let start = self.pivots;
        loop {
            let bm = self.basis_matrix(&self.basis);
            let lu = bm.clone().lu();
            let lut = bm.transpose().lu();
            let xb = lu
                .solve(&DVector::from_column_slice(&self.rhs))
                .ok_or(Error::SingularBasis)?;
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&v| self.phase_cost(v, phase)));
            let y = lut.solve(&cb).ok_or(Error::SingularBasis)?;
            self.xb = xb.iter().copied().collect();
            self.y = y.iter().copied().collect();

            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let mut in_basis = vec![false; nvars];
            for &v in &self.basis {
                in_basis[v] = true;
            }
            let mut entering: Option<(usize, f64)> = None;
            let first = if phase == Phase::One { 0 } else { m };
            for (var, &basic) in in_basis.iter().enumerate().skip(first) {
                if basic {
                    continue;
                }
                self.var_column(var, &mut buf);
                let dot: f64 = buf.iter().zip(&self.y).map(|(a, b)| a * b).sum();
                let reduced = self.phase_cost(var, phase) - dot;
                if reduced < -self.opt_tol {
                    match entering {
                        _ if bland => {
                            entering = Some((var, reduced));
                            break;
                        }
                        Some((_, best)) if reduced >= best => {}
                        _ => entering = Some((var, reduced)),
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(());
            };

            self.var_column(q, &mut buf);
            let dir = lu
                .solve(&DVector::from_column_slice(&buf))
                .ok_or(Error::SingularBasis)?;

            // (row, ratio, |pivot|)
            let mut leave: Option<(usize, f64, f64)> = None;
            for i in 0..m {
                let di = dir[i];
                let ratio = if phase == Phase::Two && self.basis[i] < m && di.abs() > PIVOT_TOL {
                    // artificials stay pinned at zero once phase 1 is done
                    0.0
                } else if di > PIVOT_TOL {
                    self.xb[i].max(0.0) / di
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((r, best, piv)) => {
                        let tie = 1e-12 * (1.0 + best);
                        if ratio < best - tie {
                            true
                        } else if ratio <= best + tie {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                di.abs() > piv
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio, di.abs()));
                }
            }
            let Some((r, step, _)) = leave else {
                if phase == Phase::One {
                    return Err(Error::Internal("phase-1 objective unbounded".into()));
                }
                let mut ray = vec![0.0; self.num_columns()];
                ray[q - m] = 1.0;
                for (i, &v) in self.basis.iter().enumerate() {
                    if v >= m {
                        ray[v - m] = -dir[i];
                    }
                }
                return Err(Error::Unbounded { ray });
            };

            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.basis[r] = q;
            self.pivots += 1;
            if self.pivots - start > self.max_pivots {
                return Err(Error::LpIterationLimit(self.max_pivots));
            }
        }
    }

    /// Structural primal values, clamped at zero.
    pub fn primal(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.num_columns()];
        for (&v, &x) in self.basis.iter().zip(&self.xb) {
            if v >= self.m {
                z[v - self.m] = x.max(0.0);
            }
        }
        z
    }

    pub fn duals(&self) -> &[f64] {
        &self.y
    }

    pub fn structural_basis(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self
            .basis
            .iter()
            .filter(|&&v| v >= self.m)
            .map(|v| v - self.m)
            .collect();
        b.sort_unstable();
        b
    }

    pub fn solution(&self) -> LpSolution {
        let z = self.primal();
        let objective = z.iter().zip(&self.costs).map(|(a, b)| a * b).sum();
        LpSolution {
            z,
            y: self.y.clone(),
            basis: self.structural_basis(),
            objective,
            pivots: self.pivots,
        }
    }
}
