//! Semi-infinite LP over pairs of atomic measures on `[0, pi]`.
//!
//! Primal:
//!
//! ```text
//! min  sum_t upper(t) mu1(t) - sum_t lower(t) mu2(t)
//! s.t. sum_t a(t) mu1(t) - sum_t a(t) mu2(t) = d,   mu1, mu2 >= 0
//! ```
//!
//! where `a(t) = (a_1(t), ..., a_m(t))` are the constraint cosine series.
//! Dual:
//!
//! ```text
//! max  d'y   s.t.  lower(t) <= sum_k a_k(t) y_k <= upper(t)   for all t in [0, pi]
//! ```
//!
//! With the default bounds `upper = 1`, `lower = -1` the primal objective is
//! total mass. The primal is solved by column generation over a restricted
//! master LP and returns a basic solution, hence at most `m` atoms in total.
//! The dual is solved independently by an exchange method on finite point
//! sets; the two are compared by [`cross_check_duality`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Simplex, Status};
use crate::measure::{Atom, AtomicMeasure, DEFAULT_MERGE_TOL};
use crate::problem::CompletionInstance;
use crate::toeplitz::{rank_from_singular_values, singular_values};
use crate::trigpoly::{
    global_extrema, local_maxima, CosPoly, ExtremumMode, DEFAULT_COARSE_GRID, DEFAULT_REFINE_TOL,
};

/// Which bound an active point touches, equivalently which measure an atom
/// belongs to: `Upper` pairs with `mu1`, `Lower` with `mu2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// Two-sided bounds `lower(t) < 0 < upper(t)` on the dual row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPolys {
    lower: CosPoly,
    upper: CosPoly,
}

impl BoundPolys {
    pub fn new(lower: CosPoly, upper: CosPoly) -> Result<Self> {
        let (t_up, min_up) =
            global_extrema(&upper, ExtremumMode::Min, DEFAULT_COARSE_GRID, DEFAULT_REFINE_TOL);
        if !(min_up > 0.0) {
            return Err(Error::InvalidBounds(format!(
                "upper bound reaches {min_up} at t = {t_up}"
            )));
        }
        let (t_lo, max_lo) =
            global_extrema(&lower, ExtremumMode::Max, DEFAULT_COARSE_GRID, DEFAULT_REFINE_TOL);
        if !(max_lo < 0.0) {
            return Err(Error::InvalidBounds(format!(
                "lower bound reaches {max_lo} at t = {t_lo}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `lower = -1`, `upper = +1`: the total-mass objective.
    pub fn unit() -> Self {
        Self {
            lower: CosPoly::constant(-1.0),
            upper: CosPoly::constant(1.0),
        }
    }

    pub fn lower(&self) -> &CosPoly {
        &self.lower
    }

    pub fn upper(&self) -> &CosPoly {
        &self.upper
    }

    /// Objective coefficient of an atom at `t` on `side`.
    pub fn cost(&self, t: f64, side: Side) -> f64 {
        match side {
            Side::Upper => self.upper.value(t),
            Side::Lower => -self.lower.value(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilpOptions {
    pub price_tol: f64,
    /// Feasibility tolerance relative to `1 + ||d||_inf`.
    pub feas_tol_rel: f64,
    pub merge_tol: f64,
    pub max_iters: usize,
    pub coarse_grid: usize,
    pub refine_tol: f64,
    /// Columns (or points) added per pricing round and side; 0 means `max(m, 4)`.
    pub columns_per_round: usize,
    pub cs_tol: f64,
}

impl Default for SilpOptions {
    fn default() -> Self {
        Self {
            price_tol: 1e-8,
            feas_tol_rel: 1e-9,
            merge_tol: DEFAULT_MERGE_TOL,
            max_iters: 500,
            coarse_grid: DEFAULT_COARSE_GRID,
            refine_tol: DEFAULT_REFINE_TOL,
            columns_per_round: 0,
            cs_tol: 1e-6,
        }
    }
}

impl SilpOptions {
    pub fn feas_tol(&self, inst: &CompletionInstance) -> f64 {
        self.feas_tol_rel * (1.0 + inst.d_inf_norm())
    }

    fn per_round(&self, m: usize) -> usize {
        if self.columns_per_round == 0 {
            m.max(4)
        } else {
            self.columns_per_round
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// `"phase1"` while the master is infeasible, `"phase2"` afterwards.
    pub phase: String,
    pub value: f64,
    pub max_violation: f64,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SilpSolution {
    pub mu1: AtomicMeasure,
    pub mu2: AtomicMeasure,
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub trace: Vec<TraceEntry>,
}

impl SilpSolution {
    pub fn support_size(&self) -> usize {
        self.mu1.len() + self.mu2.len()
    }

    /// `sum a(t) mu1 - sum a(t) mu2`.
    pub fn contribution(&self, inst: &CompletionInstance) -> Vec<f64> {
        let mut out = vec![0.0; inst.m()];
        for (mu, sign) in [(&self.mu1, 1.0), (&self.mu2, -1.0)] {
            for atom in mu.atoms() {
                for (o, a) in out.iter_mut().zip(inst.column_at(atom.t)) {
                    *o += sign * atom.w * a;
                }
            }
        }
        out
    }

    pub fn constraint_residual(&self, inst: &CompletionInstance) -> f64 {
        self.contribution(inst)
            .iter()
            .zip(inst.d())
            .fold(0.0, |acc, (c, d)| acc.max((c - d).abs()))
    }

    /// Largest gap between the dual row sum and the bound each atom should sit on.
    pub fn complementary_slackness_residual(
        &self,
        inst: &CompletionInstance,
        bounds: &BoundPolys,
        y: &[f64],
    ) -> f64 {
        let s = inst.dual_poly(y);
        let up = self
            .mu1
            .atoms()
            .iter()
            .map(|a| (s.value(a.t) - bounds.upper.value(a.t)).abs());
        let lo = self
            .mu2
            .atoms()
            .iter()
            .map(|a| (s.value(a.t) - bounds.lower.value(a.t)).abs());
        up.chain(lo).fold(0.0, f64::max)
    }

    fn empty(m: usize) -> Self {
        Self {
            mu1: AtomicMeasure::empty(),
            mu2: AtomicMeasure::empty(),
            y: vec![0.0; m],
            objective: 0.0,
            iterations: 0,
            max_violation: 0.0,
            trace: Vec::new(),
        }
    }
}

/// Finds up to `limit` refined local maxima of `p` exceeding `threshold`,
/// strongest first.
fn violators(p: &CosPoly, threshold: f64, limit: usize, opts: &SilpOptions) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = local_maxima(p, opts.coarse_grid, opts.refine_tol)
        .into_iter()
        .filter(|&(_, val)| val > threshold)
        .collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    v.truncate(limit);
    v
}

pub(crate) fn max_bound_violation(s: &CosPoly, bounds: &BoundPolys, opts: &SilpOptions) -> f64 {
    let over = s - &bounds.upper;
    let under = &bounds.lower - s;
    let (_, a) = global_extrema(&over, ExtremumMode::Max, opts.coarse_grid, opts.refine_tol);
    let (_, b) = global_extrema(&under, ExtremumMode::Max, opts.coarse_grid, opts.refine_tol);
    a.max(b).max(0.0)
}

fn summarize_trace(trace: &[TraceEntry]) -> String {
    let tail = &trace[trace.len().saturating_sub(5)..];
    tail.iter()
        .map(|e| {
            format!(
                "#{} {} value={:.6e} viol={:.3e} cols={}",
                e.iteration, e.phase, e.value, e.max_violation, e.columns
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Column generation on the primal measure LP.
pub fn solve_primal_column_generation(
    inst: &CompletionInstance,
    bounds: &BoundPolys,
    opts: &SilpOptions,
) -> Result<SilpSolution> {
    let m = inst.m();
    if inst.is_homogeneous() {
        return Ok(SilpSolution::empty(m));
    }
    let per_round = opts.per_round(m);
    let mut lp = Simplex::new(inst.d().to_vec());
    let mut columns: Vec<(f64, Side)> = Vec::new();
    let mut trace = Vec::new();
    let mut max_violation = f64::INFINITY;

    let add_column = |lp: &mut Simplex, columns: &mut Vec<(f64, Side)>, t: f64, side: Side| {
        if columns
            .iter()
            .any(|&(u, s)| s == side && (u - t).abs() <= opts.merge_tol)
        {
            return false;
        }
        let mut col = inst.column_at(t);
        if side == Side::Lower {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        lp.add_column(&col, bounds.cost(t, side));
        columns.push((t, side));
        true
    };

    for iteration in 1..=opts.max_iters {
        let status = lp.solve().map_err(|e| match e {
            Error::Unbounded { .. } => {
                Error::Internal("restricted master unbounded despite positive costs".into())
            }
            other => other,
        })?;
        let mut added = 0;
        match status {
            Status::Infeasible {
                farkas,
                infeasibility,
            } => {
                // Farkas pricing: any column with y'col > 0 cuts the certificate.
                let s = inst.dual_poly(&farkas);
                let ups = violators(&s, opts.price_tol, per_round, opts);
                let los = violators(&-&s, opts.price_tol, per_round, opts);
                let viol = ups.first().map_or(0.0, |v| v.1).max(los.first().map_or(0.0, |v| v.1));
                trace.push(TraceEntry {
                    iteration,
                    phase: "phase1".into(),
                    value: infeasibility,
                    max_violation: viol,
                    columns: columns.len(),
                });
                for (t, _) in ups {
                    added += add_column(&mut lp, &mut columns, t, Side::Upper) as usize;
                }
                for (t, _) in los {
                    added += add_column(&mut lp, &mut columns, t, Side::Lower) as usize;
                }
                if added == 0 {
                    return Err(Error::Internal(format!(
                        "restricted master infeasible (residual {infeasibility:e}) but pricing found no column; the full measure LP is always feasible for full-row-rank B"
                    )));
                }
            }
            Status::Optimal => {
                let y = lp.duals().to_vec();
                let s = inst.dual_poly(&y);
                max_violation = max_bound_violation(&s, bounds, opts);
                let objective = lp.solution().objective;
                trace.push(TraceEntry {
                    iteration,
                    phase: "phase2".into(),
                    value: objective,
                    max_violation,
                    columns: columns.len(),
                });
                if max_violation > opts.price_tol {
                    let over = &s - &bounds.upper;
                    let under = &bounds.lower - &s;
                    for (t, _) in violators(&over, opts.price_tol, per_round, opts) {
                        added += add_column(&mut lp, &mut columns, t, Side::Upper) as usize;
                    }
                    for (t, _) in violators(&under, opts.price_tol, per_round, opts) {
                        added += add_column(&mut lp, &mut columns, t, Side::Lower) as usize;
                    }
                }
                if added == 0 {
                    return finish_primal(inst, bounds, opts, &lp, &columns, y, iteration, max_violation, trace);
                }
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        max_violation,
        trace: summarize_trace(&trace),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish_primal(
    inst: &CompletionInstance,
    bounds: &BoundPolys,
    opts: &SilpOptions,
    lp: &Simplex,
    columns: &[(f64, Side)],
    y: Vec<f64>,
    iterations: usize,
    max_violation: f64,
    trace: Vec<TraceEntry>,
) -> Result<SilpSolution> {
    let z = lp.primal();
    let drop_tol = 1e-14 * (1.0 + inst.d_inf_norm());
    let mut up = Vec::new();
    let mut lo = Vec::new();
    for (&(t, side), &w) in columns.iter().zip(&z) {
        if w > drop_tol {
            match side {
                Side::Upper => up.push(Atom { t, w }),
                Side::Lower => lo.push(Atom { t, w }),
            }
        }
    }
    let mu1 = AtomicMeasure::new(up, opts.merge_tol)?;
    let mu2 = AtomicMeasure::new(lo, opts.merge_tol)?;
    let objective = mu1
        .atoms()
        .iter()
        .map(|a| a.w * bounds.cost(a.t, Side::Upper))
        .chain(mu2.atoms().iter().map(|a| a.w * bounds.cost(a.t, Side::Lower)))
        .sum();
    Ok(SilpSolution {
        mu1,
        mu2,
        y,
        objective,
        iterations,
        max_violation,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivePoint {
    pub t: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub y: Vec<f64>,
    pub active: Vec<ActivePoint>,
    /// `d'y`.
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
}

/// Exchange method on the dual: solve the LP restricted to a finite point
/// set, add the most violated points, repeat.
pub fn solve_dual_exchange(
    inst: &CompletionInstance,
    bounds: &BoundPolys,
    opts: &SilpOptions,
) -> Result<DualSolution> {
    let m = inst.m();
    if inst.is_homogeneous() {
        return Ok(DualSolution {
            y: vec![0.0; m],
            active: Vec::new(),
            objective: 0.0,
            iterations: 0,
            max_violation: 0.0,
        });
    }
    let per_round = opts.per_round(m);
    // n distinct nodes make the constraint vectors span R^m, so the first
    // relaxation is already bounded.
    let start = inst.n().max(m).max(2);
    let mut points: Vec<f64> = (0..start)
        .map(|i| if i + 1 == start { PI } else { i as f64 * PI / (start - 1) as f64 })
        .collect();
    let mut max_violation = f64::INFINITY;

    for iteration in 1..=opts.max_iters {
        let y = solve_dual_relaxation(inst, bounds, &points)?;
        let s = inst.dual_poly(&y);
        max_violation = max_bound_violation(&s, bounds, opts);
        let mut added = 0;
        if max_violation > opts.price_tol {
            let over = &s - &bounds.upper;
            let under = &bounds.lower - &s;
            let new: Vec<f64> = violators(&over, opts.price_tol, per_round, opts)
                .into_iter()
                .chain(violators(&under, opts.price_tol, per_round, opts))
                .map(|(t, _)| t)
                .collect();
            for t in new {
                if points.iter().all(|&u| (u - t).abs() > opts.merge_tol) {
                    points.push(t);
                    added += 1;
                }
            }
        }
        if added == 0 {
            let mut active = Vec::new();
            points.sort_by(f64::total_cmp);
            for &t in &points {
                let v = s.value(t);
                if (v - bounds.upper.value(t)).abs() <= opts.cs_tol {
                    active.push(ActivePoint { t, side: Side::Upper });
                } else if (v - bounds.lower.value(t)).abs() <= opts.cs_tol {
                    active.push(ActivePoint { t, side: Side::Lower });
                }
            }
            let objective = y.iter().zip(inst.d()).map(|(a, b)| a * b).sum();
            return Ok(DualSolution {
                y,
                active,
                objective,
                iterations: iteration,
                max_violation,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        max_violation,
        trace: format!("dual exchange with {} points", points.len()),
    })
}

/// `max d'y  s.t.  lower(t) <= a(t)'y <= upper(t)` over the given points, in
/// standard form with `y = u - v` and one slack per inequality.
fn solve_dual_relaxation(
    inst: &CompletionInstance,
    bounds: &BoundPolys,
    points: &[f64],
) -> Result<Vec<f64>> {
    let m = inst.m();
    let k = points.len();
    let rows = 2 * k;
    let mut rhs = Vec::with_capacity(rows);
    let cols_at: Vec<Vec<f64>> = points.iter().map(|&t| inst.column_at(t)).collect();
    for &t in points {
        rhs.push(bounds.upper.value(t));
    }
    for &t in points {
        rhs.push(-bounds.lower.value(t));
    }
    let mut lp = Simplex::new(rhs);
    let mut col = vec![0.0; rows];
    for (sign, obj) in [(1.0, -1.0), (-1.0, 1.0)] {
        for i in 0..m {
            for (r, a) in cols_at.iter().enumerate() {
                col[r] = sign * a[i];
                col[k + r] = -sign * a[i];
            }
            lp.add_column(&col, obj * inst.d()[i]);
        }
    }
    for r in 0..rows {
        col.fill(0.0);
        col[r] = 1.0;
        lp.add_column(&col, 0.0);
    }
    let slacks: Vec<usize> = (2 * m..2 * m + rows).collect();
    if !lp.try_structural_basis(&slacks) {
        return Err(Error::Internal("slack basis of the dual relaxation is not feasible".into()));
    }
    match lp.solve() {
        Ok(Status::Optimal) => {
            let z = lp.primal();
            Ok((0..m).map(|i| z[i] - z[m + i]).collect())
        }
        Ok(Status::Infeasible { .. }) => Err(Error::Internal(
            "dual relaxation infeasible although y = 0 is strictly feasible".into(),
        )),
        Err(Error::Unbounded { .. }) => Err(Error::Internal(
            "dual relaxation unbounded on a point set spanning R^m".into(),
        )),
        Err(e) => Err(e),
    }
}

/// Selects from the active points a subset whose constraint vectors
/// `(a_1(t), ..., a_m(t))` are linearly independent, at most `m` of them.
/// Upper-side points go to the first list, lower-side points to the second.
pub fn prune_support_independent(
    active: &[ActivePoint],
    inst: &CompletionInstance,
) -> (Vec<f64>, Vec<f64>) {
    let m = inst.m();
    let vectors: Vec<Vec<f64>> = active.iter().map(|p| inst.column_at(p.t)).collect();
    let chosen = independent_subset(&vectors, m, 1e-10);
    let mut delta1 = Vec::new();
    let mut delta2 = Vec::new();
    for i in chosen {
        match active[i].side {
            Side::Upper => delta1.push(active[i].t),
            Side::Lower => delta2.push(active[i].t),
        }
    }
    delta1.sort_by(f64::total_cmp);
    delta2.sort_by(f64::total_cmp);
    (delta1, delta2)
}

/// Column-pivoted Gram-Schmidt: repeatedly takes the vector with the largest
/// residual norm until `limit` are taken or the residuals fall below
/// `tol * max_norm`. Returns indices in selection order.
pub(crate) fn independent_subset(vectors: &[Vec<f64>], limit: usize, tol: f64) -> Vec<usize> {
    let max_norm = vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Vec::new();
    }
    let mut residual: Vec<Vec<f64>> = vectors.to_vec();
    let mut taken = vec![false; vectors.len()];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut order = Vec::new();
    while order.len() < limit {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in residual.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.is_none_or(|(_, b)| norm > b) {
                best = Some((i, norm));
            }
        }
        let Some((i, norm)) = best else { break };
        if norm <= tol * max_norm {
            break;
        }
        taken[i] = true;
        order.push(i);
        let q: Vec<f64> = residual[i].iter().map(|x| x / norm).collect();
        for (j, r) in residual.iter_mut().enumerate() {
            if taken[j] {
                continue;
            }
            // two passes of orthogonalization for stability
            for _ in 0..2 {
                let dot: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(&q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        basis.push(q);
    }
    debug_assert_eq!(
        rank_of_columns(&order.iter().map(|&i| vectors[i].clone()).collect::<Vec<_>>(), tol),
        order.len()
    );
    order
}

/// Numerical rank of the matrix whose columns are `vectors`.
pub fn rank_of_columns(vectors: &[Vec<f64>], tol_rel: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = vectors[0].len();
    let a = DMatrix::from_fn(m, vectors.len(), |i, j| vectors[j][i]);
    rank_from_singular_values(&singular_values(&a), tol_rel)
}

/// Builds a primal solution from the dual's active points the way the
/// existence argument does: keep an independent subset of active points and
/// solve for nonnegative weights on them. Falls back to every active point
/// when the pruned subset cannot carry a feasible measure pair.
pub fn primal_from_dual(
    inst: &CompletionInstance,
    bounds: &BoundPolys,
    dual: &DualSolution,
    opts: &SilpOptions,
) -> Result<SilpSolution> {
    let m = inst.m();
    if inst.is_homogeneous() {
        return Ok(SilpSolution::empty(m));
    }
    let (d1, d2) = prune_support_independent(&dual.active, inst);
    let pruned: Vec<ActivePoint> = d1
        .iter()
        .map(|&t| ActivePoint { t, side: Side::Upper })
        .chain(d2.iter().map(|&t| ActivePoint { t, side: Side::Lower }))
        .collect();
    let attempt = |pts: &[ActivePoint]| -> Result<SilpSolution> {
        if pts.is_empty() {
            return Err(Error::Infeasible {
                farkas: Vec::new(),
                infeasibility: inst.d_inf_norm(),
            });
        }
        let a = DMatrix::from_fn(m, pts.len(), |i, j| {
            let v = inst.constraint_polys()[i].value(pts[j].t);
            if pts[j].side == Side::Lower {
                -v
            } else {
                v
            }
        });
        let c: Vec<f64> = pts.iter().map(|p| bounds.cost(p.t, p.side)).collect();
        let sol = crate::lp::solve_finite_lp(&a, inst.d(), &c)?;
        let mut up = Vec::new();
        let mut lo = Vec::new();
        for (p, &w) in pts.iter().zip(&sol.z) {
            if w > 0.0 {
                let atom = Atom { t: p.t, w };
                match p.side {
                    Side::Upper => up.push(atom),
                    Side::Lower => lo.push(atom),
                }
            }
        }
        Ok(SilpSolution {
            mu1: AtomicMeasure::new(up, opts.merge_tol)?,
            mu2: AtomicMeasure::new(lo, opts.merge_tol)?,
            y: dual.y.clone(),
            objective: sol.objective,
            iterations: dual.iterations,
            max_violation: dual.max_violation,
            trace: Vec::new(),
        })
    };
    match attempt(&pruned) {
        Ok(sol) if sol.constraint_residual(inst) <= opts.feas_tol(inst) => Ok(sol),
        _ => attempt(&dual.active),
    }
}

/// True iff the primal and dual objectives agree to `tol * (1 + |dual|)`.
pub fn cross_check_duality(primal: &SilpSolution, dual: &DualSolution, tol: f64) -> bool {
    (primal.objective - dual.objective).abs() <= tol * (1.0 + dual.objective.abs())
}
