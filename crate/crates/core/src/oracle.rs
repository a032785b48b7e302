//! Independent checkers and the randomized study harness.
//!
//! * [`dense_grid_lp_oracle`] solves the measure LP once over a fixed uniform
//!   grid, with no pricing, as a reference for column generation.
//! * [`random_instance`] draws reproducible `(B, d)` pairs keyed by `(seed, index)`.
//! * [`batch_rank_statistics`] solves and certifies a generated family and
//!   aggregates the observed ranks.
//! * [`verify_result`] re-derives every field of a result from raw inputs.
//! * [`psd_trials`] samples random atomic measures and checks that their
//!   moment Toeplitz matrices are positive semidefinite.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::solve_finite_lp;
use crate::measure::{Atom, AtomicMeasure};
use crate::problem::CompletionInstance;
use crate::reconstruct::{complete, measure_to_w, predicted_rank, CertifyTols};
use crate::silp::{max_bound_violation, BoundPolys, SilpOptions, SilpSolution, Side};
use crate::toeplitz::{min_eigenvalue, moments_from_measure, numerical_rank, spectral_norm, SymToeplitz, Toeplitz};

pub const DEFAULT_ORACLE_GRID: usize = 4096;

/// Solves the primal measure LP in one shot with atoms restricted to the
/// uniform grid `t_i = i pi / (grid_points - 1)`.
pub fn dense_grid_lp_oracle(
    inst: &CompletionInstance,
    grid_points: usize,
) -> Result<SilpSolution> {
    if grid_points < 64 {
        return Err(Error::Contract(format!(
            "grid oracle needs at least 64 points, got {grid_points}"
        )));
    }
    let m = inst.m();
    let bounds = BoundPolys::unit();
    if inst.is_homogeneous() {
        return Ok(SilpSolution {
            mu1: AtomicMeasure::empty(),
            mu2: AtomicMeasure::empty(),
            y: vec![0.0; m],
            objective: 0.0,
            iterations: 0,
            max_violation: 0.0,
            trace: Vec::new(),
        });
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| {
            if i + 1 == grid_points {
                PI
            } else {
                i as f64 * PI / (grid_points - 1) as f64
            }
        })
        .collect();
    let cols: Vec<Vec<f64>> = grid.iter().map(|&t| inst.column_at(t)).collect();
    let a = DMatrix::from_fn(m, 2 * grid_points, |i, j| {
        if j < grid_points {
            cols[j][i]
        } else {
            -cols[j - grid_points][i]
        }
    });
    let c: Vec<f64> = grid
        .iter()
        .map(|&t| bounds.cost(t, Side::Upper))
        .chain(grid.iter().map(|&t| bounds.cost(t, Side::Lower)))
        .collect();
    let sol = solve_finite_lp(&a, inst.d(), &c)?;
    let mut up = Vec::new();
    let mut lo = Vec::new();
    for (j, &w) in sol.z.iter().enumerate() {
        if w > 0.0 {
            if j < grid_points {
                up.push(Atom { t: grid[j], w });
            } else {
                lo.push(Atom { t: grid[j - grid_points], w });
            }
        }
    }
    let opts = SilpOptions::default();
    let max_violation = max_bound_violation(&inst.dual_poly(&sol.y), &bounds, &opts);
    Ok(SilpSolution {
        mu1: AtomicMeasure::new(up, 0.0)?,
        mu2: AtomicMeasure::new(lo, 0.0)?,
        y: sol.y,
        objective: sol.objective,
        iterations: sol.pivots,
        max_violation,
        trace: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EntryDist {
    #[default]
    Gaussian,
    /// Uniform on `[-1, 1]`.
    Uniform,
}

impl EntryDist {
    fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            EntryDist::Gaussian => StandardNormal.sample(rng),
            EntryDist::Uniform => rng.random_range(-1.0..=1.0),
        }
    }
}

/// Recipe for a reproducible family of random instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_min: usize,
    pub n_max: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub seed: u64,
    pub count: usize,
    pub dist: EntryDist,
    /// Draw `d = 0` instead of random right-hand sides.
    #[serde(default)]
    pub zero_rhs: bool,
}

impl GenSpec {
    pub fn new(n: (usize, usize), m: (usize, usize), seed: u64, count: usize) -> Self {
        Self {
            n_min: n.0,
            n_max: n.1,
            m_min: m.0,
            m_max: m.1,
            seed,
            count,
            dist: EntryDist::Gaussian,
            zero_rhs: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(msg));
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return bad(format!("invalid n range [{}, {}]", self.n_min, self.n_max));
        }
        if self.m_min == 0 || self.m_min > self.m_max {
            return bad(format!("invalid m range [{}, {}]", self.m_min, self.m_max));
        }
        if self.m_min > self.n_max {
            return bad(format!(
                "m_min = {} exceeds n_max = {}",
                self.m_min, self.n_max
            ));
        }
        Ok(())
    }
}

/// Instance `index` of the family. Each `(seed, index)` owns a separate
/// ChaCha stream, so results do not depend on generation order.
pub fn random_instance(gen: &GenSpec, index: usize) -> Result<CompletionInstance> {
    gen.validate()?;
    if index >= gen.count {
        return Err(Error::Contract(format!(
            "index {index} out of range for count {}",
            gen.count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    rng.set_stream(index as u64);
    // keep m <= n by drawing n no smaller than m_min
    let n = rng.random_range(gen.n_min.max(gen.m_min)..=gen.n_max);
    let m = rng.random_range(gen.m_min..=gen.m_max.min(n));
    for _ in 0..32 {
        let b = DMatrix::from_fn(m, n, |_, _| gen.dist.sample(&mut rng));
        let d: Vec<f64> = (0..m)
            .map(|_| {
                if gen.zero_rhs {
                    0.0
                } else {
                    gen.dist.sample(&mut rng)
                }
            })
            .collect();
        match CompletionInstance::new(b, d) {
            Ok(inst) => return Ok(inst),
            Err(Error::RankDeficient { .. }) | Err(Error::Contract(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "no full-row-rank B after 32 draws (seed {}, index {index})",
        gen.seed
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub index: usize,
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub rank_bound: usize,
    pub predicted_rank: usize,
    pub support: usize,
    pub residual: f64,
    pub objective: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAggregates {
    pub count: usize,
    pub min_rank: usize,
    pub median_rank: f64,
    pub max_rank: usize,
    /// Share of instances with `rank >= m`; an observation, not a guarantee.
    pub frac_rank_ge_m: f64,
    pub frac_rank_le_2m: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub gen: GenSpec,
    pub records: Vec<RankRecord>,
    pub aggregates: RankAggregates,
}

impl RankStats {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "index,n,m,rank,rank_bound,predicted_rank,support,residual,objective,iterations,wall_time_s\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:e},{},{},{}\n",
                r.index,
                r.n,
                r.m,
                r.rank,
                r.rank_bound,
                r.predicted_rank,
                r.support,
                r.residual,
                r.objective,
                r.iterations,
                r.wall_time_s
            ));
        }
        out
    }
}

fn aggregate(records: &[RankRecord]) -> RankAggregates {
    let count = records.len();
    let mut ranks: Vec<usize> = records.iter().map(|r| r.rank).collect();
    ranks.sort_unstable();
    let median_rank = if count == 0 {
        0.0
    } else if count % 2 == 1 {
        ranks[count / 2] as f64
    } else {
        (ranks[count / 2 - 1] + ranks[count / 2]) as f64 / 2.0
    };
    let frac = |pred: &dyn Fn(&RankRecord) -> bool| {
        if count == 0 {
            0.0
        } else {
            records.iter().filter(|r| pred(r)).count() as f64 / count as f64
        }
    };
    RankAggregates {
        count,
        min_rank: ranks.first().copied().unwrap_or(0),
        median_rank,
        max_rank: ranks.last().copied().unwrap_or(0),
        frac_rank_ge_m: frac(&|r| r.rank >= r.m),
        frac_rank_le_2m: frac(&|r| r.rank <= 2 * r.m),
        max_residual: records.iter().map(|r| r.residual).fold(0.0, f64::max),
    }
}

/// Solves and certifies every instance of `gen`, in parallel on `jobs`
/// threads (0 = rayon default). Records come back in index order regardless
/// of scheduling. The first failure aborts with its index.
pub fn batch_rank_statistics(
    gen: &GenSpec,
    opts: &SilpOptions,
    tols: &CertifyTols,
    jobs: usize,
) -> Result<RankStats> {
    gen.validate()?;
    let run_one = |index: usize| -> Result<RankRecord> {
        let wrap = |e: Error| Error::Certification {
            check: format!("batch instance (seed {}, index {index})", gen.seed),
            detail: e.to_string(),
        };
        let inst = random_instance(gen, index).map_err(wrap)?;
        let started = Instant::now();
        let res = complete(&inst, opts, tols).map_err(wrap)?;
        let wall_time_s = started.elapsed().as_secs_f64();
        if res.rank > 2 * res.m {
            return Err(wrap(Error::Internal("rank exceeds 2m".into())));
        }
        Ok(RankRecord {
            index,
            n: res.n,
            m: res.m,
            rank: res.rank,
            rank_bound: res.rank_bound,
            predicted_rank: res.predicted_rank,
            support: res.diagnostics.support_size,
            residual: res.residual,
            objective: res.objective,
            iterations: res.iterations,
            wall_time_s,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let results: Vec<Result<RankRecord>> =
        pool.install(|| (0..gen.count).into_par_iter().map(run_one).collect());
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(&records);
    Ok(RankStats {
        gen: gen.clone(),
        records,
        aggregates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Recomputes `T(x)`, residual, rank and the bound chain from the instance
/// and the result's raw fields. Failures are reported, not raised.
pub fn verify_result(
    inst: &CompletionInstance,
    result: &crate::reconstruct::CompletionResult,
    tols: &CertifyTols,
) -> VerifyReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, measured: f64, limit: f64| {
        checks.push(Check {
            name: name.into(),
            passed,
            measured,
            limit,
        })
    };
    let n = inst.n();
    let m = inst.m();
    let shape_ok = result.x.len() == n && result.n == n && result.m == m;
    push("shape", shape_ok, result.x.len() as f64, n as f64);
    if !shape_ok {
        return VerifyReport { checks };
    }

    let feas_tol = tols.feas_tol(inst);
    let residual = inst.residual_inf(&result.x);
    push("residual", residual <= feas_tol, residual, feas_tol);
    push(
        "residual_field",
        (residual - result.residual).abs() <= feas_tol,
        result.residual,
        residual,
    );

    let rank = SymToeplitz::new(result.x.clone())
        .and_then(|t| numerical_rank(&t.to_dense(), tols.rank_tol))
        .map_or(usize::MAX, |r| r);
    push("rank_recomputed", rank == result.rank, result.rank as f64, rank as f64);
    push("rank_bound_is_2m", result.rank_bound == 2 * m, result.rank_bound as f64, (2 * m) as f64);
    push("rank<=2m", rank <= 2 * m, rank as f64, (2 * m) as f64);

    let support = result.atoms1.len() + result.atoms2.len();
    push("support<=m", support <= m, support as f64, m as f64);

    match (
        AtomicMeasure::new(result.atoms1.iter().copied(), 0.0),
        AtomicMeasure::new(result.atoms2.iter().copied(), 0.0),
    ) {
        (Ok(mu1), Ok(mu2)) => {
            let predicted = predicted_rank(&mu1, &mu2);
            push(
                "predicted_rank_field",
                predicted == result.predicted_rank,
                result.predicted_rank as f64,
                predicted as f64,
            );
            push("rank<=predicted", rank <= predicted, rank as f64, predicted as f64);
            let w1 = measure_to_w(&mu1, n);
            let w2 = measure_to_w(&mu2, n);
            let scale = 1.0 + mu1.total_mass() + mu2.total_mass();
            let gap = result
                .x
                .iter()
                .zip(w1.iter().zip(&w2))
                .map(|(x, (a, b))| (x - (a - b)).abs())
                .fold(0.0, f64::max);
            push("x_matches_atoms", gap <= 1e-10 * scale, gap, 1e-10 * scale);
        }
        _ => push("atoms_valid", false, f64::NAN, 0.0),
    }
    VerifyReport { checks }
}

/// Random atomic measure with 1..=`max_atoms` atoms. With `distinct`, nodes
/// are kept at least `1e-3` apart; endpoints are hit with small probability.
pub fn random_measure(rng: &mut impl Rng, max_atoms: usize, distinct: bool) -> AtomicMeasure {
    let count = rng.random_range(1..=max_atoms.max(1));
    let mut atoms: Vec<Atom> = Vec::with_capacity(count);
    while atoms.len() < count {
        let u: f64 = rng.random();
        let t = if u < 0.05 {
            0.0
        } else if u < 0.10 {
            PI
        } else {
            rng.random_range(0.0..PI)
        };
        if distinct && atoms.iter().any(|a| (a.t - t).abs() < 1e-3) {
            continue;
        }
        let w = rng.random_range(0.1..2.0);
        atoms.push(Atom { t, w });
    }
    AtomicMeasure::new(atoms, 0.0).expect("valid random atoms")
}

/// Well-separated atoms: interior nodes in `[min_sep, pi - min_sep]`, pairwise
/// at least `min_sep` apart, so `e^{+-i t}` stay separated on the unit circle.
/// With `endpoints`, atoms at 0 and pi are each added with probability 1/3.
pub fn generic_measure(
    rng: &mut impl Rng,
    max_atoms: usize,
    min_sep: f64,
    endpoints: bool,
) -> AtomicMeasure {
    let count = rng.random_range(1..=max_atoms.max(1));
    let mut nodes: Vec<f64> = Vec::with_capacity(count + 2);
    let mut attempts = 0;
    while nodes.len() < count && attempts < 10_000 {
        attempts += 1;
        let t = rng.random_range(min_sep..PI - min_sep);
        if nodes.iter().all(|s| (s - t).abs() >= min_sep) {
            nodes.push(t);
        }
    }
    if endpoints {
        for end in [0.0, PI] {
            if rng.random_range(0..3) == 0 {
                nodes.push(end);
            }
        }
    }
    let atoms: Vec<Atom> = nodes
        .into_iter()
        .map(|t| Atom {
            t,
            w: rng.random_range(0.5..2.0),
        })
        .collect();
    AtomicMeasure::new(atoms, 0.0).expect("valid random atoms")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdTrial {
    pub trial: usize,
    pub n: usize,
    pub atoms: Vec<Atom>,
    pub min_eigenvalue: f64,
    pub norm: f64,
    pub passed: bool,
}

/// Moment matrices of random atomic measures must be PSD:
/// `lambda_min >= -1e-9 (1 + ||T||_2)`.
pub fn psd_trials(seed: u64, trials: usize, max_n: usize) -> Result<Vec<PsdTrial>> {
    (0..trials)
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let n = rng.random_range(1..=max_n.max(1));
            let mu = random_measure(&mut rng, 8, false);
            let t = moments_from_measure(&mu, n)?.to_dense();
            let lam = min_eigenvalue(&t)?;
            let norm = spectral_norm(&t);
            Ok(PsdTrial {
                trial,
                n,
                atoms: mu.atoms().to_vec(),
                min_eigenvalue: lam,
                norm,
                passed: lam >= -1e-9 * (1.0 + norm),
            })
        })
        .collect()
}
