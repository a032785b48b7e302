//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 solver failure,
//! 4 certification or verification failure. Standard output carries one
//! summary line; everything else goes to standard error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::oracle::{batch_rank_statistics, psd_trials, random_instance, verify_result, EntryDist, GenSpec};
use crate::problem::CompletionInstance;
use crate::reconstruct::{complete, CertifyTols, CompletionResult};
use crate::silp::SilpOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CERT: i32 = 4;

/// Maps an error to its outcome class.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Contract(_)
        | Error::Shape(_)
        | Error::Domain(_)
        | Error::EmptyMask
        | Error::InconsistentDiagonal { .. }
        | Error::RankDeficient { .. }
        | Error::Parse(_)
        | Error::InvalidBounds(_)
        | Error::Io(_) => EXIT_USAGE,
        Error::Infeasible { .. }
        | Error::Unbounded { .. }
        | Error::LpIterationLimit(_)
        | Error::SingularBasis
        | Error::NonConvergence { .. }
        | Error::Internal(_) => EXIT_SOLVER,
        Error::Certification { .. } | Error::Generation(_) => EXIT_CERT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "toepcomp", version, about = "Symmetric Toeplitz completion with rank <= 2m")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and write a certified result.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write random instances to a directory.
    Gen {
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Solve and certify a random family; write a rank-statistics report.
    Batch {
        #[arg(long)]
        output: PathBuf,
        /// Also write per-instance records as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Re-check a result file against its instance.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        result: PathBuf,
        /// Optional JSON verdict.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_parser = positive_f64)]
        tol_rank: Option<f64>,
        #[arg(long, value_parser = positive_f64)]
        feas_tol: Option<f64>,
    },
    /// Check that random atomic measures give PSD moment matrices.
    #[command(name = "lemma1-check")]
    PsdCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, alias = "trials", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
        n_max: u64,
        /// Per-trial log (one JSON line per trial); standard error if absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Gaussian,
    Uniform,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 4)]
    n_min: usize,
    #[arg(long, default_value_t = 16)]
    n_max: usize,
    #[arg(long, default_value_t = 1)]
    m_min: usize,
    #[arg(long, default_value_t = 8)]
    m_max: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: DistArg,
}

impl GenArgs {
    fn spec(&self) -> GenSpec {
        let mut g = GenSpec::new(
            (self.n_min, self.n_max),
            (self.m_min, self.m_max),
            self.seed,
            self.count as usize,
        );
        g.dist = match self.dist {
            DistArg::Gaussian => EntryDist::Gaussian,
            DistArg::Uniform => EntryDist::Uniform,
        };
        g
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Pricing tolerance of the column-generation loop.
    #[arg(long, value_parser = positive_f64)]
    tol_lp: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    tol_rank: Option<f64>,
    /// Residual tolerance relative to 1 + ||d||_inf.
    #[arg(long, value_parser = positive_f64)]
    feas_tol: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    merge_tol: Option<f64>,
    /// Coarse grid size of the extremum search.
    #[arg(long, value_parser = clap::value_parser!(u64).range(16..))]
    grid: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_iters: Option<u64>,
}

impl SolverArgs {
    fn options(&self) -> (SilpOptions, CertifyTols) {
        let mut o = SilpOptions::default();
        let mut c = CertifyTols::default();
        if let Some(v) = self.tol_lp {
            o.price_tol = v;
        }
        if let Some(v) = self.tol_rank {
            c.rank_tol = v;
        }
        if let Some(v) = self.feas_tol {
            o.feas_tol_rel = v;
            c.feas_tol_rel = v;
        }
        if let Some(v) = self.merge_tol {
            o.merge_tol = v;
        }
        if let Some(v) = self.grid {
            o.coarse_grid = v as usize;
        }
        if let Some(v) = self.max_iters {
            o.max_iters = v as usize;
        }
        (o, c)
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive finite number, got {s}"))
    }
}

enum Failure {
    Err(&'static str, Error),
    Code(i32, String),
}

type Outcome = std::result::Result<String, Failure>;

trait Stage<T> {
    fn stage(self, name: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> Stage<T> for crate::error::Result<T> {
    fn stage(self, name: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::Err(name, e))
    }
}

fn check_input(path: &Path) -> std::result::Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Code(
            EXIT_USAGE,
            format!("input: {} is not a readable file", path.display()),
        ))
    }
}

fn check_output_file(path: &Path) -> std::result::Result<(), Failure> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(p) if !p.is_dir() => Err(Failure::Code(
            EXIT_USAGE,
            format!("output: directory {} does not exist", p.display()),
        )),
        _ if path.is_dir() => Err(Failure::Code(
            EXIT_USAGE,
            format!("output: {} is a directory", path.display()),
        )),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Err("write output", e.into()))
}

fn cmd_solve(input: &Path, output: &Path, solver: &SolverArgs) -> Outcome {
    check_input(input)?;
    check_output_file(output)?;
    let inst = CompletionInstance::from_json_file(input).stage("load instance")?;
    let (opts, tols) = solver.options();
    let res = complete(&inst, &opts, &tols).stage("solve")?;
    eprintln!(
        "solve: {} pricing rounds, objective {:.12e}, support {}, max dual violation {:.3e}",
        res.iterations, res.objective, res.diagnostics.support_size, res.diagnostics.max_violation
    );
    write_file(output, &res.to_json_string())?;
    Ok(format!(
        "n={} m={} rank={} bound={} residual={:.3e}",
        res.n, res.m, res.rank, res.rank_bound, res.residual
    ))
}

fn cmd_gen(output: &Path, gen: &GenArgs) -> Outcome {
    let spec = gen.spec();
    spec.validate().stage("validate generator")?;
    fs::create_dir_all(output).map_err(|e| Failure::Err("create output directory", e.into()))?;
    let width = spec.count.to_string().len().max(5);
    for index in 0..spec.count {
        let inst = random_instance(&spec, index).stage("generate")?;
        let path = output.join(format!("instance_{index:0width$}.json"));
        write_file(&path, &inst.to_json_string())?;
    }
    Ok(format!(
        "generated {} instances (seed {}) in {}",
        spec.count,
        spec.seed,
        output.display()
    ))
}

fn cmd_batch(
    output: &Path,
    csv: Option<&Path>,
    jobs: usize,
    gen: &GenArgs,
    solver: &SolverArgs,
) -> Outcome {
    check_output_file(output)?;
    if let Some(c) = csv {
        check_output_file(c)?;
    }
    let spec = gen.spec();
    spec.validate().stage("validate generator")?;
    let (opts, tols) = solver.options();
    let stats = batch_rank_statistics(&spec, &opts, &tols, jobs).stage("batch")?;
    write_file(output, &stats.to_json_string())?;
    if let Some(c) = csv {
        write_file(c, &stats.to_csv_string())?;
    }
    let a = &stats.aggregates;
    eprintln!(
        "batch: rank min {} median {} max {}, max residual {:.3e}",
        a.min_rank, a.median_rank, a.max_rank, a.max_residual
    );
    Ok(format!(
        "count={} frac_rank_le_2m={:.4} frac_rank_ge_m={:.4}",
        a.count, a.frac_rank_le_2m, a.frac_rank_ge_m
    ))
}

fn cmd_verify(
    input: &Path,
    result: &Path,
    output: Option<&Path>,
    tol_rank: Option<f64>,
    feas_tol: Option<f64>,
) -> Outcome {
    check_input(input)?;
    check_input(result)?;
    if let Some(o) = output {
        check_output_file(o)?;
    }
    let inst = CompletionInstance::from_json_file(input).stage("load instance")?;
    let text = fs::read_to_string(result).map_err(|e| Failure::Err("load result", e.into()))?;
    let res = CompletionResult::from_json_str(&text).stage("load result")?;
    let mut tols = CertifyTols::default();
    if let Some(v) = tol_rank {
        tols.rank_tol = v;
    }
    if let Some(v) = feas_tol {
        tols.feas_tol_rel = v;
    }
    let report = verify_result(&inst, &res, &tols);
    if let Some(o) = output {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(o, &json)?;
    }
    for c in &report.checks {
        eprintln!(
            "verify: {:<22} {} (measured {:e}, limit {:e})",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.measured,
            c.limit
        );
    }
    let passed = report.checks.iter().filter(|c| c.passed).count();
    let summary = format!("verify: {passed}/{} checks passed", report.checks.len());
    if report.passed() {
        Ok(summary)
    } else {
        let failed: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
        Err(Failure::Code(
            EXIT_CERT,
            format!("{summary}; failed: {}", failed.join(", ")),
        ))
    }
}

fn cmd_psd_check(seed: u64, count: u64, n_max: u64, output: Option<&Path>) -> Outcome {
    if let Some(o) = output {
        check_output_file(o)?;
    }
    let trials = psd_trials(seed, count as usize, n_max as usize).stage("psd trials")?;
    let mut log = String::new();
    for t in &trials {
        log.push_str(&serde_json::to_string(t).expect("trial serializes"));
        log.push('\n');
    }
    match output {
        Some(o) => write_file(o, &log)?,
        None => {
            let _ = std::io::stderr().write_all(log.as_bytes());
        }
    }
    let bad: Vec<_> = trials.iter().filter(|t| !t.passed).collect();
    if let Some(first) = bad.first() {
        return Err(Failure::Code(
            EXIT_CERT,
            format!(
                "lemma1-check: {} of {} trials violated PSD; first: {}",
                bad.len(),
                trials.len(),
                serde_json::to_string(first).expect("trial serializes")
            ),
        ));
    }
    let worst = trials
        .iter()
        .map(|t| t.min_eigenvalue / (1.0 + t.norm))
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "lemma1-check: {} trials passed, worst scaled min eigenvalue {:.3e}",
        trials.len(),
        worst
    ))
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Solve {
            input,
            output,
            solver,
        } => cmd_solve(input, output, solver),
        Command::Gen { output, gen } => cmd_gen(output, gen),
        Command::Batch {
            output,
            csv,
            jobs,
            gen,
            solver,
        } => cmd_batch(output, csv.as_deref(), *jobs, gen, solver),
        Command::Verify {
            input,
            result,
            output,
            tol_rank,
            feas_tol,
        } => cmd_verify(input, result, output.as_deref(), *tol_rank, *feas_tol),
        Command::PsdCheck {
            seed,
            count,
            n_max,
            output,
        } => cmd_psd_check(*seed, *count, *n_max, output.as_deref()),
    };
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(Failure::Err(stage, e)) => {
            eprintln!("error [{stage}]: {e}");
            exit_code(&e)
        }
        Err(Failure::Code(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}
