//! Symmetric Toeplitz matrix completion with a certified rank bound.
//!
//! Given `B x = d` on the first row `x` of an `n x n` symmetric Toeplitz
//! matrix, with `B` of full row rank `m`, the solver finds `x` such that
//! `rank T(x) <= 2m`. It does so by writing `x` as the difference of the
//! moment sequences of two finite atomic measures on `[0, pi]`, solving the
//! resulting semi-infinite LP by column generation, and reading a basic
//! solution (at most `m` atoms) back into `x`.

// `!(a <= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod lp;
pub mod measure;
pub mod oracle;
pub mod problem;
pub mod reconstruct;
pub mod silp;
pub mod toeplitz;
pub mod trigpoly;

pub use error::{Error, Result};
pub use measure::{Atom, AtomicMeasure};
pub use problem::{CompletionInstance, ObservedEntry};
pub use toeplitz::{GenToeplitz, SymToeplitz, Toeplitz};
pub use trigpoly::{CosPoly, ExtremumMode};
pub use oracle::{batch_rank_statistics, dense_grid_lp_oracle, random_instance, verify_result, GenSpec, RankStats};
pub use reconstruct::{complete, CertifyTols, CompletionResult};
pub use silp::{solve_dual_exchange, solve_primal_column_generation, BoundPolys, SilpOptions, SilpSolution};
