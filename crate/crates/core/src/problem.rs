//! Completion instances `B x = d` over the first row `x` of a symmetric
//! Toeplitz matrix, their JSON file format, and the cosine-polynomial view of
//! each constraint row.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toeplitz::singular_values;
use crate::trigpoly::CosPoly;

pub const DEFAULT_FULL_RANK_TOL: f64 = 1e-10;

/// One observed entry `T(x)[row][col] = value`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// The linear system `B x = d` constraining the first row of an `n x n`
/// symmetric Toeplitz matrix. `B` has full row rank `m <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionInstance {
    n: usize,
    b: DMatrix<f64>,
    d: Vec<f64>,
    polys: Vec<CosPoly>,
}

impl CompletionInstance {
    pub fn new(b: DMatrix<f64>, d: Vec<f64>) -> Result<Self> {
        let (m, n) = b.shape();
        if n == 0 || m == 0 {
            return Err(Error::Shape(format!("B must be nonempty, got {m}x{n}")));
        }
        if d.len() != m {
            return Err(Error::Shape(format!(
                "d has length {} but B has {m} rows",
                d.len()
            )));
        }
        if b.iter().chain(&d).any(|v| !v.is_finite()) {
            return Err(Error::Contract("B and d must be finite".into()));
        }
        if let Some(k) = (0..m).find(|&k| b.row(k).iter().all(|&v| v == 0.0)) {
            return Err(Error::Contract(format!("row {} of B is zero", k + 1)));
        }
        if m > n {
            return Err(Error::RankDeficient { m, n });
        }
        if !check_full_rank(&b, DEFAULT_FULL_RANK_TOL)? {
            return Err(Error::RankDeficient { m, n });
        }
        let polys = (0..m)
            .map(|k| constraint_cospoly(&b, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, b, d, polys })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn d_inf_norm(&self) -> f64 {
        self.d.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_homogeneous(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    /// `a_k(t)` for every row, in row order.
    pub fn constraint_polys(&self) -> &[CosPoly] {
        &self.polys
    }

    /// Constraint column `(a_1(t), ..., a_m(t))`.
    pub fn column_at(&self, t: f64) -> Vec<f64> {
        self.polys.iter().map(|p| p.value(t)).collect()
    }

    /// `sum_k y_k a_k(t)` as a single cosine series, i.e. `B' y` read as coefficients.
    pub fn dual_poly(&self, y: &[f64]) -> CosPoly {
        let coeffs = self.b.transpose() * DVector::from_column_slice(y);
        CosPoly::new(coeffs.iter().copied().collect())
    }

    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        let bx = &self.b * DVector::from_column_slice(x);
        bx.iter()
            .zip(&self.d)
            .fold(0.0, |acc, (l, r)| acc.max((l - r).abs()))
    }

    /// Same system with `d` replaced.
    pub fn with_rhs(&self, d: Vec<f64>) -> Result<Self> {
        if d.len() != self.m() {
            return Err(Error::Shape("rhs length mismatch".into()));
        }
        Ok(Self {
            d,
            ..self.clone()
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: InstanceFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_instance()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json_str(&s).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Serializes in the `"constraints"` form.
    pub fn to_json_string(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            constraints: Some(
                (0..self.m())
                    .map(|k| ConstraintRow {
                        coeffs: self.b.row(k).iter().copied().collect(),
                        rhs: self.d[k],
                    })
                    .collect(),
            ),
            mask: None,
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraints: Option<Vec<ConstraintRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<ObservedEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintRow {
    coeffs: Vec<f64>,
    rhs: f64,
}

impl InstanceFile {
    fn into_instance(self) -> Result<CompletionInstance> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Parse("field `n`: must be at least 1".into()));
        }
        match (self.constraints, self.mask) {
            (Some(_), Some(_)) => Err(Error::Parse(
                "exactly one of `constraints` or `mask` must be present, found both".into(),
            )),
            (None, None) => Err(Error::Parse(
                "exactly one of `constraints` or `mask` must be present, found neither".into(),
            )),
            (None, Some(mask)) => instance_from_mask(n, &mask),
            (Some(rows), None) => {
                if rows.is_empty() {
                    return Err(Error::Parse("field `constraints`: empty list".into()));
                }
                for (k, row) in rows.iter().enumerate() {
                    if row.coeffs.len() != n {
                        return Err(Error::Parse(format!(
                            "field `constraints[{k}].coeffs`: expected {n} entries, got {}",
                            row.coeffs.len()
                        )));
                    }
                }
                let b = DMatrix::from_fn(rows.len(), n, |k, j| rows[k].coeffs[j]);
                let d = rows.iter().map(|r| r.rhs).collect();
                CompletionInstance::new(b, d)
            }
        }
    }
}

/// Builds `B x = d` from observed entries: entry `(k, j, v)` pins `x[|j - k|] = v`.
/// Entries on the same diagonal collapse into one unit row.
pub fn instance_from_mask(n: usize, entries: &[ObservedEntry]) -> Result<CompletionInstance> {
    if entries.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut diagonals: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        if e.row < 1 || e.row > n || e.col < 1 || e.col > n {
            return Err(Error::Parse(format!(
                "field `mask[{i}]`: index ({}, {}) outside 1..={n}",
                e.row, e.col
            )));
        }
        if !e.value.is_finite() {
            return Err(Error::Parse(format!("field `mask[{i}].value`: not finite")));
        }
        let diag = e.row.abs_diff(e.col);
        match diagonals.get(&diag) {
            Some(&v) if (v - e.value).abs() > 1e-12 * (1.0 + v.abs()) => {
                return Err(Error::InconsistentDiagonal {
                    diagonal: diag,
                    first: v,
                    second: e.value,
                });
            }
            Some(_) => {}
            None => {
                diagonals.insert(diag, e.value);
            }
        }
    }
    let m = diagonals.len();
    let mut b = DMatrix::zeros(m, n);
    let mut d = Vec::with_capacity(m);
    for (k, (&diag, &v)) in diagonals.iter().enumerate() {
        b[(k, diag)] = 1.0;
        d.push(v);
    }
    CompletionInstance::new(b, d)
}

/// True iff the `m`-th largest singular value of `B` exceeds `tol_rel * sigma_max`.
pub fn check_full_rank(b: &DMatrix<f64>, tol_rel: f64) -> Result<bool> {
    let (m, n) = b.shape();
    if m > n {
        return Err(Error::Shape(format!("B is {m}x{n} with more rows than columns")));
    }
    if m == 0 {
        return Ok(true);
    }
    let s = singular_values(b);
    let smax = s[0];
    Ok(smax > 0.0 && s[m - 1] > tol_rel * smax)
}

/// Embeds `B` (`m x n`) into `B_bar` (`m x (2n-1)`), columns indexed
/// `-(n-1)..=(n-1)`: the zero column is copied and every other coefficient
/// is halved and mirrored.
pub fn embed_bar(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = b.shape();
    let off = n - 1;
    DMatrix::from_fn(m, 2 * n - 1, |k, c| {
        let j = c.abs_diff(off);
        if j == 0 {
            b[(k, 0)]
        } else {
            b[(k, j)] / 2.0
        }
    })
}

/// Halves and mirrors a first row into the symmetric vector `xbar`
/// (indices `-(n-1)..=(n-1)`).
pub fn unfold_symmetric(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..2 * n - 1)
        .map(|c| {
            let j = c.abs_diff(n - 1);
            if j == 0 {
                x[0]
            } else {
                x[j] / 2.0
            }
        })
        .collect()
}

/// Inverse of [`unfold_symmetric`]: `x[0] = xbar[0]`, `x[j] = xbar[j] + xbar[-j]`.
pub fn fold_symmetric(xbar: &[f64]) -> Vec<f64> {
    let n = xbar.len().div_ceil(2);
    let off = n - 1;
    (0..n)
        .map(|j| {
            if j == 0 {
                xbar[off]
            } else {
                xbar[off + j] + xbar[off - j]
            }
        })
        .collect()
}

/// `a_k(t) = b_k0 + sum_{j>=1} b_kj cos(jt)` for zero-based row `k`.
pub fn constraint_cospoly(b: &DMatrix<f64>, k: usize) -> Result<CosPoly> {
    if k >= b.nrows() {
        return Err(Error::Contract(format!(
            "row index {k} out of range for {} rows",
            b.nrows()
        )));
    }
    Ok(CosPoly::new(b.row(k).iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(row: usize, col: usize, value: f64) -> ObservedEntry {
        ObservedEntry { row, col, value }
    }

    #[test]
    fn mask_collapses_diagonals() {
        let inst = instance_from_mask(3, &[entry(1, 2, 5.0), entry(2, 3, 5.0)]).unwrap();
        assert_eq!(inst.m(), 1);
        assert_eq!(inst.b(), &DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]));
        assert_eq!(inst.d(), &[5.0]);

        let inst = instance_from_mask(2, &[entry(1, 1, 3.0)]).unwrap();
        assert_eq!(inst.b(), &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        assert_eq!(inst.d(), &[3.0]);
    }

    #[test]
    fn mask_conflict_names_diagonal() {
        let err = instance_from_mask(3, &[entry(1, 2, 5.0), entry(2, 3, 4.0)]).unwrap_err();
        assert!(matches!(err, Error::InconsistentDiagonal { diagonal: 1, .. }));
        assert!(matches!(instance_from_mask(3, &[]), Err(Error::EmptyMask)));
        assert!(instance_from_mask(3, &[entry(4, 1, 1.0)]).is_err());
    }

    #[test]
    fn mask_lower_triangle_uses_abs_offset() {
        let inst = instance_from_mask(4, &[entry(4, 1, 2.0), entry(1, 4, 2.0)]).unwrap();
        assert_eq!(inst.m(), 1);
        assert_eq!(inst.b()[(0, 3)], 1.0);
    }

    #[test]
    fn full_rank_examples() {
        let id = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(check_full_rank(&id, 1e-10).unwrap());
        let prop = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(!check_full_rank(&prop, 1e-10).unwrap());
        let near = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 1e-13, 0.0]);
        assert!(!check_full_rank(&near, 1e-10).unwrap());
        let tall = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(matches!(check_full_rank(&tall, 1e-10), Err(Error::Shape(_))));
    }

    #[test]
    fn near_singular_second_singular_value() {
        // independent check of the 7e-14 figure: sigma_1 sigma_2 = |det| of the
        // 2x2 block, sigma_1^2 + sigma_2^2 = ||B||_F^2.
        let eps: f64 = 1e-13;
        let fro2 = 2.0 + eps * eps;
        let det = eps;
        let s1 = ((fro2 + (fro2 * fro2 - 4.0 * det * det).sqrt()) / 2.0).sqrt();
        let s2 = det / s1;
        assert!((s2 - 7.0710678e-14).abs() < 1e-20);
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, eps, 0.0]);
        let s = singular_values(&b);
        assert!((s[1] - s2).abs() < 1e-18);
    }

    #[test]
    fn rejects_invalid_systems() {
        let prop = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(
            CompletionInstance::new(prop, vec![1.0, 2.0]),
            Err(Error::RankDeficient { .. })
        ));
        let zero_row = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(CompletionInstance::new(zero_row, vec![1.0, 0.0]).is_err());
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(CompletionInstance::new(b, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn embed_examples() {
        let e = embed_bar(&DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        assert_eq!(e, DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
        let e = embed_bar(&DMatrix::from_row_slice(1, 3, &[0.0, 4.0, 6.0]));
        assert_eq!(e, DMatrix::from_row_slice(1, 5, &[3.0, 2.0, 0.0, 2.0, 3.0]));
        let e = embed_bar(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        assert_eq!(e, DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]));
    }

    #[test]
    fn fold_inverts_unfold() {
        let x = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(fold_symmetric(&unfold_symmetric(&x)), x);
    }

    #[test]
    fn cospoly_rows() {
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(constraint_cospoly(&b, 0).unwrap().coeffs(), &[1.0, 0.0]);
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert_eq!(constraint_cospoly(&b, 0).unwrap().coeffs(), &[0.0, 1.0]);
        let b = DMatrix::from_row_slice(1, 3, &[2.0, 3.0, 4.0]);
        assert_eq!(constraint_cospoly(&b, 0).unwrap().coeffs(), &[2.0, 3.0, 4.0]);
        assert!(constraint_cospoly(&b, 1).is_err());
    }

    #[test]
    fn json_both_forms() {
        let inst = CompletionInstance::from_json_str(
            r#"{"n": 3, "constraints": [{"coeffs": [1, 0, 0], "rhs": 2.5}]}"#,
        )
        .unwrap();
        assert_eq!(inst.d(), &[2.5]);
        let inst = CompletionInstance::from_json_str(
            r#"{"n": 3, "mask": [{"row": 1, "col": 3, "value": -1}]}"#,
        )
        .unwrap();
        assert_eq!(inst.b()[(0, 2)], 1.0);
        let back = CompletionInstance::from_json_str(&inst.to_json_string()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_errors_carry_context() {
        let both = r#"{"n": 2, "constraints": [{"coeffs": [1, 0], "rhs": 1}], "mask": []}"#;
        let msg = CompletionInstance::from_json_str(both).unwrap_err().to_string();
        assert!(msg.contains("exactly one"), "{msg}");
        let neither = r#"{"n": 2}"#;
        assert!(CompletionInstance::from_json_str(neither).is_err());
        let short = r#"{"n": 3, "constraints": [{"coeffs": [1, 0], "rhs": 1}]}"#;
        let msg = CompletionInstance::from_json_str(short).unwrap_err().to_string();
        assert!(msg.contains("constraints[0].coeffs"), "{msg}");
        let bad = "{\"n\": 2,\n \"constraints\": [{\"coeffs\": [1, 0], \"rsh\": 1}]}";
        let msg = CompletionInstance::from_json_str(bad).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }
}
