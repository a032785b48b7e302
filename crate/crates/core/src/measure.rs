//! Finite atomic measures on `[0, pi]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

impl Atom {
    pub fn is_endpoint(&self) -> bool {
        self.t == 0.0 || self.t == PI
    }
}

/// Point masses with strictly positive weights at pairwise separated nodes,
/// kept sorted by node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Normalizes `atoms`: drops zero weights, sorts by node and merges nodes
    /// closer than `merge_tol` (weights add, node moves to the weighted mean).
    pub fn new(atoms: impl IntoIterator<Item = Atom>, merge_tol: f64) -> Result<Self> {
        let mut raw: Vec<Atom> = Vec::new();
        for a in atoms {
            if !(0.0..=PI).contains(&a.t) {
                return Err(Error::Domain(a.t));
            }
            if !a.w.is_finite() || a.w < 0.0 {
                return Err(Error::Contract(format!(
                    "atom weight must be finite and nonnegative, got {}",
                    a.w
                )));
            }
            if a.w > 0.0 {
                raw.push(a);
            }
        }
        raw.sort_by(|a, b| a.t.total_cmp(&b.t));

        let mut merged: Vec<Atom> = Vec::with_capacity(raw.len());
        for a in raw {
            match merged.last_mut() {
                Some(last) if a.t - last.t <= merge_tol => {
                    let w = last.w + a.w;
                    // keep endpoints exact so they stay single-column atoms
                    last.t = if last.is_endpoint() {
                        last.t
                    } else if a.is_endpoint() {
                        a.t
                    } else {
                        (last.t * last.w + a.t * a.w) / w
                    };
                    last.w = w;
                }
                _ => merged.push(a),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|&(t, w)| Atom { t, w }),
            DEFAULT_MERGE_TOL,
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.t).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn endpoint_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_endpoint()).count()
    }

    pub fn interior_count(&self) -> usize {
        self.len() - self.endpoint_count()
    }

    /// Number of Vandermonde columns the measure contributes after mirroring
    /// to `[0, 2 pi)`: two per interior atom, one per endpoint atom.
    pub fn column_multiplicity(&self) -> usize {
        2 * self.interior_count() + self.endpoint_count()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { t: a.t, w: a.w * factor })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_zero_weights_and_sorts() {
        let mu = AtomicMeasure::from_pairs(&[(2.0, 1.0), (1.0, 0.0), (0.5, 3.0)]).unwrap();
        assert_eq!(mu.nodes(), vec![0.5, 2.0]);
        assert_eq!(mu.total_mass(), 4.0);
    }

    #[test]
    fn merges_close_nodes() {
        let mu = AtomicMeasure::from_pairs(&[(1.0, 1.0), (1.0 + 5e-10, 1.0)]).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.atoms()[0].w, 2.0);
        assert!((mu.atoms()[0].t - (1.0 + 2.5e-10)).abs() < 1e-15);
    }

    #[test]
    fn merge_keeps_endpoint_exact() {
        let mu = AtomicMeasure::from_pairs(&[(0.0, 1.0), (1e-10, 1.0)]).unwrap();
        assert_eq!(mu.atoms(), &[Atom { t: 0.0, w: 2.0 }]);
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(AtomicMeasure::from_pairs(&[(4.0, 1.0)]).is_err());
        assert!(AtomicMeasure::from_pairs(&[(1.0, -1.0)]).is_err());
        assert!(AtomicMeasure::from_pairs(&[(1.0, f64::NAN)]).is_err());
    }

    #[test]
    fn multiplicity_counts_endpoints_once() {
        let mu = AtomicMeasure::from_pairs(&[(0.0, 1.0), (1.0, 1.0), (PI, 1.0)]).unwrap();
        assert_eq!(mu.endpoint_count(), 2);
        assert_eq!(mu.interior_count(), 1);
        assert_eq!(mu.column_multiplicity(), 4);
    }
}
