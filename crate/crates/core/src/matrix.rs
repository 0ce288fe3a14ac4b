//! k x k nonnegative matrices with stochasticity kinds: overlap matrices and
//! the optimization iterates of the landscape module.

use serde::{Deserialize, Serialize};

use crate::error::{PottsError, Result};

pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    RowStochastic,
    DoublyStochastic,
    OverlapEmpirical,
}

/// Row-major k x k matrix of nonnegative reals tagged with the stochasticity
/// class it was validated against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    k: usize,
    entries: Vec<f64>,
    kind: MatrixKind,
}

impl StochasticMatrix {
    pub fn row_stochastic(k: usize, entries: Vec<f64>) -> Result<Self> {
        Self::validate_shape(k, &entries)?;
        for i in 0..k {
            let s: f64 = entries[i * k..(i + 1) * k].iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(PottsError::InvalidParameter(format!(
                    "row {i} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self {
            k,
            entries,
            kind: MatrixKind::RowStochastic,
        })
    }

    pub fn doubly_stochastic(k: usize, entries: Vec<f64>) -> Result<Self> {
        Self::validate_shape(k, &entries)?;
        for i in 0..k {
            let r: f64 = entries[i * k..(i + 1) * k].iter().sum();
            let c: f64 = (0..k).map(|j| entries[j * k + i]).sum();
            if (r - 1.0).abs() > STOCHASTIC_TOL || (c - 1.0).abs() > STOCHASTIC_TOL {
                return Err(PottsError::InvalidParameter(format!(
                    "row/column {i} sums ({r}, {c}) not doubly stochastic"
                )));
            }
        }
        Ok(Self {
            k,
            entries,
            kind: MatrixKind::DoublyStochastic,
        })
    }

    /// Empirical overlap of two assignments; entries are integer multiples of
    /// k/n by construction.
    pub(crate) fn overlap_empirical(k: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), k * k);
        Self {
            k,
            entries,
            kind: MatrixKind::OverlapEmpirical,
        }
    }

    /// Escape hatch for points produced by a projection, which are stochastic
    /// by construction up to floating-point roundoff.
    pub(crate) fn from_projected(k: usize, entries: Vec<f64>, kind: MatrixKind) -> Self {
        debug_assert_eq!(entries.len(), k * k);
        Self { k, entries, kind }
    }

    fn validate_shape(k: usize, entries: &[f64]) -> Result<()> {
        if entries.len() != k * k {
            return Err(PottsError::DimensionMismatch(format!(
                "{} entries for a {k} x {k} matrix",
                entries.len()
            )));
        }
        if let Some(e) = entries.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(PottsError::InvalidParameter(format!("bad entry {e}")));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = vec![0.0; self.k * self.k];
        for i in 0..self.k {
            for j in 0..self.k {
                t[j * self.k + i] = self.entries[i * self.k + j];
            }
        }
        Self {
            k: self.k,
            entries: t,
            kind: self.kind,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.k)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_col_sum_deviation(&self) -> f64 {
        (0..self.k)
            .map(|j| ((0..self.k).map(|i| self.get(i, j)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
