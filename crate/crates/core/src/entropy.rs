//! Entropy functions in nats, with 0 ln 0 = 0 enforced by branch.

use crate::error::{PottsError, Result};
use crate::matrix::StochasticMatrix;
use crate::numeric::NeumaierSum;

#[inline]
pub(crate) fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Shannon entropy of a probability vector (entries >= 0, sum 1 within 1e-12).
pub fn entropy_vec(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(PottsError::InvalidParameter("empty vector".into()));
    }
    let mut sum = NeumaierSum::new();
    for &x in p {
        if x.is_nan() || x < 0.0 {
            return Err(PottsError::InvalidParameter(format!("negative entry {x}")));
        }
        sum.add(x);
    }
    if (sum.value() - 1.0).abs() > 1e-12 {
        return Err(PottsError::InvalidParameter(format!(
            "entries sum to {}, expected 1",
            sum.value()
        )));
    }
    let mut h = NeumaierSum::new();
    for &x in p {
        h.add(-xlnx(x));
    }
    Ok(h.value())
}

/// Matrix entropy H(rho) = -sum_ij rho_ij ln rho_ij over any nonnegative
/// matrix (no normalization required).
pub fn entropy_matrix(rho: &StochasticMatrix) -> f64 {
    entropy_raw(rho.entries())
}

pub(crate) fn entropy_raw(entries: &[f64]) -> f64 {
    let mut h = NeumaierSum::new();
    for &x in entries {
        h.add(-xlnx(x));
    }
    h.value()
}

/// h(z) = -z ln z - (1-z) ln(1-z) on [0, 1].
pub fn binary_entropy(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(PottsError::InvalidParameter(format!(
            "z = {z} outside [0, 1]"
        )));
    }
    Ok(-xlnx(z) - xlnx(1.0 - z))
}

/// Checks H(p) <= h(q) + q ln|I| + (1-q) ln(k - |I|) for q = sum_{i in I} p_i,
/// with 1e-12 slack. Requires q strictly inside (0, 1).
pub fn entropy_bound_check(p: &[f64], index_set: &[usize]) -> Result<bool> {
    let k = p.len();
    if index_set.iter().any(|&i| i >= k) {
        return Err(PottsError::InvalidParameter("index out of range".into()));
    }
    let mut sorted = index_set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != index_set.len() {
        return Err(PottsError::InvalidParameter("duplicate index".into()));
    }
    if sorted.is_empty() || sorted.len() == k {
        return Err(PottsError::InvalidParameter(
            "index set must be a nonempty proper subset".into(),
        ));
    }
    let q: f64 = sorted.iter().map(|&i| p[i]).sum();
    if q <= 1e-12 || q >= 1.0 - 1e-12 {
        return Err(PottsError::InvalidParameter(format!(
            "q = {q} must lie strictly inside (0, 1)"
        )));
    }
    let h = entropy_vec(p)?;
    let bound = binary_entropy(q)?
        + q * (sorted.len() as f64).ln()
        + (1.0 - q) * ((k - sorted.len()) as f64).ln();
    Ok(h <= bound + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::StochasticMatrix;

    #[test]
    fn entropy_vec_reference_points() {
        let k = 5;
        let uniform = vec![1.0 / k as f64; k];
        assert!((entropy_vec(&uniform).unwrap() - (k as f64).ln()).abs() < 1e-14);
        assert_eq!(entropy_vec(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((entropy_vec(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(entropy_vec(&[0.5, 0.4]).is_err());
        assert!(entropy_vec(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn matrix_entropy_special_matrices() {
        let k = 4;
        // all entries 1/k^2: H = 2 ln k
        let bar = vec![1.0 / (k * k) as f64; k * k];
        let m = StochasticMatrix::row_stochastic(k, bar.iter().map(|e| e * k as f64).collect())
            .unwrap();
        let scaled: Vec<f64> = m.entries().iter().map(|e| e / k as f64).collect();
        assert!((entropy_raw(&scaled) - 2.0 * (k as f64).ln()).abs() < 1e-13);

        // k^-1 * identity: H = ln k
        let mut ident = vec![0.0; k * k];
        for i in 0..k {
            ident[i * k + i] = 1.0 / k as f64;
        }
        assert!((entropy_raw(&ident) - (k as f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn matrix_entropy_rho_s_closed_form() {
        // top s rows identity, rest uniform, scaled by 1/k:
        // H = ln k + ((k - s)/k) ln k
        let k = 5;
        for s in 0..=k {
            let mut entries = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    let v = if i < s {
                        if i == j {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        1.0 / k as f64
                    };
                    entries[i * k + j] = v / k as f64;
                }
            }
            let expected = (k as f64).ln() * (1.0 + (k - s) as f64 / k as f64);
            assert!((entropy_raw(&entries) - expected).abs() < 1e-13, "s = {s}");
        }
    }

    #[test]
    fn row_decomposition_identity() {
        // H(k^-1 rho) = ln k + (1/k) sum_i H(rho_i) for row-stochastic rho
        let k = 3;
        let rho = StochasticMatrix::row_stochastic(
            k,
            vec![0.2, 0.3, 0.5, 0.6, 0.1, 0.3, 0.25, 0.25, 0.5],
        )
        .unwrap();
        let scaled: Vec<f64> = rho.entries().iter().map(|e| e / k as f64).collect();
        let lhs = entropy_raw(&scaled);
        let rows: f64 = (0..k).map(|i| entropy_vec(rho.row(i)).unwrap()).sum();
        let rhs = (k as f64).ln() + rows / k as f64;
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn binary_entropy_symmetry_and_crosscheck() {
        assert!((binary_entropy(0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        for z in [0.1, 0.25, 0.37, 0.9] {
            let h = binary_entropy(z).unwrap();
            assert!((h - binary_entropy(1.0 - z).unwrap()).abs() < 1e-15);
            // independent path through entropy_vec
            assert!((h - entropy_vec(&[z, 1.0 - z]).unwrap()).abs() < 1e-15);
        }
        assert!(binary_entropy(1.2).is_err());
    }

    #[test]
    fn entropy_bound_examples() {
        let k = 6;
        let uniform = vec![1.0 / k as f64; k];
        // I = first half makes the bound tight
        assert!(entropy_bound_check(&uniform, &[0, 1, 2]).unwrap());
        // near point mass with a tiny index set
        let spread = vec![0.94, 0.02, 0.01, 0.01, 0.01, 0.01];
        assert!(entropy_bound_check(&spread, &[0]).unwrap());
        // q in {0, 1} violates the precondition, as does I in {empty, [k]}
        assert!(entropy_bound_check(&[0.5, 0.5, 0.0], &[2]).is_err());
        assert!(entropy_bound_check(&uniform, &[0, 1, 2, 3, 4, 5]).is_err());
        assert!(entropy_bound_check(&uniform, &[]).is_err());
    }
}
