//! Small dense linear algebra used by the filters.

use nalgebra::{DMatrix, DVector};

use crate::error::{FwfError, Result};

/// Symmetric Toeplitz matrix with `m[i][j] = first_row[|i - j|]`.
pub fn toeplitz(first_row: &[f64]) -> DMatrix<f64> {
    let n = first_row.len();
    DMatrix::from_fn(n, n, |i, j| first_row[i.abs_diff(j)])
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `lambda_max / lambda_min`, infinite when the matrix is not positive definite.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = eig_extremes(m);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves an SPD system by Cholesky factorisation.
pub fn cholesky_solve(m: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    if m.nrows() != rhs.len() {
        return Err(FwfError::DimensionMismatch {
            expected: m.nrows(),
            got: rhs.len(),
        });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| FwfError::Decomposition("matrix is not positive definite".into()))?;
    let x = chol.solve(&DVector::from_column_slice(rhs));
    Ok(x.iter().copied().collect())
}

/// Levinson recursion for a symmetric Toeplitz system `T x = b`, `O(n^2)`.
///
/// Fails when a leading principal minor is (numerically) singular.
pub fn levinson_solve(first_row: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = first_row.len();
    if n != rhs.len() {
        return Err(FwfError::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let r0 = first_row[0];
    if r0 == 0.0 {
        return Err(FwfError::Decomposition("zero diagonal in Toeplitz system".into()));
    }
    // `f` solves T_k f = e_0; by symmetry the backward vector is its reverse.
    let mut f = vec![1.0 / r0];
    let mut x = vec![rhs[0] / r0];
    for k in 1..n {
        let eps_f: f64 = (0..k).map(|i| first_row[k - i] * f[i]).sum();
        let denom = 1.0 - eps_f * eps_f;
        if denom.abs() < 1e-300 {
            return Err(FwfError::Decomposition(format!("singular leading minor of order {}", k + 1)));
        }
        let mut next = vec![0.0; k + 1];
        for i in 0..=k {
            let fwd = if i < k { f[i] } else { 0.0 };
            let bwd = if i > 0 { f[k - i] } else { 0.0 };
            next[i] = (fwd - eps_f * bwd) / denom;
        }
        f = next;

        let eps_x: f64 = (0..k).map(|i| first_row[k - i] * x[i]).sum();
        let gap = rhs[k] - eps_x;
        x.push(0.0);
        // Backward vector of order k+1 is `f` reversed.
        for i in 0..=k {
            x[i] += gap * f[k - i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toeplitz_layout() {
        let m = toeplitz(&[1.0, 0.5, 0.2]);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.5, 0.2]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![0.5, 1.0, 0.5]);
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![0.2, 0.5, 1.0]);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = toeplitz(&[1.0, 2.0]);
        assert!(matches!(cholesky_solve(&m, &[1.0, 1.0]), Err(FwfError::Decomposition(_))));
    }

    #[test]
    fn condition_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 1.0]));
        assert!((condition_number(&m) - 10.0).abs() < 1e-12);
    }

    // Random SPD Toeplitz matrices: autocorrelations of a random MA process
    // plus a ridge.
    fn spd_toeplitz() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=64).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1.0f64..1.0, 1..8),
                proptest::collection::vec(-2.0f64..2.0, n),
                0.05f64..1.0,
            )
                .prop_map(move |(taps, rhs, ridge)| {
                    let mut row = vec![0.0; n];
                    for (lag, r) in row.iter_mut().enumerate() {
                        *r = (0..taps.len())
                            .filter(|&i| i + lag < taps.len())
                            .map(|i| taps[i] * taps[i + lag])
                            .sum();
                    }
                    row[0] += ridge;
                    (row, rhs)
                })
        })
    }

    proptest! {
        #[test]
        fn levinson_matches_cholesky((row, rhs) in spd_toeplitz()) {
            let dense = cholesky_solve(&toeplitz(&row), &rhs).unwrap();
            let fast = levinson_solve(&row, &rhs).unwrap();
            let scale = dense.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in dense.iter().zip(&fast) {
                prop_assert!((a - b).abs() <= 1e-10 * scale, "{} vs {}", a, b);
            }
        }
    }
}
