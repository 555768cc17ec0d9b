//! Small dense linear-algebra helpers shared by the Gaussian, minset and
//! regret modules.

use nalgebra::{DMatrix, DVector};

/// Largest absolute difference between `a[i][j]` and `a[j][i]`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn max_diagonal(a: &DMatrix<f64>) -> f64 {
    a.diagonal().iter().copied().fold(0.0, f64::max)
}

/// Lower-triangular Cholesky factor, or `None` as soon as a pivot is not
/// strictly above `min_pivot`.
pub fn cholesky_lower(a: &DMatrix<f64>, min_pivot: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > min_pivot) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// `log det` of a symmetric positive-definite matrix; the empty matrix has
/// log-determinant 0.
pub fn log_det_spd(a: &DMatrix<f64>) -> Option<f64> {
    if a.nrows() == 0 {
        return Some(0.0);
    }
    let l = cholesky_lower(a, 0.0)?;
    Some(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn principal(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    submatrix(a, idx, idx)
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Symmetric square root `V diag(sqrt(max(λ, 0))) Vᵀ` of a PSD matrix. Works
/// for singular matrices, unlike a Cholesky factor.
pub fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = cholesky_lower(&a, 0.0).unwrap();
        assert_relative_eq!(&l * l.transpose(), a, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        assert!(cholesky_lower(&a, 1e-12).is_none());
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let expected = (2.0f64 * 1.0 - 0.25).ln();
        assert_relative_eq!(log_det_spd(&a).unwrap(), expected, epsilon = 1e-14);
        assert_eq!(log_det_spd(&DMatrix::zeros(0, 0)), Some(0.0));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let v = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let a = &v * v.transpose();
        let r = psd_sqrt(&a);
        assert_relative_eq!(&r * &r, a, epsilon = 1e-12);
    }
}
