//! Small dense linear algebra used by the fitting and estimation code:
//! Cholesky factorization, triangular solves, and a canonically ordered dot
//! product for permutation-stable sums.

use ndarray::{Array1, Array2};

/// Cholesky factorization A = L L^T in place (lower triangle).
/// Returns false if a pivot is not strictly positive.
pub fn cholesky_in_place(a: &mut Array2<f64>) -> bool {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / d;
        }
    }
    // zero the upper triangle so the factor is unambiguous
    for i in 0..n {
        for j in (i + 1)..n {
            a[[i, j]] = 0.0;
        }
    }
    true
}

/// Solve L y = b for lower-triangular L.
pub fn forward_substitute(l: &Array2<f64>, b: &[f64], out: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * out[k];
        }
        out[i] = s / l[[i, i]];
    }
}

/// Solve L^T x = y for lower-triangular L.
pub fn back_substitute_transposed(l: &Array2<f64>, y: &mut [f64]) {
    let n = y.len();
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
}

/// Solve (L L^T) x = b.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let mut y = vec![0.0; b.len()];
    forward_substitute(l, b.as_slice().unwrap(), &mut y);
    back_substitute_transposed(l, &mut y);
    Array1::from(y)
}

/// Dot product summed in a canonical (value-sorted) order, so the result is
/// bit-identical under any joint permutation of the inputs.
pub fn canonical_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut prods: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .filter(|v| *v != 0.0)
        .collect();
    prods.sort_unstable_by(f64::total_cmp);
    prods.iter().sum()
}
