//! Dense symmetric helpers on top of `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pivots at or below this value are treated as a factorization failure.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Lower Cholesky factor of the principal submatrix of `a` on `idx`.
pub fn cholesky_sub(a: &DMatrix<f64>, idx: &[usize]) -> Result<DMatrix<f64>> {
    let k = idx.len();
    let mut l = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut d = a[(idx[j], idx[j])];
        for t in 0..j {
            d -= l[(j, t)] * l[(j, t)];
        }
        if d.is_nan() || d <= PD_PIVOT_TOL {
            return Err(Error::NotPd { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..k {
            let mut s = a[(idx[i], idx[j])];
            for t in 0..j {
                s -= l[(i, t)] * l[(j, t)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let idx: Vec<usize> = (0..a.nrows()).collect();
    cholesky_sub(a, &idx)
}

/// `ln det` of the principal submatrix on `idx`; the empty set gives 0.
pub fn log_det_sub(a: &DMatrix<f64>, idx: &[usize]) -> Result<f64> {
    let l = cholesky_sub(a, idx)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn log_det(a: &DMatrix<f64>) -> Result<f64> {
    let idx: Vec<usize> = (0..a.nrows()).collect();
    log_det_sub(a, &idx)
}

/// Inverse of a positive-definite matrix via its Cholesky factor.
pub fn inverse_pd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky(a)?;
    let n = a.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPd { index: 0, pivot: 0.0 })?;
    let mut inv = linv.transpose() * linv;
    symmetrize(&mut inv);
    Ok(inv)
}

/// Inverse of the principal submatrix on `idx`, as a `|idx| x |idx|` matrix.
pub fn inverse_sub(a: &DMatrix<f64>, idx: &[usize]) -> Result<DMatrix<f64>> {
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
    inverse_pd(&sub)
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}
