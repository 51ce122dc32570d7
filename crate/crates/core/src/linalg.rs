//! Small shared wrappers around dense eigen/singular value routines. Above
//! `DENSE_DECOMP_LIMIT` the extremal values come from power iteration
//! instead of a full decomposition.

use nalgebra::{DMatrix, DVector};

const DENSE_DECOMP_LIMIT: usize = 400;

/// Top eigenvalue of a positive-semidefinite operator by power iteration
/// with a deterministic start vector.
fn power_top_psd(dim: usize, apply: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + i as f64 / dim as f64).normalize();
    let mut rayleigh = 0.0;
    for iter in 0..5000 {
        let w = apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w / norm;
        let r = apply(&next).dot(&next);
        if iter % 8 == 7 && (r - rayleigh).abs() <= 1e-13 * r.max(1.0) {
            return r;
        }
        rayleigh = r;
        v = next;
    }
    rayleigh
}

/// Largest row sum of absolute values; every eigenvalue lies within it.
fn gershgorin_bound(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of a symmetric matrix. The input is trusted to be
/// symmetric; symmetrize first if it only holds up to roundoff.
pub(crate) fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    if m.nrows() >= DENSE_DECOMP_LIMIT {
        let shift = gershgorin_bound(m) + 1.0;
        return power_top_psd(m.nrows(), |v| m * v + v * shift) - shift;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() >= DENSE_DECOMP_LIMIT {
        return -lambda_max_sym(&(-m));
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest singular value; 0 for empty matrices.
pub(crate) fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows().min(m.ncols()) >= DENSE_DECOMP_LIMIT {
        // Power iteration on the Gram operator.
        let lam = if m.ncols() <= m.nrows() {
            power_top_psd(m.ncols(), |v| m.transpose() * (m * v))
        } else {
            power_top_psd(m.nrows(), |v| m * (m.transpose() * v))
        };
        return lam.max(0.0).sqrt();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Spectral radius via complex eigenvalues.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry of `m - m^T`.
pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// In-place `dst += c * a` without allocating.
pub(crate) fn add_scaled(dst: &mut DMatrix<f64>, a: &DMatrix<f64>, c: f64) {
    debug_assert_eq!(dst.shape(), a.shape());
    dst.iter_mut().zip(a.iter()).for_each(|(d, s)| *d += c * s);
}

/// `Some(c)` when `m` is exactly `c * I`.
pub(crate) fn scalar_identity(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return None;
    }
    let c = m[(0, 0)];
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let expect = if i == j { c } else { 0.0 };
            if m[(i, j)] != expect {
                return None;
            }
        }
    }
    Some(c)
}
