//! Contraction certificate for a fixed gain at a fixed rate: find
//! `X > 0`, `lambda >= 0` with
//!
//! ```text
//! [ A^T X A - rho^2 X    A^T X (BK) ]          [ (theta/eta)^2 I   0  ]
//! [ (X BK)^T A    (BK)^T X (BK)     ] + lambda [ 0                -I ]  <= 0.
//! ```
//!
//! The scale of `(X, lambda)` is free, so the search is normalized by
//! `X >= I`; the nonstrict block carries the usual `2 margin` shift.

use nalgebra::DMatrix;

use super::{
    certificate_from_solve, congruence_elementary, nonstrict_shift, Certificate, CertificateKind,
    CertifyError, CertifyOptions, SystemBuilder,
};
use crate::linalg;
use crate::lmi::LmiSystem;

/// Coordinate layout: the `n(n+1)/2` upper-triangle entries of `X`
/// (row-major, `i <= j`), then `lambda`.
pub fn assemble_theorem1(
    a: &DMatrix<f64>,
    bk: &DMatrix<f64>,
    theta_over_eta: f64,
    rho: f64,
    margin: f64,
) -> Result<LmiSystem, CertifyError> {
    let n = a.nrows();
    if a.ncols() != n || bk.nrows() != n {
        return Err(CertifyError::InvalidParameter(
            "A must be square and BK must have matching rows".into(),
        ));
    }
    let p = bk.ncols();
    let v = n * (n + 1) / 2 + 1;
    let lambda_idx = v - 1;
    let d = n + p;

    // C = [A  BK], so the X-dependent part of the main block is C^T X C
    // minus the rho^2 X embedding.
    let mut c_mat = DMatrix::zeros(n, d);
    c_mat.view_mut((0, 0), (n, n)).copy_from(a);
    c_mat.view_mut((0, n), (n, p)).copy_from(bk);

    let mut builder = SystemBuilder::new(v, margin);
    builder.bound(lambda_idx, 0.0, super::MULTIPLIER_CAP);

    let mut main_terms = Vec::with_capacity(v);
    let mut floor_terms = Vec::with_capacity(v - 1);
    let mut coord = 0;
    for i in 0..n {
        for j in i..n {
            let mut g = congruence_elementary(&c_mat, i, j);
            g[(i, j)] -= rho * rho;
            if i != j {
                g[(j, i)] -= rho * rho;
            }
            main_terms.push((coord, g));

            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = -1.0;
            e[(j, i)] = -1.0;
            floor_terms.push((coord, e));
            coord += 1;
        }
    }
    let mut lam = DMatrix::zeros(d, d);
    let ratio2 = theta_over_eta * theta_over_eta;
    for k in 0..n {
        lam[(k, k)] = ratio2;
    }
    for k in n..d {
        lam[(k, k)] = -1.0;
    }
    main_terms.push((lambda_idx, lam));

    builder.block(nonstrict_shift(d, margin), main_terms);
    builder.block(DMatrix::identity(n, n), floor_terms);
    Ok(builder.build()?)
}

/// Checks the fixed-gain certificate at rate `rho`; `NotFound` is not a
/// disproof, only a failed search.
pub fn check_theorem1(
    a: &DMatrix<f64>,
    bk: &DMatrix<f64>,
    theta_over_eta: f64,
    rho: f64,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let sr = linalg::spectral_radius(a);
    if sr >= 1.0 {
        return Err(CertifyError::UnstableA(sr));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(CertifyError::InvalidParameter(format!(
            "rho = {rho} outside [0, 1)"
        )));
    }
    let system = assemble_theorem1(a, bk, theta_over_eta, rho, opts.margin)?;
    let lambda_idx = system.n_coords() - 1;
    certificate_from_solve(&system, CertificateKind::Theorem1, rho, None, lambda_idx, opts)
}
