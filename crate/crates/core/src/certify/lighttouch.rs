//! Light-touch gain certification in the original state dimension: at a
//! fixed `(omega, rho)` grid point, find `X > 0`, `lambda >= 0` with
//!
//! ```text
//! [ -rho^2 X + lambda (th/eta)^2 w^2 I   0          A^T X   ]
//! [ 0                                    -lambda I  w Bb^T X] <= 0,
//! [ X A                                  w X Bb     -X      ]
//! ```
//!
//! where `Bb = B (x) 1_N^T` collects the summed agent action. This is the
//! Schur-lifted form of the fixed-gain condition at `K_i = omega I`.

use nalgebra::DMatrix;

use super::{
    certificate_from_solve, nonstrict_shift, Certificate, CertificateKind, CertifyError,
    CertifyOptions, SweepPoint, SystemBuilder,
};
use crate::linalg;
use crate::lmi::LmiSystem;

/// Practical size guard for the dense kernel: coordinate count and
/// assembled block size.
pub(crate) const MAX_COORDS: usize = 420;
pub(crate) const MAX_BLOCK_DIM: usize = 260;

pub(crate) fn lighttouch_guard(n: usize, q: usize) -> Result<(), CertifyError> {
    let v = n * (n + 1) / 2 + 1;
    let d = 2 * n + q + n;
    if v > MAX_COORDS || d > MAX_BLOCK_DIM {
        return Err(CertifyError::TooLarge(format!(
            "light-touch condition needs {v} coordinates on a {d}-dim block \
             (limits {MAX_COORDS}/{MAX_BLOCK_DIM}); use the reduced method"
        )));
    }
    Ok(())
}

/// Coordinate layout: upper triangle of `X` (row-major, `i <= j`), then
/// `lambda`.
pub fn assemble_lighttouch(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n_agents: usize,
    theta_hat_over_eta: f64,
    omega: f64,
    rho: f64,
    margin: f64,
) -> Result<LmiSystem, CertifyError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(CertifyError::InvalidParameter(
            "A must be square and B must have matching rows".into(),
        ));
    }
    let q = b.ncols() * n_agents;
    lighttouch_guard(n, q)?;
    let ones = DMatrix::from_element(1, n_agents, 1.0);
    let bbar = b.kronecker(&ones); // n x q

    let v = n * (n + 1) / 2 + 1;
    let lambda_idx = v - 1;
    let d = n + q + n;

    // X enters as U^T X V + V^T X U - rho^2 (top-left embedding) with
    // U = [0 0 I], V = [A  w Bb  -I/2].
    let mut u_mat = DMatrix::zeros(n, d);
    u_mat.view_mut((0, n + q), (n, n)).copy_from(&DMatrix::identity(n, n));
    let mut v_mat = DMatrix::zeros(n, d);
    v_mat.view_mut((0, 0), (n, n)).copy_from(a);
    v_mat.view_mut((0, n), (n, q)).copy_from(&(&bbar * omega));
    v_mat
        .view_mut((0, n + q), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * -0.5));

    let mut builder = SystemBuilder::new(v, margin);
    builder.bound(lambda_idx, 0.0, super::MULTIPLIER_CAP);

    let mut main_terms = Vec::with_capacity(v);
    let mut floor_terms = Vec::with_capacity(v - 1);
    let mut coord = 0;
    for i in 0..n {
        for j in i..n {
            let ui = u_mat.row(i).transpose();
            let vj = v_mat.row(j).transpose();
            let mut g = &ui * vj.transpose() + &vj * ui.transpose();
            if i != j {
                let uj = u_mat.row(j).transpose();
                let vi = v_mat.row(i).transpose();
                g += &uj * vi.transpose() + &vi * uj.transpose();
            }
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
    let r2 = (theta_hat_over_eta * omega).powi(2);
    for k in 0..n {
        lam[(k, k)] = r2;
    }
    for k in n..n + q {
        lam[(k, k)] = -1.0;
    }
    main_terms.push((lambda_idx, lam));

    builder.block(nonstrict_shift(d, margin), main_terms);
    builder.block(DMatrix::identity(n, n), floor_terms);
    Ok(builder.build()?)
}

/// Feasibility of the light-touch condition at one `(omega, rho)` point.
#[allow(clippy::too_many_arguments)]
pub fn check_lighttouch(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n_agents: usize,
    theta_hat_over_eta: f64,
    omega: f64,
    rho: f64,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let sr = linalg::spectral_radius(a);
    if sr >= 1.0 {
        return Err(CertifyError::UnstableA(sr));
    }
    if !(0.0..=1.0).contains(&omega) || !(0.0..=1.0).contains(&rho) {
        return Err(CertifyError::InvalidParameter(format!(
            "grid point (omega, rho) = ({omega}, {rho}) outside [0, 1]^2"
        )));
    }
    let system = assemble_lighttouch(a, b, n_agents, theta_hat_over_eta, omega, rho, opts.margin)?;
    let lambda_idx = system.n_coords() - 1;
    certificate_from_solve(
        &system,
        CertificateKind::Theorem1,
        rho,
        Some(omega),
        lambda_idx,
        opts,
    )
}

/// Bisection-like synthesis over the light-touch condition: largest `omega`
/// at the smallest certified `rho` along the standard grid walk.
pub fn synthesize_lighttouch(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n_agents: usize,
    theta_hat_over_eta: f64,
    eps: f64,
    step: f64,
    opts: &CertifyOptions,
) -> Result<(f64, f64, Certificate), CertifyError> {
    super::method::algorithm2(
        |omega, rho| check_lighttouch(a, b, n_agents, theta_hat_over_eta, omega, rho, opts),
        eps,
        step,
    )
}

/// Full feasibility map over explicit grids, in row-major `(rho, omega)`
/// order.
pub fn sweep_lighttouch(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n_agents: usize,
    theta_hat_over_eta: f64,
    omega_grid: &[f64],
    rho_grid: &[f64],
    opts: &CertifyOptions,
) -> Result<Vec<SweepPoint>, CertifyError> {
    let mut out = Vec::with_capacity(omega_grid.len() * rho_grid.len());
    for &rho in rho_grid {
        for &omega in omega_grid {
            match check_lighttouch(a, b, n_agents, theta_hat_over_eta, omega, rho, opts) {
                Ok(cert) => out.push(SweepPoint {
                    omega,
                    rho,
                    feasible: true,
                    slack: cert.slack,
                }),
                Err(CertifyError::NotFound { best_slack }) => out.push(SweepPoint {
                    omega,
                    rho,
                    feasible: false,
                    slack: best_slack,
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_b_certifies_at_spectral_radius() {
        // Diagonal A with radius 0.5 and no control channel: the grid walk
        // accepts at the first rho >= 0.5, with omega untouched at 1.
        let a = DMatrix::from_partial_diagonal(2, 2, &[0.5, 0.3]);
        let b = DMatrix::zeros(2, 1);
        let opts = CertifyOptions::default();
        let (omega, rho, cert) = synthesize_lighttouch(&a, &b, 2, 0.7, 0.01, 0.01, &opts).unwrap();
        assert_eq!(omega, 1.0);
        assert!((rho - 0.5).abs() < 1e-12, "rho = {rho}");
        assert!(cert.slack <= -opts.margin);
    }

    #[test]
    fn synthesized_point_lies_in_sweep() {
        let a = DMatrix::from_partial_diagonal(2, 2, &[0.4, 0.2]);
        let b = DMatrix::from_column_slice(2, 1, &[0.3, 0.1]);
        let opts = CertifyOptions::default();
        let (omega, rho, _) = synthesize_lighttouch(&a, &b, 2, 0.5, 0.05, 0.05, &opts).unwrap();
        let omegas: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let rhos: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
        let sweep = sweep_lighttouch(&a, &b, 2, 0.5, &omegas, &rhos, &opts).unwrap();
        assert!(sweep
            .iter()
            .any(|p| p.feasible && (p.omega - omega).abs() < 1e-9 && (p.rho - rho).abs() < 1e-9));
        // Feasibility is monotone in rho at fixed omega on this instance.
        for &w in &[0.0, 0.5, 1.0] {
            let col: Vec<bool> = sweep
                .iter()
                .filter(|p| (p.omega - w).abs() < 1e-9)
                .map(|p| p.feasible)
                .collect();
            let first = col.iter().position(|&f| f);
            if let Some(k) = first {
                assert!(col[k..].iter().all(|&f| f), "non-monotone at omega={w}");
            }
        }
    }

    #[test]
    fn zero_b_sweep_is_feasible_above_the_radius() {
        let a = DMatrix::from_partial_diagonal(2, 2, &[0.5, 0.3]);
        let b = DMatrix::zeros(2, 1);
        let opts = CertifyOptions::default();
        let omegas = [0.0, 0.5, 1.0];
        let rhos = [0.3, 0.45, 0.55, 0.8, 1.0];
        let sweep = sweep_lighttouch(&a, &b, 2, 0.7, &omegas, &rhos, &opts).unwrap();
        for p in sweep {
            assert_eq!(
                p.feasible,
                p.rho >= 0.5,
                "point ({}, {}) misclassified",
                p.omega,
                p.rho
            );
        }
    }

    #[test]
    fn guard_refuses_large_systems() {
        let n = 60;
        let a = DMatrix::identity(n, n) * 0.5;
        let b = DMatrix::from_element(n, 10, 0.01);
        let err = check_lighttouch(&a, &b, 10, 0.5, 1.0, 0.9, &CertifyOptions::default());
        assert!(matches!(err, Err(CertifyError::TooLarge(_))));
    }
}
