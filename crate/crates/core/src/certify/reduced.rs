//! Dimension-reduced certification: scaled-identity multipliers collapse the
//! full-block conditions to scalars `(chi, r_1, r_2, t_1, t_2, lambda)` and
//! two singular values `delta_1`, `delta_2`. The system size is constant in
//! the number of followers, influencers and agents.
//!
//! Conditions at a grid point `(omega, rho)`:
//!
//! ```text
//! r_j > 0,  r_j + t_j delta_j^2 > 0          (j = 1, 2)
//!
//! [ (a^2-rho^2) chi + r_1 + lambda (th/eta)^2 w^2   a chi 1_2^T      0            ]
//! [ a chi 1_2                                        gamma-block     0            ]  <= 0
//! [ 0                                                0               w^2 r_2 - lambda ]
//! ```
//!
//! The gamma block is `chi 1_2 1_2^T + diag(t)` as obtained by direct
//! expansion of the full-block form ([`Eq21Form::Expansion`], the default);
//! the diagonal variant `chi I_2 + diag(t)` is kept behind
//! [`Eq21Form::Printed`] for comparison.

use nalgebra::DMatrix;

use super::{
    certificate_from_solve, nonstrict_shift, Certificate, CertificateKind, CertifyError,
    CertifyOptions, ReducedParams, SystemBuilder,
};
use crate::lmi::LmiSystem;

/// Which gamma-block variant of the reduced controller condition to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Eq21Form {
    /// `chi 1 1^T + diag(t)`; consistent with the full-block restriction.
    #[default]
    Expansion,
    /// `chi I + diag(t)`.
    Printed,
}

/// Coordinate layout: `[chi, r1, r2, t1, t2, lambda]`.
pub fn assemble_reduced(
    params: &ReducedParams,
    rho: f64,
    omega: f64,
    margin: f64,
    form: Eq21Form,
) -> Result<LmiSystem, CertifyError> {
    let (chi, r1, r2, t1, t2, lam) = (0usize, 1usize, 2usize, 3usize, 4usize, 5usize);
    let alpha = params.alpha;
    let ratio2 = (params.theta_over_eta * omega).powi(2);
    let off = match form {
        Eq21Form::Expansion => 1.0,
        Eq21Form::Printed => 0.0,
    };

    let mut builder = SystemBuilder::new(6, margin);
    builder.bound(lam, 0.0, super::MULTIPLIER_CAP);

    // Main 4x4 block over (x, gamma_1, gamma_2, u).
    let chi_term = DMatrix::from_row_slice(
        4,
        4,
        &[
            alpha * alpha - rho * rho,
            alpha,
            alpha,
            0.0,
            alpha,
            1.0,
            off,
            0.0,
            alpha,
            off,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
    );
    let mut lam_term = DMatrix::zeros(4, 4);
    lam_term[(0, 0)] = ratio2;
    lam_term[(3, 3)] = -1.0;
    let single = |k: usize, value: f64| {
        let mut e = DMatrix::zeros(4, 4);
        e[(k, k)] = value;
        e
    };
    builder.block(
        nonstrict_shift(4, margin),
        vec![
            (chi, chi_term),
            (r1, single(0, 1.0)),
            (r2, single(3, omega * omega)),
            (t1, single(1, 1.0)),
            (t2, single(2, 1.0)),
            (lam, lam_term),
        ],
    );

    // Scale normalization chi >= 1 (the conditions are jointly homogeneous).
    builder.block(
        DMatrix::identity(1, 1),
        vec![(chi, DMatrix::from_element(1, 1, -1.0))],
    );
    // Sign conditions r_j > 0 and r_j + t_j delta_j^2 > 0, with margin.
    let neg = DMatrix::from_element(1, 1, -1.0);
    builder.block(DMatrix::zeros(1, 1), vec![(r1, neg.clone())]);
    builder.block(
        DMatrix::zeros(1, 1),
        vec![
            (r1, neg.clone()),
            (t1, DMatrix::from_element(1, 1, -params.delta1 * params.delta1)),
        ],
    );
    builder.block(DMatrix::zeros(1, 1), vec![(r2, neg.clone())]);
    builder.block(
        DMatrix::zeros(1, 1),
        vec![
            (r2, neg),
            (t2, DMatrix::from_element(1, 1, -params.delta2 * params.delta2)),
        ],
    );
    Ok(builder.build()?)
}

/// Feasibility of the reduced conditions at one `(omega, rho)` point; the
/// assembled system never depends on network sizes, only on the two
/// singular values, `alpha` and the sensitivity ratio.
pub fn check_reduced(
    params: &ReducedParams,
    rho: f64,
    omega: f64,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    if !(0.0..=1.0).contains(&omega) || !(0.0..=1.0).contains(&rho) {
        return Err(CertifyError::InvalidParameter(format!(
            "grid point (omega, rho) = ({omega}, {rho}) outside [0, 1]^2"
        )));
    }
    let system = assemble_reduced(params, rho, omega, opts.margin, opts.eq21_form)?;
    certificate_from_solve(&system, CertificateKind::Reduced, rho, Some(omega), 5, opts)
}

/// Bisection-like synthesis over the reduced conditions; runtime is
/// independent of the network dimensions.
pub fn synthesize_reduced(
    params: &ReducedParams,
    eps: f64,
    step: f64,
    opts: &CertifyOptions,
) -> Result<(f64, f64, Certificate), CertifyError> {
    super::method::algorithm2(|omega, rho| check_reduced(params, rho, omega, opts), eps, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta1: f64, delta2: f64, alpha: f64, ratio: f64) -> ReducedParams {
        ReducedParams::new(delta1, delta2, alpha, ratio).unwrap()
    }

    #[test]
    fn decoupled_channels_feasible() {
        // delta1 = delta2 = 0: the gamma and u channels decouple and the
        // scalar contraction 0.81 chi <= 0.9025 chi decides feasibility.
        let p = params(0.0, 0.0, 0.9, 1.0);
        let opts = CertifyOptions::default();
        let cert = check_reduced(&p, 0.95, 1.0, &opts).unwrap();
        assert!(cert.slack <= -opts.margin);
        assert!(cert.witness[0] >= 1.0); // chi normalized
        assert!(matches!(
            check_reduced(&p, 0.5, 1.0, &opts),
            Err(CertifyError::NotFound { .. })
        ));
    }

    #[test]
    fn omega_zero_ignores_delta2() {
        let opts = CertifyOptions::default();
        for rho in [0.8, 0.9, 0.97] {
            let a = check_reduced(&params(0.05, 0.0, 0.85, 2.0), rho, 0.0, &opts).is_ok();
            let b = check_reduced(&params(0.05, 7.5, 0.85, 2.0), rho, 0.0, &opts).is_ok();
            assert_eq!(a, b, "delta2 leaked into the omega = 0 case at rho = {rho}");
        }
    }

    #[test]
    fn feasibility_monotone_in_omega() {
        let p = params(0.1, 0.4, 0.8, 1.5);
        let opts = CertifyOptions::default();
        for rho in [0.88, 0.92, 0.96] {
            let mut seen_infeasible_below_feasible = false;
            let mut last_feasible = true;
            for k in 0..=10 {
                let omega = k as f64 / 10.0;
                let ok = check_reduced(&p, rho, omega, &opts).is_ok();
                if !last_feasible && ok {
                    seen_infeasible_below_feasible = true;
                }
                last_feasible = ok;
            }
            assert!(
                !seen_infeasible_below_feasible,
                "feasibility not monotone decreasing in omega at rho = {rho}"
            );
        }
    }

    #[test]
    fn synthesize_delta2_zero_keeps_full_omega() {
        // The norm-bounded channel costs roughly 2 delta1 (delta1 + alpha
        // sqrt(2)) of rho^2 budget, so delta1 must be small against
        // 1 - alpha^2 for any rate below 1 to certify.
        let p = params(0.05, 0.0, 0.8, 1.0);
        let opts = CertifyOptions::default();
        let (omega, rho, cert) = synthesize_reduced(&p, 0.01, 0.01, &opts).unwrap();
        assert_eq!(omega, 1.0);
        assert!(cert.slack <= -opts.margin);
        // First certified rho on the grid: one step earlier must fail.
        let prev = rho - 0.01;
        if prev >= 0.01 {
            assert!(matches!(
                check_reduced(&p, prev, 1.0, &opts),
                Err(CertifyError::NotFound { .. })
            ));
        }
    }

    #[test]
    fn printed_form_runs() {
        let p = params(0.03, 0.2, 0.8, 1.0);
        let opts = CertifyOptions {
            eq21_form: Eq21Form::Printed,
            ..CertifyOptions::default()
        };
        assert!(check_reduced(&p, 0.95, 0.5, &opts).is_ok());
    }

    #[test]
    fn dimensions_do_not_depend_on_parameters() {
        let a = assemble_reduced(&params(0.3, 12.0, 0.75, 4.2), 0.9, 0.8, 1e-8, Eq21Form::Expansion)
            .unwrap();
        let b = assemble_reduced(&params(0.0, 0.0, 1.0, 0.0), 0.1, 0.0, 1e-8, Eq21Form::Expansion)
            .unwrap();
        assert_eq!(a.dim(), b.dim());
        assert_eq!(a.n_coords(), b.n_coords());
        assert_eq!(a.n_coords(), 6);
    }
}
