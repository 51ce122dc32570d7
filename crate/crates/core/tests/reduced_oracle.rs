//! Grid-search oracle for the dimension-reduced conditions at `omega = 0`,
//! plus a small restriction check against the full-block route.
//!
//! At `omega = 0` the scalar conditions collapse step by step:
//! - `lambda` only appears as `-lambda` in the input block, so `lambda = 0`;
//! - `r_2` only needs its own sign conditions and is free otherwise;
//! - the `gamma_2` channel decouples in the `t_2 -> -inf` limit (its row is
//!   `chi + t_2` on the diagonal with bounded couplings, so the Schur
//!   correction vanishes), which is the easiest admissible choice;
//! - homogeneity pins the scale at `chi = 1`;
//! - the minimal admissible `r_1 = max(eps, eps - t_1 delta_1^2)` is optimal
//!   because `r_1` enters the contraction block positively.
//!
//! What remains is a one-dimensional scan over `t_1` of the 2x2 block over
//! `(x, gamma_1)`.

use coevo::certify::{
    check_reduced, check_theorem3, synthesize_reduced, CertifyError, CertifyOptions, ReducedParams,
};
use coevo::network::{generate_case_study, CaseStudyConfig};

/// `lambda_max` of `[[a, c], [c, d]]`.
fn lambda_max_2(a: f64, c: f64, d: f64) -> f64 {
    0.5 * ((a + d) + ((a - d).powi(2) + 4.0 * c * c).sqrt())
}

/// Exhaustive `t_1` scan at pitch 1e-3 over `[-400, 0]`.
fn oracle_feasible_at_omega_zero(alpha: f64, rho: f64, delta1: f64, margin: f64) -> bool {
    let pitch: f64 = 1e-3;
    let steps = (400.0 / pitch).round() as usize;
    for i in 0..=steps {
        let t1 = -(i as f64) * pitch;
        let r1 = margin.max(margin - t1 * delta1 * delta1);
        let a = alpha * alpha - rho * rho + r1;
        if lambda_max_2(a, alpha, 1.0 + t1) <= margin {
            return true;
        }
    }
    false
}

#[test]
fn omega_zero_matches_two_dimensional_scan() {
    let opts = CertifyOptions::default();
    let cases = [
        (0.80, 0.90, 0.05),
        (0.75, 0.87, 0.06),
        (0.90, 0.95, 0.50),
    ];
    for (alpha, rho, delta1) in cases {
        // delta2 is irrelevant at omega = 0; give it a nonzero value to
        // prove that.
        let params = ReducedParams::new(delta1, 3.0, alpha, 1.5).unwrap();
        let solver = match check_reduced(&params, rho, 0.0, &opts) {
            Ok(_) => true,
            Err(CertifyError::NotFound { .. }) => false,
            Err(e) => panic!("unexpected: {e}"),
        };
        let oracle = oracle_feasible_at_omega_zero(alpha, rho, delta1, opts.margin);
        assert_eq!(
            solver, oracle,
            "disagreement at alpha={alpha}, rho={rho}, delta1={delta1}"
        );
    }
}

#[test]
fn reduced_witness_lifts_to_full_block() {
    let opts = CertifyOptions::default();
    for (n_f, n_agents, seed) in [(3usize, 2usize, 21u64), (2, 1, 22)] {
        let mut cfg = CaseStudyConfig::new(n_f, 1, n_agents);
        cfg.ff_edge_budget = n_f * (n_f - 1) / 2;
        cfg.tau_factor = 0.08;
        let inst = generate_case_study(seed, &cfg).unwrap();
        let net = inst.lti().unwrap();
        let ratio = 0.04;
        let params = coevo::certify::deltas(&net, n_agents, ratio).unwrap();
        let (omega, rho, _) = synthesize_reduced(&params, 0.01, 0.01, &opts).unwrap();
        let full = check_theorem3(&net, n_agents, ratio, rho, omega, &opts);
        assert!(
            full.is_ok(),
            "reduced-certified ({omega}, {rho}) not certified by the full block on n_f={n_f}"
        );
    }
}
