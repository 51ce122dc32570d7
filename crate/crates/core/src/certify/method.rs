//! Named certification methods behind a common trait, and the shared
//! grid-walk synthesis loop.
//!
//! The loop starts at `rho = eps`, `omega = 1`; on infeasibility it lowers
//! `omega` by `step` until `omega <= eps`, then resets `omega = 1` and
//! raises `rho` by `step` (capped at 1). The first certified pair wins. If
//! even `(omega, rho) = (eps, 1)` fails, the gain is not certifiable along
//! this grid and synthesis reports failure.

use serde::{Deserialize, Serialize};

use super::{
    check_lighttouch, check_reduced, Certificate, CertifyError, CertifyInstance, CertifyOptions,
};
use crate::lmi::LmiSystem;

/// One evaluated grid point of a feasibility sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub rho: f64,
    pub feasible: bool,
    pub slack: f64,
}

/// A certification route: checks one `(omega, rho)` grid point and can
/// reassemble the backing scalar LMI for witness revalidation.
pub trait SynthesisMethod: Send + Sync {
    fn name(&self) -> &'static str;

    /// Size-only admission check, callable before an instance is built.
    fn guard_dims(
        &self,
        n_followers: usize,
        n_influencers: usize,
        n_agents: usize,
    ) -> Result<(), CertifyError>;

    /// Refuses instances the method cannot handle at a sane cost.
    fn guard(&self, inst: &CertifyInstance) -> Result<(), CertifyError>;

    fn check(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<Certificate, CertifyError>;

    /// The assembled system behind [`Self::check`] at the same grid point.
    fn system(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<LmiSystem, CertifyError>;
}

/// Light-touch condition in the original state dimension.
pub struct LightTouchMethod;

impl SynthesisMethod for LightTouchMethod {
    fn name(&self) -> &'static str {
        "full"
    }

    fn guard_dims(
        &self,
        n_followers: usize,
        n_influencers: usize,
        n_agents: usize,
    ) -> Result<(), CertifyError> {
        super::lighttouch::lighttouch_guard(n_followers, n_influencers * n_agents)
    }

    fn guard(&self, inst: &CertifyInstance) -> Result<(), CertifyError> {
        let full = inst.full()?;
        super::lighttouch::lighttouch_guard(full.a.nrows(), full.b.ncols() * inst.n_agents)
    }

    fn check(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<Certificate, CertifyError> {
        let full = inst.full()?;
        check_lighttouch(
            &full.a,
            &full.b,
            inst.n_agents,
            inst.reduced.theta_over_eta,
            omega,
            rho,
            opts,
        )
    }

    fn system(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<LmiSystem, CertifyError> {
        let full = inst.full()?;
        super::assemble_lighttouch(
            &full.a,
            &full.b,
            inst.n_agents,
            inst.reduced.theta_over_eta,
            omega,
            rho,
            opts.margin,
        )
    }
}

/// Scaled-identity multiplier route; constant size in the network.
pub struct ReducedMethod;

impl SynthesisMethod for ReducedMethod {
    fn name(&self) -> &'static str {
        "reduced"
    }

    fn guard_dims(&self, _: usize, _: usize, _: usize) -> Result<(), CertifyError> {
        Ok(())
    }

    fn guard(&self, _inst: &CertifyInstance) -> Result<(), CertifyError> {
        Ok(())
    }

    fn check(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<Certificate, CertifyError> {
        check_reduced(&inst.reduced, rho, omega, opts)
    }

    fn system(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<LmiSystem, CertifyError> {
        super::assemble_reduced(&inst.reduced, rho, omega, opts.margin, opts.eq21_form)
    }
}

/// Full-block S-procedure route for small networks.
pub struct FullBlockMethod;

impl SynthesisMethod for FullBlockMethod {
    fn name(&self) -> &'static str {
        "fullblock"
    }

    fn guard_dims(
        &self,
        n_followers: usize,
        _n_influencers: usize,
        n_agents: usize,
    ) -> Result<(), CertifyError> {
        super::theorem3_dimension_guard(n_followers, n_agents)
    }

    fn guard(&self, inst: &CertifyInstance) -> Result<(), CertifyError> {
        let full = inst.full()?;
        super::theorem3_dimension_guard(full.a.nrows(), inst.n_agents)
    }

    fn check(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<Certificate, CertifyError> {
        super::theorem3::check_theorem3_full(
            inst.full()?,
            inst.reduced.alpha,
            inst.n_agents,
            inst.reduced.theta_over_eta,
            rho,
            omega,
            opts,
        )
    }

    fn system(
        &self,
        inst: &CertifyInstance,
        omega: f64,
        rho: f64,
        opts: &CertifyOptions,
    ) -> Result<LmiSystem, CertifyError> {
        super::assemble_theorem3(
            inst.full()?,
            inst.reduced.alpha,
            inst.n_agents,
            inst.reduced.theta_over_eta,
            omega,
            rho,
            opts.margin,
        )
    }
}

pub fn builtin_method_names() -> &'static [&'static str] {
    &["full", "reduced", "fullblock"]
}

/// Looks a method up by its registered name.
pub fn lookup_method(name: &str) -> Result<Box<dyn SynthesisMethod>, CertifyError> {
    match name {
        "full" => Ok(Box::new(LightTouchMethod)),
        "reduced" => Ok(Box::new(ReducedMethod)),
        "fullblock" => Ok(Box::new(FullBlockMethod)),
        other => Err(CertifyError::UnknownMethod(other.to_string())),
    }
}

/// The grid walk over `(omega, rho)` shared by all methods; `check` decides
/// one grid point. Grid values are indexed so that repeated probes agree
/// bit-for-bit with the values a re-check would use.
///
/// Feasibility of every registered condition is monotone decreasing in
/// `omega` at fixed `rho`: a witness `(X, lambda)` for `omega_1` stays a
/// witness for `omega_2 <= omega_1` after scaling the agent channel, since
/// `omega` only enters through `lambda (th/eta)^2 omega^2` and the
/// `omega^2 r - lambda` input block. The walk therefore probes each row at
/// `omega = eps` first and skips the row when even that fails; the returned
/// pair is the same the plain descent would find.
pub(crate) fn algorithm2(
    mut check: impl FnMut(f64, f64) -> Result<Certificate, CertifyError>,
    eps: f64,
    step: f64,
) -> Result<(f64, f64, Certificate), CertifyError> {
    if eps <= 0.0 || !(0.0..1.0).contains(&step) || step == 0.0 {
        return Err(CertifyError::InvalidParameter(format!(
            "need eps > 0 and step in (0, 1), got ({eps}, {step})"
        )));
    }
    let mut rho_k = 0u32;
    loop {
        let rho = (eps + f64::from(rho_k) * step).min(1.0);
        let row_floor = match check(eps, rho) {
            Ok(cert) => Some(cert),
            Err(CertifyError::NotFound { best_slack }) => {
                if rho >= 1.0 {
                    return Err(CertifyError::SynthesisFailed {
                        omega: eps,
                        rho,
                        best_slack,
                    });
                }
                rho_k += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        // The row certifies at its floor; descend from omega = 1 to find
        // the largest certified omega on this row.
        let mut omega_j = 0u32;
        loop {
            let omega = (1.0 - f64::from(omega_j) * step).max(eps);
            if omega <= eps {
                return Ok((omega, rho, row_floor.expect("floor probe succeeded")));
            }
            match check(omega, rho) {
                Ok(cert) => return Ok((omega, rho, cert)),
                Err(CertifyError::NotFound { .. }) => omega_j += 1,
                Err(e) => return Err(e),
            }
        }
    }
}

/// Synthesis through a named method: guard, then walk the grid.
pub fn synthesize(
    method: &dyn SynthesisMethod,
    inst: &CertifyInstance,
    eps: f64,
    step: f64,
    opts: &CertifyOptions,
) -> Result<(f64, f64, Certificate), CertifyError> {
    method.guard(inst)?;
    algorithm2(|omega, rho| method.check(inst, omega, rho, opts), eps, step)
}

/// Feasibility map over explicit grids, row-major in `(rho, omega)`.
pub fn sweep(
    method: &dyn SynthesisMethod,
    inst: &CertifyInstance,
    omega_grid: &[f64],
    rho_grid: &[f64],
    opts: &CertifyOptions,
) -> Result<Vec<SweepPoint>, CertifyError> {
    method.guard(inst)?;
    let mut out = Vec::with_capacity(omega_grid.len() * rho_grid.len());
    for &rho in rho_grid {
        for &omega in omega_grid {
            match method.check(inst, omega, rho, opts) {
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
