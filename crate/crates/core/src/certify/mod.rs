//! Certification and synthesis of regulation gains.
//!
//! Three interchangeable certification routes sit behind the
//! [`SynthesisMethod`] trait and are selected by name through
//! [`lookup_method`]:
//!
//! - `"full"`: the light-touch matrix inequality in the original state
//!   dimension (Lyapunov matrix `X`, multiplier `lambda`), checked at a
//!   fixed `(omega, rho)` grid point.
//! - `"fullblock"`: the full-block S-procedure form over the interconnection
//!   `Delta = diag(A - alpha I, B (x) 1^T)` with matrix multipliers
//!   `R, S, T`; exact but only viable for small networks.
//! - `"reduced"`: scaled-identity multipliers collapse the conditions to a
//!   fixed 4x4 block plus scalar sign constraints that depend on the network
//!   only through two singular values; constant size in followers,
//!   influencers and agents.
//!
//! The bisection-like synthesis loop ([`synthesize`]) walks the `(omega,
//! rho)` grid downward in `omega` and upward in `rho` and returns the first
//! certified pair, i.e. the least intervention at the best certified
//! contraction rate along that path.

mod lighttouch;
mod method;
mod reduced;
mod theorem1;
mod theorem3;

pub use lighttouch::{assemble_lighttouch, check_lighttouch, sweep_lighttouch, synthesize_lighttouch};
pub use method::{
    builtin_method_names, lookup_method, sweep, synthesize, SweepPoint, SynthesisMethod,
};
pub use reduced::{
    assemble_reduced, check_reduced, synthesize_reduced, Eq21Form,
};
pub use theorem1::{assemble_theorem1, check_theorem1};
pub use theorem3::{assemble_theorem3, check_theorem3, theorem3_dimension_guard};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::GameError;
use crate::linalg;
use crate::lmi::{LmiError, LmiSystem, SymmetricMatrix, DEFAULT_MARGIN};
use crate::network::{LtiNetwork, NetworkError};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("A is not Schur (spectral radius {0:.6})")]
    UnstableA(f64),
    #[error("no certificate found (best slack {best_slack:.3e})")]
    NotFound { best_slack: f64 },
    #[error("synthesis exhausted the grid at omega = {omega}, rho = {rho} (best slack {best_slack:.3e})")]
    SynthesisFailed { omega: f64, rho: f64, best_slack: f64 },
    #[error("problem too large for this method: {0}")]
    TooLarge(String),
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Solver knobs shared by every certification route.
#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Required slack for strict matrix inequalities.
    pub margin: f64,
    /// Stall tolerance of the feasibility search.
    pub tol: f64,
    pub max_iter: usize,
    /// Which form of the reduced controller block to use.
    pub eq21_form: Eq21Form,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            tol: 1e-9,
            max_iter: 4000,
            eq21_form: Eq21Form::Expansion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    Theorem1,
    Theorem3,
    Reduced,
}

/// A validated feasibility witness for one of the certification conditions.
/// `witness` is the full coordinate vector of the backing scalar LMI; the
/// layout per kind is documented on the assembling function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub rho: f64,
    /// Light-touch scaling when the certified gain is scalar.
    pub omega: Option<f64>,
    pub lambda: f64,
    pub witness: Vec<f64>,
    /// Achieved `lambda_max` of the assembled condition (<= -margin).
    pub slack: f64,
}

impl Certificate {
    /// Re-checks the stored witness against a freshly assembled system.
    pub fn revalidate(&self, system: &LmiSystem) -> Result<(bool, f64), LmiError> {
        system.check_feasible_point(&DVector::from_vec(self.witness.clone()))
    }
}

/// Singular-value data for the dimension-reduced conditions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReducedParams {
    /// `sigma_max(A - alpha I)`; equals `sigma_max(tau L_F)` for graph dynamics.
    pub delta1: f64,
    /// `sigma_max(B (x) 1_N^T) = sqrt(N) sigma_max(B)`.
    pub delta2: f64,
    /// Common susceptibility (diagonal of `A` in the reduced model).
    pub alpha: f64,
    /// Gain-independent sensitivity ratio `theta_hat / eta`.
    pub theta_over_eta: f64,
}

impl ReducedParams {
    pub fn new(delta1: f64, delta2: f64, alpha: f64, theta_over_eta: f64) -> Result<Self, CertifyError> {
        if delta1 < 0.0 || delta2 < 0.0 || theta_over_eta < 0.0 {
            return Err(CertifyError::InvalidParameter(
                "singular values and sensitivity must be nonnegative".into(),
            ));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CertifyError::InvalidParameter(format!(
                "alpha = {alpha} outside (0, 1]"
            )));
        }
        Ok(Self {
            delta1,
            delta2,
            alpha,
            theta_over_eta,
        })
    }
}

/// The two singular values entering the reduced conditions:
/// `delta1 = sigma_max(tau L_F)` and `delta2 = sqrt(N) sigma_max(B_F)`
/// (the Kronecker row of ones scales singular values by `sqrt(N)`, and
/// zero-padding virtual influencer columns changes nothing).
pub fn deltas(
    network: &LtiNetwork,
    n_agents: usize,
    theta_over_eta: f64,
) -> Result<ReducedParams, CertifyError> {
    let alpha0 = network.alpha[0];
    if network.alpha.iter().any(|a| (a - alpha0).abs() > 1e-12) {
        return Err(CertifyError::InvalidParameter(
            "reduced conditions need a homogeneous susceptibility".into(),
        ));
    }
    let delta1 = linalg::sigma_max(&network.tau_follower_laplacian());
    let delta2 = (n_agents as f64).sqrt() * linalg::sigma_max(&network.b_f);
    ReducedParams::new(delta1, delta2, alpha0, theta_over_eta)
}

/// Full matrices for the state-dimension methods; `delta1_block = A - alpha I`
/// is the symmetric interconnection channel (`-tau L_F` for graph dynamics).
#[derive(Debug, Clone)]
pub struct FullDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub delta1_block: DMatrix<f64>,
}

/// Everything a certification method may need about one instance.
#[derive(Debug, Clone)]
pub struct CertifyInstance {
    pub n_agents: usize,
    pub reduced: ReducedParams,
    pub full: Option<FullDynamics>,
}

impl CertifyInstance {
    /// From graph-induced dynamics with a known sensitivity ratio.
    pub fn from_lti(
        network: &LtiNetwork,
        n_agents: usize,
        theta_over_eta: f64,
    ) -> Result<Self, CertifyError> {
        let reduced = deltas(network, n_agents, theta_over_eta)?;
        let mut delta1_block = network.a_f.clone();
        for i in 0..delta1_block.nrows() {
            delta1_block[(i, i)] -= reduced.alpha;
        }
        Ok(Self {
            n_agents,
            reduced,
            full: Some(FullDynamics {
                a: network.a_f.clone(),
                b: network.b_f.clone(),
                delta1_block,
            }),
        })
    }

    /// From an explicit state-space pair, splitting `A = alpha I + Delta_1`.
    pub fn from_dynamics(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        n_agents: usize,
        alpha: f64,
        theta_over_eta: f64,
    ) -> Result<Self, CertifyError> {
        let mut delta1_block = a.clone();
        for i in 0..delta1_block.nrows() {
            delta1_block[(i, i)] -= alpha;
        }
        let delta1 = linalg::sigma_max(&delta1_block);
        let delta2 = (n_agents as f64).sqrt() * linalg::sigma_max(&b);
        let reduced = ReducedParams::new(delta1, delta2, alpha, theta_over_eta)?;
        Ok(Self {
            n_agents,
            reduced,
            full: Some(FullDynamics { a, b, delta1_block }),
        })
    }

    /// For the reduced route only; the state-dimension methods will refuse it.
    pub fn reduced_only(reduced: ReducedParams, n_agents: usize) -> Self {
        Self {
            n_agents,
            reduced,
            full: None,
        }
    }

    /// Same instance with a different sensitivity ratio, e.g. the exact
    /// constants of a fixed gain instead of the gain-independent bound.
    pub fn with_theta_ratio(&self, theta_over_eta: f64) -> Self {
        let mut out = self.clone();
        out.reduced.theta_over_eta = theta_over_eta;
        out
    }

    pub fn full(&self) -> Result<&FullDynamics, CertifyError> {
        self.full.as_ref().ok_or_else(|| {
            CertifyError::InvalidParameter("method needs full dynamics data".into())
        })
    }
}

/// Generous box on every certification coordinate. The conditions are
/// homogeneous, so witnesses never need this much range; the box keeps the
/// phase-I domain compact (directions of recession would otherwise sink the
/// barrier on infeasible probes).
pub(crate) const MULTIPLIER_CAP: f64 = 1e9;

/// Constant part of a block plus its per-coordinate terms.
type BlockTerms = (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>);

/// Accumulates diagonal blocks of one scalar-coordinate LMI system.
pub(crate) struct SystemBuilder {
    n_coords: usize,
    margin: f64,
    bounds: Vec<(f64, f64)>,
    blocks: Vec<BlockTerms>,
}

impl SystemBuilder {
    pub(crate) fn new(n_coords: usize, margin: f64) -> Self {
        Self {
            n_coords,
            margin,
            bounds: vec![(-MULTIPLIER_CAP, MULTIPLIER_CAP); n_coords],
            blocks: Vec::new(),
        }
    }

    pub(crate) fn bound(&mut self, coord: usize, lo: f64, hi: f64) {
        self.bounds[coord] = (lo, hi);
    }

    /// Adds one diagonal block: constant part plus per-coordinate terms.
    pub(crate) fn block(&mut self, constant: DMatrix<f64>, terms: Vec<(usize, DMatrix<f64>)>) {
        self.blocks.push((constant, terms));
    }

    pub(crate) fn build(self) -> Result<LmiSystem, LmiError> {
        let dim: usize = self.blocks.iter().map(|(c, _)| c.nrows()).sum();
        let mut constant = DMatrix::zeros(dim, dim);
        let mut basis_mats = vec![DMatrix::zeros(dim, dim); self.n_coords];
        let mut offset = 0;
        for (c, terms) in &self.blocks {
            let s = c.nrows();
            constant.view_mut((offset, offset), (s, s)).copy_from(c);
            for (coord, term) in terms {
                let mut view = basis_mats[*coord].view_mut((offset, offset), (s, s));
                view += term;
            }
            offset += s;
        }
        let basis = basis_mats
            .into_iter()
            .map(|m| SymmetricMatrix::symmetrize(&m))
            .collect();
        LmiSystem::new(
            SymmetricMatrix::symmetrize(&constant),
            basis,
            Some(self.bounds),
            self.margin,
        )
    }
}

/// Shift applied to nonstrict `<= 0` blocks: the block is stored as
/// `G - 2 margin I`, so the kernel's `<= -margin` test accepts
/// `lambda_max(G) <= margin`. Strict blocks are stored unshifted.
pub(crate) fn nonstrict_shift(dim: usize, margin: f64) -> DMatrix<f64> {
    DMatrix::identity(dim, dim) * (-2.0 * margin)
}

/// `C^T E_ij C` for the elementary symmetric `E_ij` over the row index set
/// of `C` (ones at `(i,j)` and `(j,i)`).
pub(crate) fn congruence_elementary(c: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
    let ci = c.row(i).transpose();
    let cj = c.row(j).transpose();
    if i == j {
        &ci * ci.transpose()
    } else {
        &ci * cj.transpose() + &cj * ci.transpose()
    }
}

/// `sign * (u v^T + v u^T)` for `a != b`, `sign * u u^T` for `a = b`, with
/// `u`, `v` the rows `a`, `b` of `m`; the congruence of an elementary
/// symmetric middle matrix.
pub(crate) fn outer_rows_sym(m: &DMatrix<f64>, a: usize, b: usize, sign: f64) -> DMatrix<f64> {
    let u = m.row(a).transpose();
    if a == b {
        &u * u.transpose() * sign
    } else {
        let v = m.row(b).transpose();
        (&u * v.transpose() + &v * u.transpose()) * sign
    }
}

/// Wraps a successful solve into a [`Certificate`], revalidating the witness
/// through the independent point check first.
pub(crate) fn certificate_from_solve(
    system: &LmiSystem,
    kind: CertificateKind,
    rho: f64,
    omega: Option<f64>,
    lambda_index: usize,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let res = system.solve_feasibility(opts.tol, opts.max_iter)?;
    if !res.is_feasible() {
        return Err(CertifyError::NotFound {
            best_slack: res.slack,
        });
    }
    let (ok, slack) = system.check_feasible_point(&res.point)?;
    if !ok {
        return Err(CertifyError::NotFound { best_slack: slack });
    }
    Ok(Certificate {
        kind,
        rho,
        omega,
        lambda: res.point[lambda_index],
        witness: res.point.iter().copied().collect(),
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_lti, Edge, SocialGraph};
    use approx::assert_relative_eq;

    #[test]
    fn deltas_two_follower_example() {
        let graph = SocialGraph::new(
            2,
            1,
            vec![
                Edge {
                    a: 0,
                    b: 1,
                    weight: 1.0,
                },
                Edge {
                    a: 2,
                    b: 1,
                    weight: 2.0,
                },
            ],
        )
        .unwrap();
        let net = build_lti(&graph, &nalgebra::DVector::from_element(2, 1.0), 0.1).unwrap();
        let params = deltas(&net, 3, 0.0).unwrap();
        assert_relative_eq!(params.delta1, 0.1 * (2.0 + 2.0_f64.sqrt()), epsilon = 1e-12);
        // B_F = [0, 0.2]^T and N = 3.
        assert_relative_eq!(params.delta2, 0.2 * 3.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn deltas_without_influencers() {
        let graph = SocialGraph::new(
            2,
            0,
            vec![Edge {
                a: 0,
                b: 1,
                weight: 1.0,
            }],
        )
        .unwrap();
        let net = build_lti(&graph, &nalgebra::DVector::from_element(2, 0.9), 0.2).unwrap();
        let params = deltas(&net, 4, 0.5).unwrap();
        assert_eq!(params.delta2, 0.0);
        assert_relative_eq!(params.delta1, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn heterogeneous_alpha_rejected() {
        let graph = SocialGraph::new(
            2,
            0,
            vec![Edge {
                a: 0,
                b: 1,
                weight: 1.0,
            }],
        )
        .unwrap();
        let net = build_lti(&graph, &nalgebra::DVector::from_vec(vec![0.5, 0.9]), 0.1).unwrap();
        assert!(matches!(
            deltas(&net, 2, 0.0),
            Err(CertifyError::InvalidParameter(_))
        ));
    }
}
