//! Full-block S-procedure certification over the interconnection form
//! `x^+ = alpha x + [I I] gamma`, `zeta = col(x, omega u)`,
//! `gamma = Delta zeta` with `Delta = diag(A - alpha I, B_pad (x) 1_N^T)`
//! (influencer columns zero-padded square).
//!
//! Two simultaneous conditions in `X, R, S, T, lambda`:
//!
//! ```text
//! (*)^T [R S; S^T T] [I; Delta]  >  0                      (multiplier)
//! (*)^T diag([X 0; 0 -X], [R S; S^T T]) Outer + lambda J <= 0   (contraction)
//! ```
//!
//! Exact but expensive: the coordinate count grows with the fourth power of
//! the follower count, so a hard size guard applies. Matrix variables are
//! lowered to scalar coordinates and solved through the shared kernel.

use nalgebra::{DMatrix, DVector};

use super::{
    certificate_from_solve, nonstrict_shift, outer_rows_sym, Certificate, CertificateKind,
    CertifyError, CertifyOptions, FullDynamics, SystemBuilder,
};
use crate::linalg;
use crate::lmi::LmiSystem;
use crate::network::LtiNetwork;

/// Hard limits for the lowered scalar system.
const MAX_COORDS: usize = 700;
const MAX_BLOCK_DIM: usize = 120;

/// Coordinate bookkeeping for the lowered system.
struct Layout {
    n_prime: usize,
    vx: usize,
    vr: usize,
    vt: usize,
    vs: usize,
}

impl Layout {
    fn new(n_f: usize, n_agents: usize) -> Self {
        let n_prime = n_f * (n_agents + 1);
        Self {
            n_prime,
            vx: n_f * (n_f + 1) / 2,
            vr: n_prime * (n_prime + 1) / 2,
            vt: n_f * (2 * n_f + 1),
            vs: n_prime * 2 * n_f,
        }
    }

    fn total(&self) -> usize {
        self.vx + self.vr + self.vt + self.vs + 1
    }

    fn lambda_index(&self) -> usize {
        self.total() - 1
    }
}

/// Refuses instances whose lowered system exceeds the dense-kernel limits.
pub fn theorem3_dimension_guard(n_followers: usize, n_agents: usize) -> Result<(), CertifyError> {
    let layout = Layout::new(n_followers, n_agents);
    let s18 = n_followers * (n_agents + 3);
    if layout.total() > MAX_COORDS || s18 > MAX_BLOCK_DIM {
        return Err(CertifyError::TooLarge(format!(
            "full-block conditions need {} scalar coordinates on a {}-dim block \
             (limits {MAX_COORDS}/{MAX_BLOCK_DIM}) for {} followers and {} agents",
            layout.total(),
            s18,
            n_followers,
            n_agents
        )));
    }
    Ok(())
}

/// Coordinate layout: upper triangles of `X` (n_F), `R` (n'), `T` (2 n_F),
/// then `S` row-major (n' x 2 n_F), then `lambda`.
pub fn assemble_theorem3(
    full: &FullDynamics,
    alpha: f64,
    n_agents: usize,
    theta_over_eta: f64,
    omega: f64,
    rho: f64,
    margin: f64,
) -> Result<LmiSystem, CertifyError> {
    let n_f = full.a.nrows();
    theorem3_dimension_guard(n_f, n_agents)?;
    let m = full.b.ncols();
    if m > n_f {
        return Err(CertifyError::InvalidParameter(
            "more influencers than followers cannot be zero-padded square".into(),
        ));
    }
    let layout = Layout::new(n_f, n_agents);
    let n_prime = layout.n_prime;
    let s18 = n_f * (n_agents + 3);
    let q_mid = 4 * n_f + n_prime;

    // Delta = diag(A - alpha I, B_pad (x) 1_N^T), with B zero-padded square.
    let mut b_pad = DMatrix::zeros(n_f, n_f);
    b_pad.view_mut((0, 0), (n_f, m)).copy_from(&full.b);
    let ones = DMatrix::from_element(1, n_agents, 1.0);
    let bbar = b_pad.kronecker(&ones); // n_f x (n_f N)
    let mut delta = DMatrix::zeros(2 * n_f, n_prime);
    delta
        .view_mut((0, 0), (n_f, n_f))
        .copy_from(&full.delta1_block);
    delta
        .view_mut((n_f, n_f), (n_f, n_f * n_agents))
        .copy_from(&bbar);

    // Outer factor of the contraction condition, columns (x, gamma, u).
    let mut outer = DMatrix::zeros(q_mid, s18);
    for k in 0..n_f {
        outer[(k, k)] = alpha; // x+ row: alpha x
        outer[(k, n_f + k)] = 1.0; // + gamma_1
        outer[(k, 2 * n_f + k)] = 1.0; // + gamma_2
        outer[(n_f + k, k)] = rho; // rho x row
        outer[(2 * n_f + k, k)] = 1.0; // zeta_1 = x
    }
    for k in 0..n_f * n_agents {
        outer[(3 * n_f + k, 3 * n_f + k)] = omega; // zeta_2 = omega u
    }
    for k in 0..2 * n_f {
        outer[(2 * n_f + n_prime + k, n_f + k)] = 1.0; // gamma rows
    }

    // Middle-matrix row offsets: X at 0, -X at n_f, R at 2 n_f,
    // T at 2 n_f + n'.
    let r_off = 2 * n_f;
    let t_off = 2 * n_f + n_prime;

    let mut cond18: Vec<(usize, DMatrix<f64>)> = Vec::with_capacity(layout.total());
    let mut cond17: Vec<(usize, DMatrix<f64>)> = Vec::with_capacity(layout.vr + layout.vt + layout.vs);
    let mut floor: Vec<(usize, DMatrix<f64>)> = Vec::with_capacity(layout.vx);

    let delta_rows: Vec<DVector<f64>> =
        (0..2 * n_f).map(|j| delta.row(j).transpose()).collect();
    let basis_vec = |i: usize| {
        let mut e = DVector::zeros(n_prime);
        e[i] = 1.0;
        e
    };

    let mut coord = 0;
    for i in 0..n_f {
        for j in i..n_f {
            let mut g = outer_rows_sym(&outer, i, j, 1.0);
            g += outer_rows_sym(&outer, n_f + i, n_f + j, -1.0);
            cond18.push((coord, g));
            let mut e = DMatrix::zeros(n_f, n_f);
            e[(i, j)] = -1.0;
            e[(j, i)] = -1.0;
            floor.push((coord, e));
            coord += 1;
        }
    }
    for i in 0..n_prime {
        for j in i..n_prime {
            cond18.push((coord, outer_rows_sym(&outer, r_off + i, r_off + j, 1.0)));
            let mut e = DMatrix::zeros(n_prime, n_prime);
            e[(i, j)] = -1.0;
            e[(j, i)] = -1.0;
            cond17.push((coord, e));
            coord += 1;
        }
    }
    for i in 0..2 * n_f {
        for j in i..2 * n_f {
            cond18.push((coord, outer_rows_sym(&outer, t_off + i, t_off + j, 1.0)));
            let g = if i == j {
                -(&delta_rows[i] * delta_rows[i].transpose())
            } else {
                -(&delta_rows[i] * delta_rows[j].transpose()
                    + &delta_rows[j] * delta_rows[i].transpose())
            };
            cond17.push((coord, g));
            coord += 1;
        }
    }
    for i in 0..n_prime {
        for (j, delta_row) in delta_rows.iter().enumerate() {
            cond18.push((coord, outer_rows_sym(&outer, r_off + i, t_off + j, 1.0)));
            let ei = basis_vec(i);
            let g = -(&ei * delta_row.transpose() + delta_row * ei.transpose());
            cond17.push((coord, g));
            coord += 1;
        }
    }
    let lambda_idx = layout.lambda_index();
    debug_assert_eq!(coord, lambda_idx);
    let mut lam = DMatrix::zeros(s18, s18);
    let ratio2 = (theta_over_eta * omega).powi(2);
    for k in 0..n_f {
        lam[(k, k)] = ratio2;
    }
    for k in 3 * n_f..s18 {
        lam[(k, k)] = -1.0;
    }
    cond18.push((lambda_idx, lam));

    let mut builder = SystemBuilder::new(layout.total(), margin);
    builder.bound(lambda_idx, 0.0, super::MULTIPLIER_CAP);
    builder.block(nonstrict_shift(s18, margin), cond18);
    builder.block(DMatrix::zeros(n_prime, n_prime), cond17);
    builder.block(DMatrix::identity(n_f, n_f), floor);
    Ok(builder.build()?)
}

pub(crate) fn check_theorem3_full(
    full: &FullDynamics,
    alpha: f64,
    n_agents: usize,
    theta_over_eta: f64,
    rho: f64,
    omega: f64,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let sr = linalg::spectral_radius(&full.a);
    if sr >= 1.0 {
        return Err(CertifyError::UnstableA(sr));
    }
    if !(0.0..=1.0).contains(&omega) || !(0.0..=1.0).contains(&rho) {
        return Err(CertifyError::InvalidParameter(format!(
            "grid point (omega, rho) = ({omega}, {rho}) outside [0, 1]^2"
        )));
    }
    let system = assemble_theorem3(full, alpha, n_agents, theta_over_eta, omega, rho, opts.margin)?;
    let lambda_idx = system.n_coords() - 1;
    certificate_from_solve(
        &system,
        CertificateKind::Theorem3,
        rho,
        Some(omega),
        lambda_idx,
        opts,
    )
}

/// Full-block feasibility check on graph-induced dynamics; the network must
/// carry a homogeneous susceptibility and a Schur `A_F`.
pub fn check_theorem3(
    network: &LtiNetwork,
    n_agents: usize,
    theta_over_eta: f64,
    rho: f64,
    omega: f64,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let inst = super::CertifyInstance::from_lti(network, n_agents, theta_over_eta)?;
    check_theorem3_full(
        inst.full()?,
        inst.reduced.alpha,
        n_agents,
        theta_over_eta,
        rho,
        omega,
        opts,
    )
}
