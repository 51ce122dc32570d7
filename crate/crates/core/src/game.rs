//! The quadratic game with external state influence, its affine
//! pseudo-gradient map and the state-dependent polyhedral feasible set.
//!
//! Each of the `N` agents holds a decision `y_i` in an `m`-dimensional box
//! and pays
//!
//! ```text
//! J_i(y, x) = 1/2 ||A x + B K y - xbar_i||^2_{Q_i} + 1/2 ||y_i||^2_{R_i}
//! ```
//!
//! subject to shared half-space couplings `sum_i C_i y_i <= d` and, through
//! the closed loop, to the state box `lo <= A x + B K y <= hi` recast as
//! half-spaces on `y` at the current state.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::network::Dynamics;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("{0} must be positive definite")]
    NotPositiveDefinite(String),
    #[error("pseudo-gradient is not strongly monotone (eta = {0:.3e})")]
    NotStronglyMonotone(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("feasible set is empty: {0}")]
    EmptySet(String),
    #[error("invalid controller gain: {0}")]
    InvalidGain(String),
}

/// Shared half-space coupling `sum_i C_i y_i <= d`.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// One `l x m` block per agent.
    pub blocks: Vec<DMatrix<f64>>,
    pub rhs: DVector<f64>,
}

/// Quadratic game data. All weight matrices are validated positive definite
/// at construction.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    n_agents: usize,
    decision_dim: usize,
    state_dim: usize,
    q: Vec<DMatrix<f64>>,
    targets: Vec<DVector<f64>>,
    r: Vec<DMatrix<f64>>,
    box_lo: Vec<DVector<f64>>,
    box_hi: Vec<DVector<f64>>,
    coupling: Option<Coupling>,
    state_lo: DVector<f64>,
    state_hi: DVector<f64>,
}

impl QuadraticGame {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q: Vec<DMatrix<f64>>,
        targets: Vec<DVector<f64>>,
        r: Vec<DMatrix<f64>>,
        box_lo: Vec<DVector<f64>>,
        box_hi: Vec<DVector<f64>>,
        coupling: Option<Coupling>,
        state_lo: DVector<f64>,
        state_hi: DVector<f64>,
    ) -> Result<Self, GameError> {
        let n_agents = q.len();
        if n_agents == 0 {
            return Err(GameError::DimensionMismatch("no agents".into()));
        }
        if [targets.len(), r.len(), box_lo.len(), box_hi.len()]
            .iter()
            .any(|&l| l != n_agents)
        {
            return Err(GameError::DimensionMismatch(
                "per-agent field lengths differ".into(),
            ));
        }
        let state_dim = q[0].nrows();
        let decision_dim = r[0].nrows();
        for (i, qi) in q.iter().enumerate() {
            if qi.nrows() != state_dim || qi.ncols() != state_dim {
                return Err(GameError::DimensionMismatch(format!("Q_{i} shape")));
            }
            if linalg::lambda_min_sym(&linalg::symmetric_part(qi)) <= 0.0 {
                return Err(GameError::NotPositiveDefinite(format!("Q_{i}")));
            }
        }
        for (i, ri) in r.iter().enumerate() {
            if ri.nrows() != decision_dim || ri.ncols() != decision_dim {
                return Err(GameError::DimensionMismatch(format!("R_{i} shape")));
            }
            if linalg::lambda_min_sym(&linalg::symmetric_part(ri)) <= 0.0 {
                return Err(GameError::NotPositiveDefinite(format!("R_{i}")));
            }
        }
        for (i, t) in targets.iter().enumerate() {
            if t.len() != state_dim {
                return Err(GameError::DimensionMismatch(format!("target_{i} length")));
            }
        }
        for i in 0..n_agents {
            if box_lo[i].len() != decision_dim || box_hi[i].len() != decision_dim {
                return Err(GameError::DimensionMismatch(format!("box_{i} length")));
            }
            if box_lo[i].iter().zip(box_hi[i].iter()).any(|(l, h)| l > h) {
                return Err(GameError::EmptySet(format!("box_{i} has lo > hi")));
            }
        }
        if let Some(c) = &coupling {
            if c.blocks.len() != n_agents {
                return Err(GameError::DimensionMismatch("coupling block count".into()));
            }
            let rows = c.rhs.len();
            for (i, b) in c.blocks.iter().enumerate() {
                if b.nrows() != rows || b.ncols() != decision_dim {
                    return Err(GameError::DimensionMismatch(format!(
                        "coupling block {i} shape"
                    )));
                }
            }
        }
        if state_lo.len() != state_dim || state_hi.len() != state_dim {
            return Err(GameError::DimensionMismatch("state box length".into()));
        }
        if state_lo.iter().zip(state_hi.iter()).any(|(l, h)| l > h) {
            return Err(GameError::EmptySet("state box has lo > hi".into()));
        }
        Ok(Self {
            n_agents,
            decision_dim,
            state_dim,
            q,
            targets,
            r,
            box_lo,
            box_hi,
            coupling,
            state_lo,
            state_hi,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn decision_dim(&self) -> usize {
        self.decision_dim
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Total decision dimension `p = m * N`.
    pub fn total_dim(&self) -> usize {
        self.decision_dim * self.n_agents
    }

    pub fn weights_q(&self) -> &[DMatrix<f64>] {
        &self.q
    }

    pub fn weights_r(&self) -> &[DMatrix<f64>] {
        &self.r
    }

    pub fn targets(&self) -> &[DVector<f64>] {
        &self.targets
    }

    pub fn coupling(&self) -> Option<&Coupling> {
        self.coupling.as_ref()
    }

    pub fn state_box(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.state_lo, &self.state_hi)
    }

    pub fn state_box_contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter()
            .zip(self.state_lo.iter().zip(self.state_hi.iter()))
            .all(|(xi, (lo, hi))| *xi >= lo - tol && *xi <= hi + tol)
    }

    /// Stacked decision box over all agents.
    pub fn stacked_box(&self) -> (DVector<f64>, DVector<f64>) {
        let p = self.total_dim();
        let mut lo = DVector::zeros(p);
        let mut hi = DVector::zeros(p);
        for i in 0..self.n_agents {
            lo.rows_mut(i * self.decision_dim, self.decision_dim)
                .copy_from(&self.box_lo[i]);
            hi.rows_mut(i * self.decision_dim, self.decision_dim)
                .copy_from(&self.box_hi[i]);
        }
        (lo, hi)
    }

    /// `col((Q_i))`, the vertically stacked weight matrices.
    pub fn stacked_q(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.state_dim * self.n_agents, self.state_dim);
        for (i, qi) in self.q.iter().enumerate() {
            out.rows_mut(i * self.state_dim, self.state_dim)
                .copy_from(qi);
        }
        out
    }

    /// `sigma_max(col((Q_i)) A)`. Scalar-identity weights reduce it to
    /// `sqrt(sum c_i^2) sigma_max(A)`, which keeps large networks cheap.
    pub(crate) fn stacked_q_times_norm(&self, a: &DMatrix<f64>) -> f64 {
        let scalars: Option<Vec<f64>> = self.q.iter().map(linalg::scalar_identity).collect();
        match scalars {
            Some(cs) => {
                let scale = cs.iter().map(|c| c * c).sum::<f64>().sqrt();
                scale * linalg::sigma_max(a)
            }
            None => linalg::sigma_max(&(self.stacked_q() * a)),
        }
    }
}

/// Controller gain `u = K y` with the stacking `y = col((y_i))`.
#[derive(Debug, Clone)]
pub enum ControllerGain {
    /// Full `m x (m N)` gain matrix.
    Matrix(DMatrix<f64>),
    /// `K_i = omega * I_m` for every agent: `u = omega * sum_i y_i`.
    LightTouch { omega: f64 },
}

impl ControllerGain {
    /// The assembled `m x (m N)` gain.
    pub fn matrix(&self, decision_dim: usize, n_agents: usize) -> DMatrix<f64> {
        match self {
            ControllerGain::Matrix(k) => k.clone(),
            ControllerGain::LightTouch { omega } => {
                let mut k = DMatrix::zeros(decision_dim, decision_dim * n_agents);
                for i in 0..n_agents {
                    for d in 0..decision_dim {
                        k[(d, i * decision_dim + d)] = *omega;
                    }
                }
                k
            }
        }
    }

    pub fn omega(&self) -> Option<f64> {
        match self {
            ControllerGain::LightTouch { omega } => Some(*omega),
            ControllerGain::Matrix(_) => None,
        }
    }

    /// Validates the light-touch range or, for full matrices, nonnegative
    /// entries and the per-agent block norm cap.
    pub fn validate(
        &self,
        decision_dim: usize,
        n_agents: usize,
        cap: f64,
    ) -> Result<(), GameError> {
        match self {
            ControllerGain::LightTouch { omega } => {
                if !(0.0..=1.0).contains(omega) {
                    return Err(GameError::InvalidGain(format!(
                        "omega = {omega} outside [0, 1]"
                    )));
                }
            }
            ControllerGain::Matrix(k) => {
                if k.nrows() != decision_dim || k.ncols() != decision_dim * n_agents {
                    return Err(GameError::DimensionMismatch("gain matrix shape".into()));
                }
                if k.iter().any(|e| *e < 0.0) {
                    return Err(GameError::InvalidGain("negative gain entry".into()));
                }
                for i in 0..n_agents {
                    let block = k.columns(i * decision_dim, decision_dim).into_owned();
                    let norm = linalg::sigma_max(&block);
                    if norm > cap + 1e-12 {
                        return Err(GameError::InvalidGain(format!(
                            "||K_{i}|| = {norm:.6} exceeds cap {cap}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Affine pseudo-gradient `F(y, x) = M y + N_x x + c` together with its
/// strong-monotonicity/Lipschitz constants and the state-sensitivity bounds.
#[derive(Debug, Clone)]
pub struct PseudoGradient {
    pub m_mat: DMatrix<f64>,
    pub n_x: DMatrix<f64>,
    pub c: DVector<f64>,
    pub eta: f64,
    pub ell: f64,
    /// Exact `sigma_max(N_x)`.
    pub theta_exact: f64,
    /// Product-of-norms upper bound on `theta_exact`.
    pub theta_bound: f64,
}

impl PseudoGradient {
    pub fn eval(&self, y: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        &self.m_mat * y + &self.n_x * x + &self.c
    }

    /// Constant part with the state folded in: `F(y, x) = M y + offset(x)`.
    pub fn offset_at(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.n_x * x + &self.c
    }
}

/// Assembles the pseudo-gradient of the quadratic game under gain `K`:
/// `M_ii = R_i + K_i^T B^T Q_i B K_i`, `M_ij = K_i^T B^T Q_i B K_j`,
/// row-block `i` of `N_x` is `K_i^T B^T Q_i A` and `c_i = -K_i^T B^T Q_i xbar_i`.
pub fn build_pseudogradient(
    game: &QuadraticGame,
    gain: &ControllerGain,
    dynamics: &Dynamics,
) -> Result<PseudoGradient, GameError> {
    let n = game.state_dim();
    let m = game.decision_dim();
    let n_agents = game.n_agents();
    let p = game.total_dim();
    if dynamics.a.nrows() != n || dynamics.b.nrows() != n || dynamics.b.ncols() != m {
        return Err(GameError::DimensionMismatch(
            "dynamics incompatible with game".into(),
        ));
    }
    let k = gain.matrix(m, n_agents);
    if k.nrows() != m || k.ncols() != p {
        return Err(GameError::DimensionMismatch("gain matrix shape".into()));
    }

    let bk = &dynamics.b * &k; // n x p
    let mut m_mat = DMatrix::zeros(p, p);
    let mut n_x = DMatrix::zeros(p, n);
    let mut c = DVector::zeros(p);
    for i in 0..n_agents {
        let ki = k.columns(i * m, m).into_owned();
        let gi = ki.transpose() * dynamics.b.transpose() * &game.q[i]; // m x n
        m_mat.rows_mut(i * m, m).copy_from(&(&gi * &bk));
        for a in 0..m {
            for b in 0..m {
                m_mat[(i * m + a, i * m + b)] += game.r[i][(a, b)];
            }
        }
        n_x.rows_mut(i * m, m).copy_from(&(&gi * &dynamics.a));
        c.rows_mut(i * m, m).copy_from(&(-(&gi * &game.targets[i])));
    }

    let (eta, ell) = monotonicity_constants_of(&m_mat)?;
    let theta_exact = linalg::sigma_max(&n_x);
    let max_block = (0..n_agents)
        .map(|i| linalg::sigma_max(&(&dynamics.b * k.columns(i * m, m).into_owned())))
        .fold(0.0_f64, f64::max);
    let theta_bound = game.stacked_q_times_norm(&dynamics.a) * max_block;

    Ok(PseudoGradient {
        m_mat,
        n_x,
        c,
        eta,
        ell,
        theta_exact,
        theta_bound,
    })
}

/// Gain-independent bound on the state sensitivity for light-touch gains
/// with `omega <= 1`: `||col(Q_i) A|| * ||B||`.
pub fn theta_hat(game: &QuadraticGame, dynamics: &Dynamics) -> f64 {
    game.stacked_q_times_norm(&dynamics.a) * linalg::sigma_max(&dynamics.b)
}

/// Strong-monotonicity and Lipschitz constants of the assembled map.
pub fn monotonicity_constants(pg: &PseudoGradient) -> (f64, f64) {
    (pg.eta, pg.ell)
}

fn monotonicity_constants_of(m_mat: &DMatrix<f64>) -> Result<(f64, f64), GameError> {
    let eta = linalg::lambda_min_sym(&linalg::symmetric_part(m_mat));
    if eta <= 1e-12 {
        return Err(GameError::NotStronglyMonotone(eta));
    }
    let ell = linalg::sigma_max(m_mat);
    Ok((eta, ell))
}

/// Half-space `normal . y <= offset` with a nonzero normal.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// Box-plus-half-spaces feasible region in the stacked decision space.
#[derive(Debug, Clone)]
pub struct PolyhedralSet {
    pub box_lo: DVector<f64>,
    pub box_hi: DVector<f64>,
    pub halfspaces: Vec<Halfspace>,
}

impl PolyhedralSet {
    pub fn dim(&self) -> usize {
        self.box_lo.len()
    }

    /// Largest constraint violation at `y` (0 when feasible).
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for ((lo, hi), yi) in self.box_lo.iter().zip(self.box_hi.iter()).zip(y.iter()) {
            v = v.max(lo - yi).max(yi - hi);
        }
        for h in &self.halfspaces {
            v = v.max(h.normal.dot(y) - h.offset);
        }
        v
    }

    /// Smallest half-space margin `offset - normal . y`; `None` when there
    /// are no half-spaces.
    pub fn halfspace_margin(&self, y: &DVector<f64>) -> Option<f64> {
        self.halfspaces
            .iter()
            .map(|h| h.offset - h.normal.dot(y))
            .fold(None, |acc, m| Some(acc.map_or(m, |a: f64| a.min(m))))
    }
}

/// Feasible set at state `x`: the decision boxes, the income couplings and
/// the state box recast on `y` through `lo <= A x + B K y <= hi`. Rows whose
/// normal vanishes are dropped when trivially true and reported as
/// `EmptySet` when trivially false.
pub fn feasible_set(
    game: &QuadraticGame,
    gain: &ControllerGain,
    dynamics: &Dynamics,
    x: &DVector<f64>,
) -> Result<PolyhedralSet, GameError> {
    if x.len() != game.state_dim() {
        return Err(GameError::DimensionMismatch("state length".into()));
    }
    let (box_lo, box_hi) = game.stacked_box();
    let mut halfspaces = Vec::new();

    if let Some(c) = game.coupling() {
        let p = game.total_dim();
        let m = game.decision_dim();
        for row in 0..c.rhs.len() {
            let mut normal = DVector::zeros(p);
            for (i, block) in c.blocks.iter().enumerate() {
                normal
                    .rows_mut(i * m, m)
                    .copy_from(&block.row(row).transpose());
            }
            if normal.norm() > 0.0 {
                halfspaces.push(Halfspace {
                    normal,
                    offset: c.rhs[row],
                });
            }
        }
    }

    let k = gain.matrix(game.decision_dim(), game.n_agents());
    let g = &dynamics.b * &k; // n x p
    let ax = &dynamics.a * x;
    let (state_lo, state_hi) = game.state_box();
    for j in 0..game.state_dim() {
        let row = g.row(j).transpose();
        let upper = state_hi[j] - ax[j];
        let lower = ax[j] - state_lo[j];
        if row.norm() == 0.0 {
            if upper < -1e-12 || lower < -1e-12 {
                return Err(GameError::EmptySet(format!(
                    "state row {j} is unreachable: A x = {:.6} outside [{:.6}, {:.6}]",
                    ax[j], state_lo[j], state_hi[j]
                )));
            }
            continue;
        }
        halfspaces.push(Halfspace {
            normal: row.clone(),
            offset: upper,
        });
        halfspaces.push(Halfspace {
            normal: -row,
            offset: lower,
        });
    }

    Ok(PolyhedralSet {
        box_lo,
        box_hi,
        halfspaces,
    })
}
