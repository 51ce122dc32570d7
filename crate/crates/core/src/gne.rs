//! Variational equilibrium solver: Euclidean projection onto the polyhedral
//! feasible set by Dykstra's alternating projections, and the two-projection
//! extragradient iteration with fixed step `1/(2 ell)`.
//!
//! Strong monotonicity makes the equilibrium unique; the natural-map
//! residual `||y - P(y - F(y, x))||` is the stopping measure throughout.

use nalgebra::DVector;
use thiserror::Error;

use crate::game::{
    build_pseudogradient, feasible_set, ControllerGain, GameError, PolyhedralSet, PseudoGradient,
    QuadraticGame,
};
use crate::network::Dynamics;

#[derive(Debug, Error)]
pub enum GneError {
    #[error("projection did not converge within {0} sweeps")]
    MaxIterExceeded(usize),
    #[error("projection cycle stagnated with violation {violation:.3e}; set is likely empty")]
    SetLikelyEmpty { violation: f64 },
    #[error("extragradient did not reach tolerance: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error(
        "Lipschitz bound violated for pair ({i}, {j}): ||dy|| = {lhs:.6e} > {rhs:.6e}"
    )]
    BoundViolated { i: usize, j: usize, lhs: f64, rhs: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Default tolerances: projection 1e-10, equilibrium residual 1e-8.
pub const DEFAULT_PROJECT_TOL: f64 = 1e-10;
pub const DEFAULT_GNE_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Euclidean projection of `z` onto the set by Dykstra's cyclic scheme over
/// the box and each half-space. Box projection is componentwise clamping,
/// half-space projection the closed-form affine step.
pub fn project(
    set: &PolyhedralSet,
    z: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>, GneError> {
    let n_sets = 1 + set.halfspaces.len();
    let dim = set.dim();
    let mut x = z.clone();
    let mut corrections = vec![DVector::<f64>::zeros(dim); n_sets];
    let mut stall_count = 0usize;
    let mut prev_violation = f64::INFINITY;

    for _sweep in 0..max_iter {
        // Box first, then the half-spaces, each with its own correction.
        // Convergence is measured on the correction increments, which is
        // the reliable criterion for this scheme; the iterate itself can
        // crawl while still far from the limit.
        let mut correction_shift = 0.0;
        for (slot, correction) in corrections.iter_mut().enumerate() {
            let y = &x + &*correction;
            let projected = if slot == 0 {
                clamp_to_box(&y, &set.box_lo, &set.box_hi)
            } else {
                project_halfspace(&y, &set.halfspaces[slot - 1])
            };
            let updated = &y - &projected;
            correction_shift += (&updated - &*correction).norm_squared();
            *correction = updated;
            x = projected;
        }
        let violation = set.violation(&x);
        if violation <= tol && correction_shift.sqrt() <= tol * (1.0 + z.norm()) {
            return Ok(x);
        }
        // Empty-set heuristic: the violation stops improving while staying
        // positive across many consecutive sweeps.
        if violation > tol && violation > prev_violation * 0.999 {
            stall_count += 1;
            if stall_count >= 100 {
                return Err(GneError::SetLikelyEmpty { violation });
            }
        } else {
            stall_count = 0;
        }
        prev_violation = violation;
    }
    Err(GneError::MaxIterExceeded(max_iter))
}

fn clamp_to_box(y: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| y[i].clamp(lo[i], hi[i]))
}

fn project_halfspace(y: &DVector<f64>, h: &crate::game::Halfspace) -> DVector<f64> {
    let excess = h.normal.dot(y) - h.offset;
    if excess <= 0.0 {
        y.clone()
    } else {
        y - &h.normal * (excess / h.normal.norm_squared())
    }
}

/// Solution of the variational problem at fixed state.
#[derive(Debug, Clone)]
pub struct GneSolution {
    pub y_star: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Extragradient iteration for the folded map `F(y) = M y + offset`:
/// `y_bar = P(y - a F(y))`, `y+ = P(y - a F(y_bar))` with `a = 1/(2 ell)`.
/// Stops when the natural-map residual falls below `tol`.
pub fn solve_gne(
    pg: &PseudoGradient,
    set: &PolyhedralSet,
    x: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&DVector<f64>>,
) -> Result<GneSolution, GneError> {
    let offset = pg.offset_at(x);
    solve_gne_folded(pg, set, &offset, tol, max_iter, warm_start)
}

/// As [`solve_gne`] but with the state already folded into the constant term.
pub fn solve_gne_folded(
    pg: &PseudoGradient,
    set: &PolyhedralSet,
    offset: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&DVector<f64>>,
) -> Result<GneSolution, GneError> {
    let step = 1.0 / (2.0 * pg.ell);
    let project_tol = (tol * 1e-2).min(DEFAULT_PROJECT_TOL);
    let f = |y: &DVector<f64>| &pg.m_mat * y + offset;
    let mut y = match warm_start {
        Some(w) => project(set, w, project_tol, 100_000)?,
        None => {
            let mid = clamp_to_box(&DVector::zeros(set.dim()), &set.box_lo, &set.box_hi);
            project(set, &mid, project_tol, 100_000)?
        }
    };

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        // Residual check on a full-step natural map.
        let natural = project(set, &(&y - f(&y)), project_tol, 100_000)?;
        residual = (&y - &natural).norm();
        if residual <= tol {
            return Ok(GneSolution {
                y_star: y,
                residual,
                iterations,
            });
        }
        // A small batch of extragradient steps between residual checks.
        for _ in 0..5 {
            let y_bar = project(set, &(&y - f(&y) * step), project_tol, 100_000)?;
            y = project(set, &(&y - f(&y_bar) * step), project_tol, 100_000)?;
            iterations += 1;
        }
    }
    Err(GneError::NoConvergence {
        residual,
        iterations,
    })
}

/// Builds the feasible set and pseudo-gradient at state `x` and solves the
/// variational problem.
pub fn gne_map(
    game: &QuadraticGame,
    dynamics: &Dynamics,
    gain: &ControllerGain,
    x: &DVector<f64>,
    tol: f64,
    warm_start: Option<&DVector<f64>>,
) -> Result<GneSolution, GneError> {
    let set = feasible_set(game, gain, dynamics, x)?;
    let pg = build_pseudogradient(game, gain, dynamics)?;
    solve_gne(&pg, &set, x, tol, DEFAULT_MAX_ITER, warm_start)
}

/// Report from sampling the state-to-equilibrium Lipschitz bound.
#[derive(Debug, Clone)]
pub struct LipschitzReport {
    /// Largest observed `||y*(x) - y*(x')|| / ((theta/eta) ||x - x'||)`.
    pub max_ratio: f64,
    pub pairs_checked: usize,
}

/// Checks `||y*(x) - y*(x')|| <= (theta_exact / eta) ||x - x'|| + 10 tol`
/// over all sample pairs and returns the worst ratio.
pub fn lipschitz_check(
    game: &QuadraticGame,
    dynamics: &Dynamics,
    gain: &ControllerGain,
    x_samples: &[DVector<f64>],
    tol: f64,
) -> Result<LipschitzReport, GneError> {
    assert!(x_samples.len() >= 2, "need at least two state samples");
    let pg = build_pseudogradient(game, gain, dynamics)?;
    let bound_slope = pg.theta_exact / pg.eta;
    let mut solutions = Vec::with_capacity(x_samples.len());
    for x in x_samples {
        solutions.push(gne_map(game, dynamics, gain, x, tol, None)?.y_star);
    }
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0;
    for i in 0..x_samples.len() {
        for j in (i + 1)..x_samples.len() {
            let dx = (&x_samples[i] - &x_samples[j]).norm();
            if dx <= 1e-14 {
                continue;
            }
            let dy = (&solutions[i] - &solutions[j]).norm();
            let rhs = bound_slope * dx + 10.0 * tol;
            if dy > rhs {
                return Err(GneError::BoundViolated {
                    i,
                    j,
                    lhs: dy,
                    rhs,
                });
            }
            if bound_slope > 0.0 {
                max_ratio = max_ratio.max(dy / (bound_slope * dx));
            }
            pairs += 1;
        }
    }
    Ok(LipschitzReport {
        max_ratio,
        pairs_checked: pairs,
    })
}
