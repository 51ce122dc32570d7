//! The two-timescale closed loop: at each outer step the agents play the
//! game to equilibrium at the frozen state, then the state advances one
//! sampling period under the aggregated, gain-scaled investment:
//!
//! ```text
//! y_k = GNE(x_k)
//! x_{k+1} = A x_k + B K y_k
//! ```
//!
//! The inner solve is warm-started from the previous step since the state
//! moves slowly relative to the game.

use std::io::Write;

use nalgebra::DVector;
use thiserror::Error;

use crate::game::{build_pseudogradient, feasible_set, ControllerGain, GameError, QuadraticGame};
use crate::gne::{self, GneError};
use crate::network::Dynamics;

#[derive(Debug, Error)]
pub enum CoevolveError {
    #[error("equilibrium computation failed at step {step}: {source}")]
    GneFailure {
        step: usize,
        #[source]
        source: GneError,
    },
    #[error("no convergence within {0} steps")]
    NoConvergence(usize),
    #[error("need at least {needed} usable steps, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("initial state outside the state box")]
    BadInitialState,
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Solver tolerances for the loop: outer state increment, inner equilibrium
/// residual, projection accuracy.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub state: f64,
    pub gne: f64,
    pub project: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            state: 1e-9,
            gne: 1e-8,
            project: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub k: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub gne_residual: f64,
    /// Smallest state-box margin of `x` (negative means violation).
    pub state_margin: f64,
    /// Smallest income-coupling margin of `y`; `None` without couplings.
    pub coupling_margin: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CoEvolutionTrace {
    pub steps: Vec<TraceStep>,
    /// Final state after the last recorded update.
    pub final_state: DVector<f64>,
    /// True when the state increment fell below tolerance.
    pub converged: bool,
}

impl CoEvolutionTrace {
    /// Distances to a reference state, one per recorded step.
    pub fn distances_to(&self, x_star: &DVector<f64>) -> Vec<f64> {
        self.steps.iter().map(|s| (&s.x - x_star).norm()).collect()
    }
}

fn state_margin(game: &QuadraticGame, x: &DVector<f64>) -> f64 {
    let (lo, hi) = game.state_box();
    x.iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(xi, (l, h))| (xi - l).min(h - xi))
        .fold(f64::INFINITY, f64::min)
}

fn coupling_margin(game: &QuadraticGame, y: &DVector<f64>) -> Option<f64> {
    let c = game.coupling()?;
    let m = game.decision_dim();
    let mut worst = f64::INFINITY;
    for row in 0..c.rhs.len() {
        let mut lhs = 0.0;
        for (i, block) in c.blocks.iter().enumerate() {
            lhs += (block.row(row) * y.rows(i * m, m))[0];
        }
        worst = worst.min(c.rhs[row] - lhs);
    }
    Some(worst)
}

/// Runs the loop for `horizon` steps or until the state settles. The inner
/// equilibrium is warm-started across steps.
pub fn run(
    game: &QuadraticGame,
    dynamics: &Dynamics,
    gain: &ControllerGain,
    x0: &DVector<f64>,
    horizon: usize,
    tols: &Tolerances,
) -> Result<CoEvolutionTrace, CoevolveError> {
    if !game.state_box_contains(x0, 1e-12) {
        return Err(CoevolveError::BadInitialState);
    }
    let pg = build_pseudogradient(game, gain, dynamics)?;
    let k_mat = gain.matrix(game.decision_dim(), game.n_agents());
    let bk = &dynamics.b * &k_mat;

    let mut steps = Vec::with_capacity(horizon.min(4096));
    let mut x = x0.clone();
    let mut warm: Option<DVector<f64>> = None;
    let mut converged = false;

    for k in 0..horizon {
        let set = feasible_set(game, gain, dynamics, &x)?;
        let offset = pg.offset_at(&x);
        let sol = gne::solve_gne_folded(
            &pg,
            &set,
            &offset,
            tols.gne,
            gne::DEFAULT_MAX_ITER,
            warm.as_ref(),
        )
        .map_err(|source| CoevolveError::GneFailure { step: k, source })?;

        steps.push(TraceStep {
            k,
            x: x.clone(),
            y: sol.y_star.clone(),
            gne_residual: sol.residual,
            state_margin: state_margin(game, &x),
            coupling_margin: coupling_margin(game, &sol.y_star),
        });

        let x_next = &dynamics.a * &x + &bk * &sol.y_star;
        let increment = (&x_next - &x).norm();
        warm = Some(sol.y_star);
        x = x_next;
        if increment <= tols.state {
            converged = true;
            break;
        }
    }

    Ok(CoEvolutionTrace {
        steps,
        final_state: x,
        converged,
    })
}

/// Runs the loop from the lower state corner until it settles, then refines
/// the fixed point through one linear solve `x* = (I - A)^{-1} B K y*` and a
/// final equilibrium evaluation at the refined state.
pub fn equilibrium(
    game: &QuadraticGame,
    dynamics: &Dynamics,
    gain: &ControllerGain,
    tols: &Tolerances,
    max_steps: usize,
) -> Result<(DVector<f64>, DVector<f64>), CoevolveError> {
    let x0 = game.state_box().0.clone();
    let trace = run(game, dynamics, gain, &x0, max_steps, tols)?;
    if !trace.converged {
        return Err(CoevolveError::NoConvergence(max_steps));
    }
    let y_last = trace
        .steps
        .last()
        .map(|s| s.y.clone())
        .ok_or(CoevolveError::NoConvergence(0))?;

    let n = dynamics.a.nrows();
    let k_mat = gain.matrix(game.decision_dim(), game.n_agents());
    let bky = &dynamics.b * (&k_mat * &y_last);
    let i_minus_a = nalgebra::DMatrix::identity(n, n) - &dynamics.a;
    let x_star = i_minus_a
        .lu()
        .solve(&bky)
        .ok_or(CoevolveError::NoConvergence(max_steps))?;

    let sol = gne::gne_map(game, dynamics, gain, &x_star, tols.gne, Some(&y_last))
        .map_err(|source| CoevolveError::GneFailure {
            step: max_steps,
            source,
        })?;
    Ok((x_star, sol.y_star))
}

/// Residuals of the equilibrium pair: the steady-state equation, the
/// variational residual at the frozen state, and the membership margins.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub steady_state_residual: f64,
    pub gne_residual: f64,
    pub state_margin: f64,
    pub coupling_margin: Option<f64>,
}

impl EquilibriumReport {
    pub fn passes(&self, steady_tol: f64, gne_tol: f64) -> bool {
        self.steady_state_residual <= steady_tol && self.gne_residual <= gne_tol
    }
}

/// Checks a candidate pair: `||B K y* - (I - A) x*||`, the natural-map
/// residual of `y*` at `x*`, and the membership margins. Report only.
pub fn verify_equilibrium(
    game: &QuadraticGame,
    dynamics: &Dynamics,
    gain: &ControllerGain,
    x_star: &DVector<f64>,
    y_star: &DVector<f64>,
    tols: &Tolerances,
) -> Result<EquilibriumReport, CoevolveError> {
    let k_mat = gain.matrix(game.decision_dim(), game.n_agents());
    let bky = &dynamics.b * (&k_mat * y_star);
    let xa = (nalgebra::DMatrix::identity(dynamics.a.nrows(), dynamics.a.ncols()) - &dynamics.a)
        * x_star;
    let steady_state_residual = (bky - xa).norm();

    let set = feasible_set(game, gain, dynamics, x_star)?;
    let pg = build_pseudogradient(game, gain, dynamics)?;
    let f = pg.eval(y_star, x_star);
    let projected = gne::project(&set, &(y_star - f), tols.project, 1_000_000)
        .map_err(|source| CoevolveError::GneFailure { step: 0, source })?;
    let gne_residual = (y_star - projected).norm();

    Ok(EquilibriumReport {
        steady_state_residual,
        gne_residual,
        state_margin: state_margin(game, x_star),
        coupling_margin: coupling_margin(game, y_star),
    })
}

/// Least-squares geometric rate of a positive decay sequence: the slope of
/// `ln d_k` against `k`, exponentiated. Entries at or below `1e-12` are
/// dropped as numerically converged.
pub fn fit_rate(dists: &[f64]) -> Result<f64, CoevolveError> {
    let usable: Vec<(f64, f64)> = dists
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 1e-12)
        .map(|(k, d)| (k as f64, d.ln()))
        .collect();
    if usable.len() < 5 {
        return Err(CoevolveError::InsufficientData {
            needed: 5,
            have: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let mean_k = usable.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_l = usable.iter().map(|(_, l)| l).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, l) in &usable {
        num += (k - mean_k) * (l - mean_l);
        den += (k - mean_k) * (k - mean_k);
    }
    if den == 0.0 {
        return Err(CoevolveError::InsufficientData { needed: 5, have: 1 });
    }
    Ok((num / den).exp())
}

/// Empirical contraction rate of a trace against a reference equilibrium.
pub fn contraction_estimate(
    trace: &CoEvolutionTrace,
    x_star: &DVector<f64>,
) -> Result<f64, CoevolveError> {
    fit_rate(&trace.distances_to(x_star))
}

/// Coefficient of determination of the log-linear fit, for decay-shape
/// checks.
pub fn log_linear_r2(dists: &[f64]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = dists
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 1e-12)
        .map(|(k, d)| (k as f64, d.ln()))
        .collect();
    if usable.len() < 5 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_k = usable.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_l = usable.iter().map(|(_, l)| l).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (k, l) in &usable {
        sxy += (k - mean_k) * (l - mean_l);
        sxx += (k - mean_k) * (k - mean_k);
        syy += (l - mean_l) * (l - mean_l);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy * sxy / (sxx * syy))
}

/// Writes the summary trace: distance to the reference equilibrium, inner
/// residual and feasibility margins per step.
pub fn write_trace_csv(
    trace: &CoEvolutionTrace,
    x_star: &DVector<f64>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "k,dist_to_eq,gne_residual,state_margin,coupling_margin")?;
    for step in &trace.steps {
        let dist = (&step.x - x_star).norm();
        let coupling = step
            .coupling_margin
            .map(|m| m.to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            step.k, dist, step.gne_residual, step.state_margin, coupling
        )?;
    }
    Ok(())
}

/// Writes every state and decision coordinate per step.
pub fn write_full_state_csv(
    trace: &CoEvolutionTrace,
    out: &mut impl Write,
) -> std::io::Result<()> {
    let n = trace.steps.first().map_or(0, |s| s.x.len());
    let p = trace.steps.first().map_or(0, |s| s.y.len());
    let mut header = String::from("k");
    for i in 0..n {
        header.push_str(&format!(",x{i}"));
    }
    for i in 0..p {
        header.push_str(&format!(",y{i}"));
    }
    writeln!(out, "{header}")?;
    for step in &trace.steps {
        let mut line = step.k.to_string();
        for v in step.x.iter().chain(step.y.iter()) {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
