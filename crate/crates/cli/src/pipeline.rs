//! Experiment orchestration: scenario to instance, controller resolution,
//! the closed-loop run, and multi-seed comparison tables.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use coevo::certify::{
    check_theorem1, lookup_method, Certificate, CertifyError, CertifyInstance, CertifyOptions,
    SweepPoint,
};
use coevo::coevolve::{self, CoEvolutionTrace, EquilibriumReport, Tolerances};
use coevo::game::{build_pseudogradient, theta_hat, ControllerGain, QuadraticGame};
use coevo::lmi;
use coevo::network::{generate_case_study, Dynamics, SocialGraph};

use crate::scenario::{ControllerSpec, Scenario};
use crate::CliError;

/// Norm cap for externally supplied gain blocks.
pub const GAIN_CAP: f64 = 1.0;

/// A concrete experiment instance with the certification inputs
/// precomputed.
pub struct BuiltInstance {
    pub label: String,
    pub game: QuadraticGame,
    pub dynamics: Dynamics,
    pub graph: Option<SocialGraph>,
    pub n_agents: usize,
    pub alpha: f64,
    pub tau: Option<f64>,
    /// Gain-independent sensitivity ratio `theta_hat / eta`, with `eta`
    /// taken as the worst strong-monotonicity constant over the gain range
    /// (the constant is concave in `omega^2`, so the endpoints decide).
    pub theta_ratio: f64,
    pub certify: CertifyInstance,
}

fn worst_eta(game: &QuadraticGame, dynamics: &Dynamics) -> Result<f64, CliError> {
    let eta0 = build_pseudogradient(game, &ControllerGain::LightTouch { omega: 0.0 }, dynamics)?
        .eta;
    let eta1 = build_pseudogradient(game, &ControllerGain::LightTouch { omega: 1.0 }, dynamics)?
        .eta;
    Ok(eta0.min(eta1))
}

/// Generates the randomized market instance described by the scenario.
pub fn build_from_scenario(s: &Scenario) -> Result<BuiltInstance, CliError> {
    s.validate()?;
    let inst = generate_case_study(s.seed, &s.case_study_config())?;
    let net = inst.lti()?;
    let dynamics = net.dynamics();
    let eta = worst_eta(&inst.game, &dynamics)?;
    let ratio = theta_hat(&inst.game, &dynamics) / eta;
    let certify = CertifyInstance::from_lti(&net, s.n_agents, ratio)?;
    Ok(BuiltInstance {
        label: format!(
            "seed{}_f{}_i{}_a{}",
            s.seed, s.n_followers, s.n_influencers, s.n_agents
        ),
        game: inst.game,
        dynamics,
        graph: Some(inst.graph),
        n_agents: s.n_agents,
        alpha: inst.alpha,
        tau: Some(net.tau),
        theta_ratio: ratio,
        certify,
    })
}

/// The closed-form scalar example: one firm, one influencer, one follower,
/// `A = 0.5`, `B = 1`, unit weights, target 1, state box `[0, 2]`. The loop
/// under full influence contracts at 0.25 towards `(2/3, 1/3)`.
pub fn scalar_instance() -> Result<BuiltInstance, CliError> {
    let game = QuadraticGame::new(
        vec![DMatrix::from_element(1, 1, 1.0)],
        vec![DVector::from_element(1, 1.0)],
        vec![DMatrix::from_element(1, 1, 1.0)],
        vec![DVector::from_element(1, -10.0)],
        vec![DVector::from_element(1, 10.0)],
        None,
        DVector::zeros(1),
        DVector::from_element(1, 2.0),
    )?;
    let dynamics = Dynamics {
        a: DMatrix::from_element(1, 1, 0.5),
        b: DMatrix::from_element(1, 1, 1.0),
    };
    let eta = worst_eta(&game, &dynamics)?;
    let ratio = theta_hat(&game, &dynamics) / eta;
    let certify =
        CertifyInstance::from_dynamics(dynamics.a.clone(), dynamics.b.clone(), 1, 0.5, ratio)?;
    Ok(BuiltInstance {
        label: "scalar".to_string(),
        game,
        dynamics,
        graph: None,
        n_agents: 1,
        alpha: 0.5,
        tau: None,
        theta_ratio: ratio,
        certify,
    })
}

/// How the gain used by a run was obtained.
#[derive(Debug, Clone)]
pub struct ResolvedController {
    pub gain: ControllerGain,
    pub omega: Option<f64>,
    pub rho: Option<f64>,
    pub certificate: Option<Certificate>,
    pub synthesize_seconds: f64,
}

/// Smallest certified rate for a fixed check, located by bisection on the
/// rate (feasibility is monotone increasing in it). The bracket starts one
/// precision step inside the unit rate, which the certificates exclude.
fn best_rate(
    mut feasible_at: impl FnMut(f64) -> Result<Certificate, CertifyError>,
    precision: f64,
) -> Option<(f64, Certificate)> {
    let mut cache: Option<(f64, Certificate)> = None;
    let result = lmi::bisect_scalar(
        |v| {
            let rho = 1.0 - v;
            match feasible_at(rho) {
                Ok(cert) => {
                    cache = Some((rho, cert));
                    true
                }
                Err(_) => false,
            }
        },
        precision,
        1.0,
        precision,
    );
    match result {
        Ok(_) => cache,
        Err(_) => None,
    }
}

/// Resolves the controller per the scenario spec: synthesis for `Auto`,
/// best-rate certification for fixed gains.
pub fn resolve_controller(
    inst: &BuiltInstance,
    spec: &ControllerSpec,
    method_name: &str,
    eps: f64,
    step: f64,
    opts: &CertifyOptions,
) -> Result<ResolvedController, CliError> {
    let method = lookup_method(method_name)?;
    let t0 = Instant::now();
    match spec {
        ControllerSpec::Auto => {
            let (omega, rho, cert) =
                coevo::certify::synthesize(method.as_ref(), &inst.certify, eps, step, opts)?;
            Ok(ResolvedController {
                gain: ControllerGain::LightTouch { omega },
                omega: Some(omega),
                rho: Some(rho),
                certificate: Some(cert),
                synthesize_seconds: t0.elapsed().as_secs_f64(),
            })
        }
        ControllerSpec::FixedOmega { omega } => {
            method.guard(&inst.certify)?;
            // With the gain fixed, the exact sensitivity constants of that
            // gain replace the gain-independent bound used by synthesis.
            let gain = ControllerGain::LightTouch { omega: *omega };
            let pg = build_pseudogradient(&inst.game, &gain, &inst.dynamics)?;
            let fixed = inst.certify.with_theta_ratio(if *omega > 0.0 {
                pg.theta_exact / (pg.eta * *omega)
            } else {
                0.0
            });
            let found = best_rate(
                |rho| method.check(&fixed, *omega, rho, opts),
                step.max(1e-4),
            );
            let (rho, certificate) = match found {
                Some((rho, cert)) => (Some(rho), Some(cert)),
                None => (None, None),
            };
            Ok(ResolvedController {
                gain: ControllerGain::LightTouch { omega: *omega },
                omega: Some(*omega),
                rho,
                certificate,
                synthesize_seconds: t0.elapsed().as_secs_f64(),
            })
        }
        ControllerSpec::GainFile { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                detail: e.to_string(),
            })?;
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(&text).map_err(|e| CliError::Parse {
                    path: path.clone(),
                    detail: e.to_string(),
                })?;
            let m = inst.game.decision_dim();
            let p = inst.game.total_dim();
            if rows.len() != m || rows.iter().any(|r| r.len() != p) {
                return Err(CliError::Validation(format!(
                    "gain file must hold an {m} x {p} matrix"
                )));
            }
            let k = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
            let gain = ControllerGain::Matrix(k.clone());
            gain.validate(m, inst.n_agents, GAIN_CAP)?;
            // Exact sensitivity constants for the supplied gain.
            let pg = build_pseudogradient(&inst.game, &gain, &inst.dynamics)?;
            let ratio = pg.theta_exact / pg.eta;
            let bk = &inst.dynamics.b * &k;
            let found = best_rate(
                |rho| check_theorem1(&inst.dynamics.a, &bk, ratio, rho, opts),
                step.max(1e-4),
            );
            let (rho, certificate) = match found {
                Some((rho, cert)) => (Some(rho), Some(cert)),
                None => (None, None),
            };
            Ok(ResolvedController {
                gain,
                omega: None,
                rho,
                certificate,
                synthesize_seconds: t0.elapsed().as_secs_f64(),
            })
        }
    }
}

pub struct SimulationResult {
    pub controller: ResolvedController,
    pub trace: CoEvolutionTrace,
    pub x_star: DVector<f64>,
    pub y_star: DVector<f64>,
    pub report: EquilibriumReport,
    pub rho_hat: Option<f64>,
    pub log_linear_r2: Option<f64>,
    pub min_state_margin: f64,
    pub min_coupling_margin: Option<f64>,
    pub simulate_seconds: f64,
}

/// Full run: resolve the controller, run the loop from the lower state
/// corner, locate and verify the equilibrium, and fit the empirical rate.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    inst: &BuiltInstance,
    spec: &ControllerSpec,
    method_name: &str,
    eps: f64,
    step: f64,
    horizon: usize,
    tols: &Tolerances,
    opts: &CertifyOptions,
) -> Result<SimulationResult, CliError> {
    let controller = resolve_controller(inst, spec, method_name, eps, step, opts)?;
    let t0 = Instant::now();
    let x0 = inst.game.state_box().0.clone();
    let trace = coevolve::run(&inst.game, &inst.dynamics, &controller.gain, &x0, horizon, tols)?;
    let (x_star, y_star) =
        coevolve::equilibrium(&inst.game, &inst.dynamics, &controller.gain, tols, horizon.max(500))?;
    let report = coevolve::verify_equilibrium(
        &inst.game,
        &inst.dynamics,
        &controller.gain,
        &x_star,
        &y_star,
        tols,
    )?;
    let dists = trace.distances_to(&x_star);
    let rho_hat = coevolve::fit_rate(&dists).ok();
    let r2 = coevolve::log_linear_r2(&dists);
    let min_state_margin = trace
        .steps
        .iter()
        .map(|s| s.state_margin)
        .fold(f64::INFINITY, f64::min);
    let min_coupling_margin = trace
        .steps
        .iter()
        .filter_map(|s| s.coupling_margin)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));

    Ok(SimulationResult {
        controller,
        trace,
        x_star,
        y_star,
        report,
        rho_hat,
        log_linear_r2: r2,
        min_state_margin,
        min_coupling_margin,
        simulate_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Feasibility sweep over the unit grid with the scenario's step.
pub fn sweep_grid(
    inst: &BuiltInstance,
    method_name: &str,
    step: f64,
    opts: &CertifyOptions,
) -> Result<Vec<SweepPoint>, CliError> {
    let method = lookup_method(method_name)?;
    let ticks = (1.0 / step).round() as usize;
    let omegas: Vec<f64> = (0..=ticks).map(|k| (k as f64 * step).min(1.0)).collect();
    let rhos: Vec<f64> = (1..=ticks).map(|k| (k as f64 * step).min(1.0)).collect();
    Ok(coevo::certify::sweep(
        method.as_ref(),
        &inst.certify,
        &omegas,
        &rhos,
        opts,
    )?)
}

/// One averaged row of the size/method comparison table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TableRow {
    pub label: String,
    pub n_followers: usize,
    pub n_influencers: usize,
    pub n_agents: usize,
    pub method: String,
    pub seeds: usize,
    pub omega_mean: f64,
    pub rho_mean: f64,
    pub synth_wall_s_mean: f64,
}

/// Synthesizes over `n_seeds` consecutive seeds per scenario and averages
/// the results. Any method guard refusal aborts the table, mirroring runs
/// that are too large for the chosen route.
pub fn run_table(
    scenarios: &[Scenario],
    method_name: &str,
    n_seeds: usize,
    opts: &CertifyOptions,
) -> Result<Vec<TableRow>, CliError> {
    if scenarios.is_empty() {
        return Err(CliError::Usage("table needs at least one scenario".into()));
    }
    let method = lookup_method(method_name)?;
    let mut rows = Vec::with_capacity(scenarios.len());
    for base in scenarios {
        let mut omegas = 0.0;
        let mut rhos = 0.0;
        let mut walls = 0.0;
        method.guard_dims(base.n_followers, base.n_influencers, base.n_agents)?;
        for k in 0..n_seeds {
            let mut s = base.clone();
            s.seed = base.seed + k as u64;
            let inst = build_from_scenario(&s)?;
            method.guard(&inst.certify)?;
            let t0 = Instant::now();
            let (omega, rho, _) =
                coevo::certify::synthesize(method.as_ref(), &inst.certify, s.eps, s.step, opts)?;
            walls += t0.elapsed().as_secs_f64();
            omegas += omega;
            rhos += rho;
        }
        let n = n_seeds as f64;
        rows.push(TableRow {
            label: format!("f{}_i{}_a{}", base.n_followers, base.n_influencers, base.n_agents),
            n_followers: base.n_followers,
            n_influencers: base.n_influencers,
            n_agents: base.n_agents,
            method: method_name.to_string(),
            seeds: n_seeds,
            omega_mean: omegas / n,
            rho_mean: rhos / n,
            synth_wall_s_mean: walls / n,
        });
    }
    Ok(rows)
}
