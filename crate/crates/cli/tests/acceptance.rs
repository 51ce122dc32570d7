//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Criteria that share the ten seeded market runs reuse a cached set
//! of results.
//!
//! Run with `cargo test -p coevo-cli --test acceptance -- --nocapture` to
//! see the per-criterion lines.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coevo::certify::{
    assemble_reduced, check_reduced, lookup_method, synthesize_reduced, CertifyError,
    CertifyOptions, Eq21Form,
};
use coevo::coevolve::Tolerances;
use coevo::game::{Halfspace, PolyhedralSet};
use coevo::gne::{lipschitz_check, project};
use coevo::lmi::{LmiSystem, SymmetricMatrix};
use coevo::network::{build_lti, generate_case_study, max_stable_tau, CaseStudyConfig};
use coevo_cli::pipeline::{self, SimulationResult};
use coevo_cli::scenario::{ControllerSpec, Scenario};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:02} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// One seeded market run used by criteria 2, 3 and 11.
struct CaseRun {
    seed: u64,
    omega: f64,
    rho: f64,
    rho_hat: f64,
    r2: f64,
    steady: f64,
    gne: f64,
    state_margin: f64,
    coupling_margin: f64,
    seconds: f64,
}

fn case_runs() -> &'static Vec<CaseRun> {
    static RUNS: OnceLock<Vec<CaseRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (300..310)
            .map(|seed| {
                let scenario = Scenario::paper_preset(seed);
                let inst = pipeline::build_from_scenario(&scenario).unwrap();
                let t0 = Instant::now();
                let result = pipeline::simulate(
                    &inst,
                    &ControllerSpec::Auto,
                    "reduced",
                    scenario.eps,
                    scenario.step,
                    scenario.horizon,
                    &scenario.tolerances.into(),
                    &CertifyOptions::default(),
                )
                .unwrap();
                let seconds = t0.elapsed().as_secs_f64();
                assert!(result.trace.converged, "seed {seed} did not converge");
                CaseRun {
                    seed,
                    omega: result.controller.omega.unwrap(),
                    rho: result.controller.rho.unwrap(),
                    rho_hat: result.rho_hat.unwrap(),
                    r2: result.log_linear_r2.unwrap(),
                    steady: result.report.steady_state_residual,
                    gne: result.report.gne_residual,
                    state_margin: result.min_state_margin,
                    coupling_margin: result.min_coupling_margin.unwrap_or(f64::INFINITY),
                    seconds,
                }
            })
            .collect()
    })
}

fn scalar_run() -> &'static (SimulationResult, f64) {
    static RUN: OnceLock<(SimulationResult, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let inst = pipeline::scalar_instance().unwrap();
        let tols = Tolerances {
            state: 1e-13,
            gne: 1e-12,
            project: 1e-14,
        };
        let t0 = Instant::now();
        let result = pipeline::simulate(
            &inst,
            &ControllerSpec::FixedOmega { omega: 1.0 },
            "full",
            0.01,
            0.01,
            200,
            &tols,
            &CertifyOptions::default(),
        )
        .unwrap();
        (result, t0.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_01_scalar_co_evolution() {
    let (result, seconds) = scalar_run();
    let x = result.x_star[0];
    let y = result.y_star[0];
    let rho_hat = result.rho_hat.unwrap();
    let pass = (x - 2.0 / 3.0).abs() <= 1e-8
        && (y - 1.0 / 3.0).abs() <= 1e-8
        && (rho_hat - 0.25).abs() <= 0.01
        && *seconds < 1.0;
    report(
        1,
        "scalar oracle",
        pass,
        &format!("x* = {x:.10}, y* = {y:.10}, rho_hat = {rho_hat:.4}, {seconds:.3}s"),
    );
}

#[test]
fn criterion_02_certified_rate_envelope() {
    let runs = case_runs();
    let mut pass = runs.len() == 10;
    let mut detail = String::new();
    for run in runs.iter() {
        let ok = run.rho_hat <= run.rho + 0.02 && run.r2 >= 0.9 && run.seconds < 60.0;
        if !ok {
            detail.push_str(&format!(
                "seed {}: rho_hat {:.4} vs rho {:.2}, r2 {:.4}, {:.1}s; ",
                run.seed, run.rho_hat, run.rho, run.r2, run.seconds
            ));
        }
        pass &= ok;
    }
    if pass {
        let worst = runs
            .iter()
            .map(|r| r.rho_hat - r.rho)
            .fold(f64::NEG_INFINITY, f64::max);
        detail = format!(
            "10 runs, omega in [{:.2}, {:.2}], worst rho_hat - rho = {worst:.4}",
            runs.iter().map(|r| r.omega).fold(f64::INFINITY, f64::min),
            runs.iter().map(|r| r.omega).fold(0.0, f64::max),
        );
    }
    report(2, "certified-rate envelope", pass, &detail);
}

#[test]
fn criterion_03_equilibrium_verification() {
    let runs = case_runs();
    let (scalar, _) = scalar_run();
    let mut pass = scalar.report.steady_state_residual <= 1e-8
        && scalar.report.gne_residual <= 1e-7;
    let mut worst_steady = scalar.report.steady_state_residual;
    let mut worst_gne = scalar.report.gne_residual;
    for run in runs {
        pass &= run.steady <= 1e-8 && run.gne <= 1e-7;
        worst_steady = worst_steady.max(run.steady);
        worst_gne = worst_gne.max(run.gne);
    }
    report(
        3,
        "steady-state and equilibrium residuals",
        pass,
        &format!("worst steady = {worst_steady:.3e}, worst gne = {worst_gne:.3e}"),
    );
}

#[test]
fn criterion_04_sampling_time_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut pass = true;
    let mut worst_sr: f64 = 0.0;
    let mut worst_asym: f64 = 0.0;
    for case in 0..100 {
        let n_f = 4 + (case % 28);
        let m = 1 + (case % 3);
        let cfg = CaseStudyConfig::new(n_f, m, 2);
        let inst = generate_case_study(7000 + case as u64, &cfg).unwrap();
        let alpha = DVector::from_fn(n_f, |_, _| rng.random_range(0.05..=1.0));
        let bound = max_stable_tau(&inst.graph, &alpha).unwrap();
        let net = build_lti(&inst.graph, &alpha, 0.99 * bound).unwrap();
        let asym = (net.a_f.clone() - net.a_f.transpose()).abs().max();
        let sr = net
            .a_f
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|l| l.abs())
            .fold(0.0, f64::max);
        worst_sr = worst_sr.max(sr);
        worst_asym = worst_asym.max(asym);
        pass &= sr < 1.0 && asym <= 1e-12;
    }
    report(
        4,
        "sampling-time bound keeps the network Schur",
        pass,
        &format!("100 graphs, worst spectral radius = {worst_sr:.6}, worst asymmetry = {worst_asym:.2e}"),
    );
}

#[test]
fn criterion_05_state_sensitivity_bound() {
    let mut pass = true;
    let mut detail = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for seed in 40..45 {
        let mut scenario = Scenario::new(seed, 12, 2, 3);
        scenario.tau_factor = 0.1;
        let inst = pipeline::build_from_scenario(&scenario).unwrap();
        let gain = coevo::game::ControllerGain::LightTouch { omega: 0.8 };
        let (lo, hi) = inst.game.state_box();
        let samples: Vec<DVector<f64>> = (0..50)
            .map(|_| DVector::from_fn(12, |i, _| rng.random_range(lo[i]..hi[i])))
            .collect();
        match lipschitz_check(&inst.game, &inst.dynamics, &gain, &samples, 1e-9) {
            Ok(rep) => {
                pass &= rep.pairs_checked >= 50;
                detail.push_str(&format!("seed {seed}: ratio {:.4}; ", rep.max_ratio));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("seed {seed}: {e}; "));
            }
        }
    }
    // Tightness witness on the scalar instance: the equilibrium moves at
    // exactly (theta/eta) per unit of state inside the unconstrained region.
    let scalar = pipeline::scalar_instance().unwrap();
    let gain = coevo::game::ControllerGain::LightTouch { omega: 1.0 };
    let samples: Vec<DVector<f64>> = (0..6)
        .map(|k| DVector::from_element(1, 0.4 * k as f64))
        .collect();
    let rep = lipschitz_check(&scalar.game, &scalar.dynamics, &gain, &samples, 1e-10).unwrap();
    pass &= (rep.max_ratio - 1.0).abs() <= 1e-3;
    detail.push_str(&format!("scalar ratio {:.5}", rep.max_ratio));
    report(5, "equilibrium Lipschitz bound", pass, &detail);
}

// ---- criterion 6: kernel vs grid oracle ------------------------------

struct RawSystem {
    dim: usize,
    constant: DMatrix<f64>,
    basis: Vec<DMatrix<f64>>,
    bounds: Vec<(f64, f64)>,
    margin: f64,
}

impl RawSystem {
    fn to_system(&self) -> LmiSystem {
        LmiSystem::new(
            SymmetricMatrix::new(self.constant.clone()).unwrap(),
            self.basis
                .iter()
                .map(|a| SymmetricMatrix::new(a.clone()).unwrap())
                .collect(),
            Some(self.bounds.clone()),
            self.margin,
        )
        .unwrap()
    }
}

fn hand_cholesky_pd(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let mut a = m.clone();
    for k in 0..n {
        let mut d = a[(k, k)];
        for j in 0..k {
            d -= a[(k, j)] * a[(k, j)];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[(k, k)] = d;
        for i in (k + 1)..n {
            let mut v = a[(i, k)];
            for j in 0..k {
                v -= a[(i, j)] * a[(k, j)];
            }
            a[(i, k)] = v / d;
        }
    }
    true
}

fn grid_oracle_feasible(sys: &RawSystem, pitch: f64) -> bool {
    fn scan(sys: &RawSystem, steps: &[usize], pitch: f64, depth: usize, partial: &DMatrix<f64>) -> bool {
        let (lo, _) = sys.bounds[depth];
        let mut current = partial.clone();
        let mut prev = 0.0;
        for k in 0..=steps[depth] {
            let x = lo + k as f64 * pitch;
            current.zip_apply(&sys.basis[depth], |c, a| *c += (x - prev) * a);
            prev = x;
            if depth + 1 == sys.basis.len() {
                let mut test = -current.clone();
                for d in 0..sys.dim {
                    test[(d, d)] -= sys.margin - 1e-14;
                }
                if hand_cholesky_pd(&test) {
                    return true;
                }
            } else if scan(sys, steps, pitch, depth + 1, &current) {
                return true;
            }
        }
        false
    }
    let steps: Vec<usize> = sys
        .bounds
        .iter()
        .map(|(lo, hi)| ((hi - lo) / pitch).round() as usize)
        .collect();
    scan(sys, &steps, pitch, 0, &sys.constant)
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&g + g.transpose()) * 0.5
}

fn width_steps(v: usize) -> usize {
    match v {
        1 => 1200,
        2 => 220,
        3 => 70,
        _ => 42,
    }
}

fn random_feasible_system(rng: &mut ChaCha8Rng, dim: usize, v: usize, pitch: f64) -> RawSystem {
    let steps = width_steps(v);
    let basis: Vec<DMatrix<f64>> = (0..v).map(|_| random_symmetric(rng, dim)).collect();
    let bounds: Vec<(f64, f64)> = (0..v)
        .map(|_| {
            let lo = rng.random_range(-1.0..1.0);
            (lo, lo + steps as f64 * pitch)
        })
        .collect();
    let anchor: Vec<f64> = bounds
        .iter()
        .map(|(lo, _)| lo + rng.random_range((steps / 5)..(4 * steps / 5)) as f64 * pitch)
        .collect();
    let mut constant = random_symmetric(rng, dim);
    let mut at_anchor = constant.clone();
    for (x, a) in anchor.iter().zip(&basis) {
        at_anchor += a * *x;
    }
    let worst = at_anchor
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    for d in 0..dim {
        constant[(d, d)] -= worst + 0.05;
    }
    RawSystem {
        dim,
        constant,
        basis,
        bounds,
        margin: 1e-6,
    }
}

fn random_infeasible_system(rng: &mut ChaCha8Rng, dim: usize, v: usize, pitch: f64) -> RawSystem {
    let steps = width_steps(v);
    let mut basis: Vec<DMatrix<f64>> = (0..v).map(|_| random_symmetric(rng, dim)).collect();
    for a in &mut basis {
        for k in 0..dim {
            a[(0, k)] = 0.0;
            a[(k, 0)] = 0.0;
        }
    }
    let mut constant = random_symmetric(rng, dim);
    for k in 1..dim {
        constant[(0, k)] = 0.0;
        constant[(k, 0)] = 0.0;
    }
    constant[(0, 0)] = 0.3;
    let bounds = (0..v)
        .map(|_| {
            let lo = rng.random_range(-1.0..1.0);
            (lo, lo + steps as f64 * pitch)
        })
        .collect();
    RawSystem {
        dim,
        constant,
        basis,
        bounds,
        margin: 1e-6,
    }
}

#[test]
fn criterion_06_kernel_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let pitch = 1e-3;
    let mut cases: Vec<(RawSystem, bool)> = Vec::new();
    // 12 feasible, 8 infeasible; sizes s <= 6, v <= 4.
    for (dim, v) in [
        (2, 1),
        (6, 1),
        (3, 2),
        (4, 2),
        (5, 2),
        (6, 2),
        (3, 3),
        (4, 3),
        (5, 3),
        (6, 3),
        (3, 4),
        (4, 4),
    ] {
        cases.push((random_feasible_system(&mut rng, dim, v, pitch), true));
    }
    for (dim, v) in [(2, 1), (4, 1), (6, 1), (3, 2), (5, 2), (6, 2), (4, 3), (3, 4)] {
        cases.push((random_infeasible_system(&mut rng, dim, v, pitch), false));
    }

    let mut pass = true;
    let mut detail = String::new();
    for (i, (raw, expect)) in cases.iter().enumerate() {
        let oracle = grid_oracle_feasible(raw, pitch);
        if oracle != *expect {
            pass = false;
            detail.push_str(&format!("case {i}: oracle vs construction; "));
            continue;
        }
        let sys = raw.to_system();
        let res = sys.solve_feasibility(1e-9, 50_000).unwrap();
        if res.is_feasible() != oracle {
            pass = false;
            detail.push_str(&format!(
                "case {i}: solver {} vs oracle {oracle}; ",
                res.is_feasible()
            ));
        }
        if res.is_feasible() {
            let (ok, slack) = sys.check_feasible_point(&res.point).unwrap();
            if !(ok && slack <= -raw.margin) {
                pass = false;
                detail.push_str(&format!("case {i}: witness slack {slack:.3e}; "));
            }
        }
    }
    if pass {
        detail = "20 systems agree with the 1e-3 grid scan; all witnesses revalidate".into();
    }
    report(6, "kernel matches grid oracle", pass, &detail);
}

#[test]
fn criterion_07_reduced_implies_full_block() {
    let t0 = Instant::now();
    let sizes: [(usize, usize, u64); 10] = [
        (3, 2, 50),
        (3, 2, 51),
        (3, 2, 52),
        (3, 2, 53),
        (4, 2, 54),
        (4, 2, 55),
        (4, 2, 56),
        (5, 1, 57),
        (5, 1, 58),
        (5, 2, 59),
    ];
    let opts = CertifyOptions::default();
    let mut pass = true;
    let mut detail = String::new();
    let mut checked = 0;
    for (n_f, n_agents, seed) in sizes {
        let mut scenario = Scenario::new(seed, n_f, 1, n_agents);
        scenario.tau_factor = 0.08;
        scenario.ff_edge_budget = Some(n_f * (n_f - 1) / 2);
        let inst = pipeline::build_from_scenario(&scenario).unwrap();
        let fullblock = lookup_method("fullblock").unwrap();
        let (omega, rho, _) =
            synthesize_reduced(&inst.certify.reduced, 0.01, 0.01, &opts).unwrap();
        // The synthesized point plus easier points on the same grid.
        let probes = [
            (omega, rho),
            ((omega - 0.2).max(0.0), rho),
            (omega, (rho + 0.05).min(0.99)),
        ];
        for (w, r) in probes {
            if check_reduced(&inst.certify.reduced, r, w, &opts).is_ok() {
                checked += 1;
                if let Err(e) = fullblock.check(&inst.certify, w, r, &opts) {
                    pass = false;
                    detail.push_str(&format!(
                        "n_f={n_f}, N={n_agents}, seed {seed}, (omega, rho) = ({w:.2}, {r:.2}): {e}; "
                    ));
                }
            }
        }
    }
    let seconds = t0.elapsed().as_secs_f64();
    pass &= seconds < 120.0;
    if pass {
        detail = format!("{checked} reduced-certified points lifted on 10 instances in {seconds:.1}s");
    }
    report(7, "reduced certificates lift to the full block", pass, &detail);
}

#[test]
fn criterion_08_synthesis_validity_and_maximality() {
    let opts = CertifyOptions::default();
    let (eps, step) = (0.01, 0.01);
    let mut pass = true;
    let mut detail = String::new();

    // Reduced route on a market-scale instance, full route on a small one.
    let cases: [(&str, Scenario); 2] = [
        ("reduced", Scenario::paper_preset(320)),
        ("full", {
            let mut s = Scenario::new(321, 4, 2, 2);
            s.tau_factor = 0.08;
            s
        }),
    ];
    for (method_name, scenario) in cases {
        let inst = pipeline::build_from_scenario(&scenario).unwrap();
        let method = lookup_method(method_name).unwrap();
        let (omega, rho, cert) =
            coevo::certify::synthesize(method.as_ref(), &inst.certify, eps, step, &opts).unwrap();
        let system = method.system(&inst.certify, omega, rho, &opts).unwrap();
        let (ok, slack) = cert.revalidate(&system).unwrap();
        if !(ok && slack <= -opts.margin) {
            pass = false;
            detail.push_str(&format!("{method_name}: witness fails revalidation; "));
        }
        if omega < 1.0 {
            let up = (omega + step).min(1.0);
            match method.check(&inst.certify, up, rho, &opts) {
                Err(CertifyError::NotFound { .. }) => {}
                other => {
                    pass = false;
                    detail.push_str(&format!(
                        "{method_name}: ({up:.2}, {rho:.2}) unexpectedly {other:?}; "
                    ));
                }
            }
        }
        detail.push_str(&format!("{method_name}: omega = {omega:.2}, rho = {rho:.2}; "));
    }
    report(8, "synthesis revalidates and is grid-maximal", pass, &detail);
}

#[test]
fn criterion_09_dimension_independence() {
    let opts = CertifyOptions::default();
    let small = {
        let mut s = Scenario::new(330, 10, 2, 2);
        s.tau_factor = 0.1;
        pipeline::build_from_scenario(&s).unwrap()
    };
    let large = {
        let mut s = Scenario::new(331, 1000, 10, 10);
        s.tau_factor = 0.1;
        pipeline::build_from_scenario(&s).unwrap()
    };
    let sys_small =
        assemble_reduced(&small.certify.reduced, 0.9, 0.8, opts.margin, Eq21Form::Expansion)
            .unwrap();
    let sys_large =
        assemble_reduced(&large.certify.reduced, 0.9, 0.8, opts.margin, Eq21Form::Expansion)
            .unwrap();
    let mut pass =
        sys_small.dim() == sys_large.dim() && sys_small.n_coords() == sys_large.n_coords();

    let t0 = Instant::now();
    let synth = synthesize_reduced(&large.certify.reduced, 0.01, 0.01, &opts);
    let seconds = t0.elapsed().as_secs_f64();
    pass &= synth.is_ok() && seconds < 1.0;

    // The state-dimension route refuses everything above the guard.
    let full = lookup_method("full").unwrap();
    for n_f in [51usize, 100, 1000] {
        pass &= full.guard_dims(n_f, 10, 10).is_err();
    }
    pass &= full.guard_dims(10, 2, 2).is_ok();

    report(
        9,
        "reduced route is size-independent",
        pass,
        &format!(
            "system {}x{} with {} coordinates at both sizes; synthesis at n_F = 1000 in {seconds:.3}s",
            sys_small.dim(),
            sys_small.dim(),
            sys_small.n_coords()
        ),
    );
}

// ---- criterion 10: projection and equilibrium accuracy ----------------

fn projection_oracle(z: &DVector<f64>, rows: &[(DVector<f64>, f64)]) -> DVector<f64> {
    let n = rows.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut consider = |q: DVector<f64>| {
        if rows.iter().all(|(a, b)| a.dot(&q) <= b + 1e-9) {
            let d = (&q - z).norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, q));
            }
        }
    };
    consider(z.clone());
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        subsets.push(vec![i]);
        for j in (i + 1)..n {
            subsets.push(vec![i, j]);
            for k in (j + 1)..n {
                subsets.push(vec![i, j, k]);
            }
        }
    }
    for set in subsets {
        let m = set.len();
        let a = DMatrix::from_fn(m, 3, |r, c| rows[set[r]].0[c]);
        let b = DVector::from_fn(m, |r, _| rows[set[r]].1);
        let gram = &a * a.transpose();
        let rhs = &a * z - b;
        let Some(mu) = gram.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&gram * &mu - &rhs).norm() > 1e-9 || mu.iter().any(|m| *m < -1e-12) {
            continue;
        }
        consider(z - a.transpose() * mu);
    }
    best.expect("polytope is nonempty").1
}

#[test]
fn criterion_10_solver_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut pass = true;
    let mut worst_game: f64 = 0.0;
    for _ in 0..20 {
        let p = rng.random_range(2..=6usize);
        let g = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        let m = &g * g.transpose() + DMatrix::identity(p, p);
        let c = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
        let eta = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let ell = m.clone().svd(false, false).singular_values[0];
        let pg = coevo::game::PseudoGradient {
            m_mat: m.clone(),
            n_x: DMatrix::zeros(p, 1),
            c: c.clone(),
            eta,
            ell,
            theta_exact: 0.0,
            theta_bound: 0.0,
        };
        let set = PolyhedralSet {
            box_lo: DVector::from_element(p, -100.0),
            box_hi: DVector::from_element(p, 100.0),
            halfspaces: vec![],
        };
        let sol =
            coevo::gne::solve_gne(&pg, &set, &DVector::zeros(1), 1e-10, 1_000_000, None).unwrap();
        let direct = m.lu().solve(&(-c)).unwrap();
        let err = (&sol.y_star - &direct).norm();
        worst_game = worst_game.max(err);
        pass &= err <= 1e-8;
    }

    let mut worst_proj: f64 = 0.0;
    for _ in 0..30 {
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for d in 0..3 {
            let mut e = DVector::zeros(3);
            e[d] = 1.0;
            rows.push((e.clone(), 1.0));
            rows.push((-e, 1.0));
        }
        let mut halfspaces = Vec::new();
        for _ in 0..rng.random_range(1..=3usize) {
            let a = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let b = rng.random_range(0.1..0.9);
            rows.push((a.clone(), b));
            halfspaces.push(Halfspace { normal: a, offset: b });
        }
        let set = PolyhedralSet {
            box_lo: DVector::from_element(3, -1.0),
            box_hi: DVector::from_element(3, 1.0),
            halfspaces,
        };
        let z = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
        let ours = project(&set, &z, 1e-10, 500_000).unwrap();
        let oracle = projection_oracle(&z, &rows);
        let err = (ours - oracle).norm();
        worst_proj = worst_proj.max(err);
        pass &= err <= 1e-6;
    }
    report(
        10,
        "equilibrium and projection accuracy",
        pass,
        &format!("worst game error = {worst_game:.2e}, worst projection error = {worst_proj:.2e}"),
    );
}

#[test]
fn criterion_11_trajectory_feasibility() {
    let runs = case_runs();
    let (scalar, _) = scalar_run();
    let mut worst: f64 = scalar.min_state_margin;
    for run in runs {
        worst = worst.min(run.state_margin).min(run.coupling_margin);
    }
    let pass = worst >= -1e-8;
    report(
        11,
        "feasibility along trajectories",
        pass,
        &format!("worst recorded margin = {worst:.3e}"),
    );
}
