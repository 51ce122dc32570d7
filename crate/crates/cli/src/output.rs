//! File emission: summaries, certificates, traces and tables. JSON for
//! structured records (so runs diff cleanly), CSV for numeric series.
//! Wall-clock fields are grouped under `timings` and are the only
//! nondeterministic part of a summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use coevo::certify::{Certificate, SweepPoint};
use coevo::coevolve;

use crate::pipeline::{BuiltInstance, SimulationResult, TableRow};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    write_text(path, &(text + "\n"))
}

/// Certificate file: the method that produced it plus the full witness, so
/// it can be revalidated against a reassembled system.
pub fn write_certificate(
    dir: &Path,
    method: &str,
    certificate: &Certificate,
) -> Result<PathBuf, CliError> {
    let path = dir.join("certificate.json");
    write_json(
        &path,
        &json!({
            "method": method,
            "certificate": certificate,
        }),
    )?;
    Ok(path)
}

/// Run summary; `scenario` is the resolved scenario or preset description.
pub fn write_summary(
    dir: &Path,
    scenario: &serde_json::Value,
    method: &str,
    result: &SimulationResult,
) -> Result<PathBuf, CliError> {
    let path = dir.join("summary.json");
    let cert = result.controller.certificate.as_ref().map(|c| {
        json!({
            "kind": c.kind,
            "rho": c.rho,
            "omega": c.omega,
            "lambda": c.lambda,
            "slack": c.slack,
        })
    });
    let summary = json!({
        "scenario": scenario,
        "method": method,
        "omega": result.controller.omega,
        "rho": result.controller.rho,
        "rho_hat": result.rho_hat,
        "log_linear_r2": result.log_linear_r2,
        "steps": result.trace.steps.len(),
        "converged": result.trace.converged,
        "residuals": {
            "steady_state": result.report.steady_state_residual,
            "gne": result.report.gne_residual,
        },
        "margins": {
            "state_min": result.min_state_margin,
            "coupling_min": result.min_coupling_margin,
        },
        "equilibrium": {
            "x": result.x_star.iter().copied().collect::<Vec<f64>>(),
            "y": result.y_star.iter().copied().collect::<Vec<f64>>(),
        },
        "certificate": cert,
        "timings": {
            "synthesize_s": result.controller.synthesize_seconds,
            "simulate_s": result.simulate_seconds,
        },
    });
    write_json(&path, &summary)?;
    Ok(path)
}

pub fn write_trace(
    dir: &Path,
    result: &SimulationResult,
    full_state: bool,
) -> Result<(), CliError> {
    let path = dir.join("trace.csv");
    let mut buf = Vec::new();
    coevolve::write_trace_csv(&result.trace, &result.x_star, &mut buf)
        .map_err(|e| io_err(&path, e))?;
    write_text(&path, &String::from_utf8_lossy(&buf))?;
    if full_state {
        let path = dir.join("states.csv");
        let mut buf = Vec::new();
        coevolve::write_full_state_csv(&result.trace, &mut buf).map_err(|e| io_err(&path, e))?;
        write_text(&path, &String::from_utf8_lossy(&buf))?;
    }
    Ok(())
}

pub fn write_sweep(dir: &Path, points: &[SweepPoint]) -> Result<PathBuf, CliError> {
    let path = dir.join("sweep.csv");
    let mut text = String::from("omega,rho,feasible,slack\n");
    for p in points {
        text.push_str(&format!("{},{},{},{}\n", p.omega, p.rho, p.feasible, p.slack));
    }
    write_text(&path, &text)?;
    Ok(path)
}

pub fn write_table(dir: &Path, rows: &[TableRow]) -> Result<PathBuf, CliError> {
    let path = dir.join("table.csv");
    let mut text = String::from(
        "label,n_followers,n_influencers,n_agents,method,seeds,omega_mean,rho_mean,synth_wall_s_mean\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.n_followers,
            r.n_influencers,
            r.n_agents,
            r.method,
            r.seeds,
            r.omega_mean,
            r.rho_mean,
            r.synth_wall_s_mean
        ));
    }
    write_text(&path, &text)?;
    Ok(path)
}

/// Edge list of the generated graph: `src,dst,weight,kind` with `kind` FF
/// for follower-follower links and IF for influencer links.
pub fn write_graph(dir: &Path, inst: &BuiltInstance) -> Result<PathBuf, CliError> {
    let path = dir.join("graph.csv");
    let graph = inst
        .graph
        .as_ref()
        .ok_or_else(|| CliError::Usage("this instance has no graph to export".into()))?;
    let mut text = String::from("src,dst,weight,kind\n");
    for e in graph.edges() {
        let kind = if graph.is_follower(e.a) && graph.is_follower(e.b) {
            "FF"
        } else {
            "IF"
        };
        text.push_str(&format!("{},{},{},{}\n", e.a, e.b, e.weight, kind));
    }
    write_text(&path, &text)?;
    Ok(path)
}

/// Structural facts of a generated instance.
pub fn write_instance_info(dir: &Path, inst: &BuiltInstance) -> Result<PathBuf, CliError> {
    let path = dir.join("instance.json");
    let info = json!({
        "label": inst.label,
        "n_followers": inst.dynamics.state_dim(),
        "n_influencers": inst.dynamics.input_dim(),
        "n_agents": inst.n_agents,
        "edges": inst.graph.as_ref().map(|g| g.edges().len()),
        "tau": inst.tau,
        "alpha": inst.alpha,
        "spectral_radius": inst.dynamics.spectral_radius(),
        "delta1": inst.certify.reduced.delta1,
        "delta2": inst.certify.reduced.delta2,
        "theta_over_eta": inst.theta_ratio,
    });
    write_json(&path, &info)?;
    Ok(path)
}

/// Machine-readable error envelope printed to stderr on failure.
pub fn error_json(err: &CliError) -> String {
    json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        }
    })
    .to_string()
}
