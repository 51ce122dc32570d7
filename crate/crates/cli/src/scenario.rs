//! Scenario files: the JSON description of one experiment. Unknown keys are
//! rejected; every optional field has a documented default (see the README
//! schema table).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Controller selection for a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Synthesize the scalar gain through the selected method.
    #[default]
    Auto,
    /// Run with a fixed scalar gain; certification finds the best rate.
    FixedOmega { omega: f64 },
    /// Load a full gain matrix (JSON 2D array, `m x (m N)`) from a file.
    GainFile { path: String },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default = "default_state_tol")]
    pub state: f64,
    #[serde(default = "default_gne_tol")]
    pub gne: f64,
    #[serde(default = "default_project_tol")]
    pub project: f64,
}

fn default_state_tol() -> f64 {
    1e-9
}
fn default_gne_tol() -> f64 {
    1e-8
}
fn default_project_tol() -> f64 {
    1e-10
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            state: default_state_tol(),
            gne: default_gne_tol(),
            project: default_project_tol(),
        }
    }
}

impl From<ToleranceSpec> for coevo::coevolve::Tolerances {
    fn from(t: ToleranceSpec) -> Self {
        Self {
            state: t.state,
            gne: t.gne,
            project: t.project,
        }
    }
}

/// One experiment: instance sizes, sampling-time fraction, controller spec,
/// solver tolerances and the run horizon. The whole pipeline is
/// deterministic for a fixed seed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub n_followers: usize,
    pub n_influencers: usize,
    pub n_agents: usize,
    /// Follower-follower edge count; defaults to `4 * n_followers`.
    #[serde(default)]
    pub ff_edge_budget: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Fraction of the open sampling-time bound. Values near 1 keep the
    /// state matrix barely Schur but put the network channel outside what
    /// the certificates can absorb; small fractions certify.
    #[serde(default = "default_tau_factor")]
    pub tau_factor: f64,
    #[serde(default)]
    pub controller: ControllerSpec,
    /// Grid floor of the synthesis walk.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Grid step of the synthesis walk.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Output directory; the `--out` flag overrides it.
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_alpha() -> f64 {
    0.75
}
fn default_tau_factor() -> f64 {
    0.99
}
fn default_eps() -> f64 {
    0.01
}
fn default_step() -> f64 {
    0.01
}
fn default_horizon() -> usize {
    200
}

impl Scenario {
    pub fn new(seed: u64, n_followers: usize, n_influencers: usize, n_agents: usize) -> Self {
        Self {
            seed,
            n_followers,
            n_influencers,
            n_agents,
            ff_edge_budget: None,
            alpha: default_alpha(),
            tau_factor: default_tau_factor(),
            controller: ControllerSpec::default(),
            eps: default_eps(),
            step: default_step(),
            tolerances: ToleranceSpec::default(),
            horizon: default_horizon(),
            out_dir: None,
        }
    }

    /// The randomized market instance matching the reference experiment
    /// shape: 100 followers, 5 influencers, 10 firms, 582 edges in total.
    /// The sampling-time fraction is 0.1 so that the reduced certification
    /// route has room to certify.
    pub fn paper_preset(seed: u64) -> Self {
        let mut s = Self::new(seed, 100, 5, 10);
        s.ff_edge_budget = Some(392);
        s.tau_factor = 0.1;
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if self.n_followers == 0 || self.n_influencers == 0 || self.n_agents == 0 {
            problems.push("counts must be positive".to_string());
        }
        if self.n_influencers > self.n_followers {
            problems.push("need n_influencers <= n_followers".to_string());
        }
        if !(self.tau_factor > 0.0 && self.tau_factor < 1.0) {
            problems.push(format!("tau_factor = {} outside (0, 1)", self.tau_factor));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            problems.push(format!("alpha = {} outside (0, 1]", self.alpha));
        }
        if self.eps <= 0.0 || self.step <= 0.0 || self.step >= 1.0 {
            problems.push("need eps > 0 and step in (0, 1)".to_string());
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if let ControllerSpec::FixedOmega { omega } = &self.controller {
            if !(0.0..=1.0).contains(omega) {
                problems.push(format!("omega = {omega} outside [0, 1]"));
            }
        }
        if let Some(t) = [
            ("state", self.tolerances.state),
            ("gne", self.tolerances.gne),
            ("project", self.tolerances.project),
        ]
        .iter()
        .find(|(_, v)| *v <= 0.0)
        {
            problems.push(format!("tolerance '{}' must be positive", t.0));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems.join("; ")))
        }
    }

    pub fn edge_budget(&self) -> usize {
        let pairs = self.n_followers * self.n_followers.saturating_sub(1) / 2;
        self.ff_edge_budget
            .unwrap_or((4 * self.n_followers).min(pairs))
    }

    pub fn case_study_config(&self) -> coevo::network::CaseStudyConfig {
        coevo::network::CaseStudyConfig {
            n_followers: self.n_followers,
            n_influencers: self.n_influencers,
            n_agents: self.n_agents,
            ff_edge_budget: self.edge_budget(),
            alpha: self.alpha,
            tau_factor: self.tau_factor,
        }
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}
