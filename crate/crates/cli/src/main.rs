use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coevo::certify::CertifyOptions;
use coevo_cli::output;
use coevo_cli::pipeline::{self, BuiltInstance};
use coevo_cli::scenario::{parse_scenario, ControllerSpec, Scenario};
use coevo_cli::CliError;

/// Co-evolution toolkit: certify, synthesize and simulate market-driven
/// network dynamics.
#[derive(Parser)]
#[command(name = "coevo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Full,
    Reduced,
    Fullblock,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Full => "full",
            MethodArg::Reduced => "reduced",
            MethodArg::Fullblock => "fullblock",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Scalar,
    Paper,
}

#[derive(Args)]
struct InstanceArgs {
    /// Scenario file (JSON).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Certification method.
    #[arg(long, value_enum, default_value = "reduced")]
    method: MethodArg,
    /// Output directory.
    #[arg(long, default_value = "coevo_out")]
    out: PathBuf,
    /// Overrides the synthesis grid floor.
    #[arg(long)]
    eps: Option<f64>,
    /// Overrides the synthesis grid step.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and export its graph and structural facts.
    Gen(InstanceArgs),
    /// Certify a fixed controller and locate its best contraction rate.
    Certify(InstanceArgs),
    /// Synthesize the largest certified scalar gain.
    Synthesize(InstanceArgs),
    /// Run the closed loop and emit trace, certificate and summary.
    Simulate {
        #[command(flatten)]
        common: InstanceArgs,
        /// Also write every state/decision coordinate per step.
        #[arg(long)]
        full_state: bool,
    },
    /// Map feasibility over the gain/rate grid.
    Sweep(InstanceArgs),
    /// Average synthesis results over seeds for one or more scenarios.
    Table {
        /// Scenario files; repeat the flag for several sizes.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "reduced")]
        method: MethodArg,
        /// Seeds per scenario.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value = "coevo_out")]
        out: PathBuf,
    },
}

struct Resolved {
    scenario_value: serde_json::Value,
    scenario: Option<Scenario>,
    instance: BuiltInstance,
    eps: f64,
    step: f64,
    horizon: usize,
    tols: coevo::coevolve::Tolerances,
    controller: ControllerSpec,
}

fn resolve_instance(args: &InstanceArgs) -> Result<Resolved, CliError> {
    match (&args.scenario, args.preset) {
        (Some(path), None) => {
            let mut s = parse_scenario(path)?;
            if let Some(seed) = args.seed {
                s.seed = seed;
            }
            build_resolved(s, args)
        }
        (None, Some(PresetArg::Paper)) => {
            let s = Scenario::paper_preset(args.seed.unwrap_or(1));
            build_resolved(s, args)
        }
        (None, Some(PresetArg::Scalar)) => {
            let instance = pipeline::scalar_instance()?;
            // The scalar oracle runs under full influence; certification
            // then finds the best rate for that fixed gain.
            Ok(Resolved {
                scenario_value: serde_json::json!({"preset": "scalar"}),
                scenario: None,
                instance,
                eps: args.eps.unwrap_or(0.01),
                step: args.step.unwrap_or(0.01),
                horizon: 200,
                tols: coevo::coevolve::Tolerances {
                    state: 1e-13,
                    gne: 1e-12,
                    project: 1e-14,
                },
                controller: ControllerSpec::FixedOmega { omega: 1.0 },
            })
        }
        _ => Err(CliError::Usage(
            "exactly one of --scenario or --preset is required".into(),
        )),
    }
}

fn build_resolved(s: Scenario, args: &InstanceArgs) -> Result<Resolved, CliError> {
    let instance = pipeline::build_from_scenario(&s)?;
    Ok(Resolved {
        scenario_value: serde_json::to_value(&s).unwrap_or_default(),
        eps: args.eps.unwrap_or(s.eps),
        step: args.step.unwrap_or(s.step),
        horizon: s.horizon,
        tols: s.tolerances.into(),
        controller: s.controller.clone(),
        scenario: Some(s),
        instance,
    })
}

fn out_dir(args: &InstanceArgs, resolved: Option<&Resolved>) -> PathBuf {
    if args.out.as_os_str() != "coevo_out" {
        return args.out.clone();
    }
    resolved
        .and_then(|r| r.scenario.as_ref())
        .and_then(|s| s.out_dir.as_ref())
        .map(PathBuf::from)
        .unwrap_or_else(|| args.out.clone())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = CertifyOptions::default();
    match cli.command {
        Command::Gen(args) => {
            let resolved = resolve_instance(&args)?;
            let dir = out_dir(&args, Some(&resolved));
            output::ensure_dir(&dir)?;
            output::write_instance_info(&dir, &resolved.instance)?;
            if resolved.instance.graph.is_some() {
                let path = output::write_graph(&dir, &resolved.instance)?;
                println!("graph: {}", path.display());
            }
            println!("instance: {}", dir.join("instance.json").display());
            Ok(())
        }
        Command::Certify(args) => {
            let resolved = resolve_instance(&args)?;
            let controller = match &resolved.controller {
                ControllerSpec::Auto => {
                    return Err(CliError::Usage(
                        "certify needs a fixed controller (fixed_omega or gain_file); \
                         use synthesize for automatic gains"
                            .into(),
                    ))
                }
                spec => pipeline::resolve_controller(
                    &resolved.instance,
                    spec,
                    args.method.name(),
                    resolved.eps,
                    resolved.step,
                    &opts,
                )?,
            };
            match (&controller.certificate, controller.rho) {
                (Some(cert), Some(rho)) => {
                    let dir = out_dir(&args, Some(&resolved));
                    output::ensure_dir(&dir)?;
                    let path = output::write_certificate(&dir, args.method.name(), cert)?;
                    println!(
                        "certified: rho = {rho:.6}, slack = {:.3e}, certificate: {}",
                        cert.slack,
                        path.display()
                    );
                    Ok(())
                }
                _ => Err(CliError::Numerical(
                    "no certificate found for the fixed controller".into(),
                )),
            }
        }
        Command::Synthesize(args) => {
            let resolved = resolve_instance(&args)?;
            let controller = pipeline::resolve_controller(
                &resolved.instance,
                &ControllerSpec::Auto,
                args.method.name(),
                resolved.eps,
                resolved.step,
                &opts,
            )?;
            let cert = controller
                .certificate
                .as_ref()
                .expect("synthesis always returns a certificate");
            let dir = out_dir(&args, Some(&resolved));
            output::ensure_dir(&dir)?;
            let path = output::write_certificate(&dir, args.method.name(), cert)?;
            println!(
                "omega = {:.6}, rho = {:.6}, slack = {:.3e}, certificate: {}",
                controller.omega.unwrap_or(f64::NAN),
                controller.rho.unwrap_or(f64::NAN),
                cert.slack,
                path.display()
            );
            Ok(())
        }
        Command::Simulate { common, full_state } => {
            let resolved = resolve_instance(&common)?;
            let result = pipeline::simulate(
                &resolved.instance,
                &resolved.controller,
                common.method.name(),
                resolved.eps,
                resolved.step,
                resolved.horizon,
                &resolved.tols,
                &opts,
            )?;
            let dir = out_dir(&common, Some(&resolved));
            output::ensure_dir(&dir)?;
            output::write_trace(&dir, &result, full_state)?;
            if let Some(cert) = &result.controller.certificate {
                output::write_certificate(&dir, common.method.name(), cert)?;
            }
            let path =
                output::write_summary(&dir, &resolved.scenario_value, common.method.name(), &result)?;
            println!(
                "steps = {}, converged = {}, rho_hat = {}, summary: {}",
                result.trace.steps.len(),
                result.trace.converged,
                result
                    .rho_hat
                    .map(|r| format!("{r:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                path.display()
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let resolved = resolve_instance(&args)?;
            let step = if resolved.step < 0.049 {
                0.05
            } else {
                resolved.step
            };
            let points =
                pipeline::sweep_grid(&resolved.instance, args.method.name(), step, &opts)?;
            let dir = out_dir(&args, Some(&resolved));
            output::ensure_dir(&dir)?;
            let path = output::write_sweep(&dir, &points)?;
            let feasible = points.iter().filter(|p| p.feasible).count();
            println!(
                "{feasible}/{} grid points feasible, map: {}",
                points.len(),
                path.display()
            );
            Ok(())
        }
        Command::Table {
            scenario,
            method,
            seeds,
            out,
        } => {
            let mut scenarios = Vec::with_capacity(scenario.len());
            for path in &scenario {
                scenarios.push(parse_scenario(path)?);
            }
            let rows = pipeline::run_table(&scenarios, method.name(), seeds, &opts)?;
            output::ensure_dir(&out)?;
            let path = output::write_table(&out, &rows)?;
            for r in &rows {
                println!(
                    "{} [{}]: omega = {:.4}, rho = {:.4}, synth = {:.3}s",
                    r.label, r.method, r.omega_mean, r.rho_mean, r.synth_wall_s_mean
                );
            }
            println!("table: {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", output::error_json(&err));
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
