mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use regsync_core::demos::{self, DemoCase};
use regsync_core::verify::{self, ConvergenceReport, DEFAULT_OMEGA_POINTS, DEFAULT_THRESHOLD};
use regsync_core::{load_config, parse_config, CouplingMode, ProtocolDesign, ScenarioConfig, Trajectory};

const TAIL_FRACTION: f64 = 0.1;
const SYNC_TOL_SCALE: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "regsync", version, about = "Scale-free synchronization protocols for delayed multi-agent systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a protocol and print its parameters
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Design and simulate, writing trajectory.csv and design.txt
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Certify the delayed closed loop and check convergence
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_OMEGA_POINTS)]
        omega_points: usize,
        /// Directory for report.txt (defaults to the config's output directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in example end to end
    Demo {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        case: u32,
        #[arg(long)]
        mode: CouplingMode,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    Failed,
}

fn converge(traj: &Trajectory) -> (ConvergenceReport, f64) {
    let errors = traj.errors();
    let tol = SYNC_TOL_SCALE * (1.0 + errors.first().copied().unwrap_or(0.0));
    (verify::convergence_report(&errors, TAIL_FRACTION, tol), tol)
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    load_config(path).with_context(|| format!("loading {}", path.display()))
}

fn run_design(config: &Path, epsilon: Option<f64>, rho: Option<f64>) -> Result<Status> {
    let mut cfg = load(config)?;
    if epsilon.is_some() {
        cfg.protocol.epsilon = epsilon;
    }
    if rho.is_some() {
        cfg.protocol.rho = rho;
    }
    let design = cfg.design()?;
    print!("{}", output::design_text(&design));
    Ok(Status::Ok)
}

/// Simulate and write the output files.
fn simulate_into(cfg: &ScenarioConfig, design: &ProtocolDesign, out: &Path) -> Result<Trajectory> {
    let traj = cfg.simulate(design)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    output::write_trajectory(&out.join("trajectory.csv"), &traj)?;
    fs::write(out.join("design.txt"), output::design_text(design))?;
    if cfg.output.emit_plot_data {
        output::write_plot_data(&out.join("plotdata.csv"), &traj)?;
    }
    Ok(traj)
}

fn run_simulate(config: &Path, out: &Path, kmax: Option<usize>) -> Result<Status> {
    let mut cfg = load(config)?;
    if let Some(k) = kmax {
        cfg.sim.k_max = k;
    }
    let design = cfg.design()?;
    let traj = simulate_into(&cfg, &design, out)?;
    let (report, tol) = converge(&traj);
    print!("{}", output::convergence_text(&report, tol));
    println!("wrote {}", out.display());
    Ok(if report.converged { Status::Ok } else { Status::Failed })
}

fn verify_report(
    cfg: &ScenarioConfig,
    design: &ProtocolDesign,
    traj: &Trajectory,
    omega_points: usize,
) -> Result<(bool, String)> {
    let model = cfg.model()?;
    let cert = verify::closed_loop_certificate(&model, design, design.kappa_bar, omega_points, DEFAULT_THRESHOLD)?;
    let (conv, tol) = converge(traj);
    let mut text = output::design_text(design);
    text.push('\n');
    text.push_str(&output::certificate_text(&cert, design.kappa_bar));
    text.push_str(&output::convergence_text(&conv, tol));
    text.push_str(&output::summary_line(&cert, &conv));
    Ok((cert.passed && conv.converged, text))
}

fn run_verify(config: &Path, omega_points: usize, out: Option<PathBuf>) -> Result<Status> {
    let cfg = load(config)?;
    let design = cfg.design()?;
    let traj = cfg.simulate(&design)?;
    let (passed, text) = verify_report(&cfg, &design, &traj, omega_points)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(if passed { Status::Ok } else { Status::Failed })
}

fn run_demo(case: u32, mode: CouplingMode, out: &Path) -> Result<Status> {
    let Some(case) = DemoCase::from_index(case) else {
        bail!("unknown demo case {case}");
    };
    let cfg = parse_config(demos::bundled_fixture(case, mode))?;
    let design = cfg.design()?;
    println!("{}: {} agents, delays {:?}", case.name(mode), cfg.agents(), cfg.delays.kappa);
    let traj = simulate_into(&cfg, &design, out)?;
    let (passed, report) = verify_report(&cfg, &design, &traj, DEFAULT_OMEGA_POINTS)?;
    fs::write(out.join("report.txt"), &report)?;
    for line in report.lines().filter(|l| l.starts_with("convergence:") || l.starts_with("SUMMARY")) {
        println!("{line}");
    }
    println!("wrote {}", out.display());
    Ok(if passed { Status::Ok } else { Status::Failed })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Design { config, epsilon, rho } => run_design(&config, epsilon, rho),
        Command::Simulate { config, out, kmax } => run_simulate(&config, &out, kmax),
        Command::Verify { config, omega_points, out } => run_verify(&config, omega_points, out),
        Command::Demo { case, mode, out } => run_demo(case, mode, &out),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
