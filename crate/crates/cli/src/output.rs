//! Text reports and CSV emission.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use regsync_core::verify::{CertificateReport, ConvergenceReport};
use regsync_core::{ProtocolDesign, RealMatrix, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 7] = ["k", "agent", "component", "x", "xr", "u", "error"];

fn matrix_block(out: &mut String, name: &str, m: &RealMatrix) {
    let _ = writeln!(out, "{name} ({}x{}):", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>16.9e}")).collect();
        let _ = writeln!(out, "  [{}]", cells.join(", "));
    }
}

pub fn design_text(d: &ProtocolDesign) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", d.mode);
    let _ = writeln!(out, "epsilon_star: {:e}", d.epsilon_star);
    let pinned = if d.epsilon_pinned { " (pinned)" } else { "" };
    let _ = writeln!(out, "epsilon: {:e}{pinned}", d.epsilon);
    let _ = writeln!(out, "rho: {}", d.rho);
    let _ = writeln!(out, "omega_max: {}", d.omega_max);
    let _ = writeln!(out, "kappa_bar: {}", d.kappa_bar);
    match d.max_admissible_kappa() {
        Some(bound) => {
            let _ = writeln!(out, "admissible kappa_bar: < {bound:.6}");
        }
        None => {
            let _ = writeln!(out, "admissible kappa_bar: inf");
        }
    }
    let _ = writeln!(out, "theta: {}", d.theta);
    let _ = writeln!(out, "mu: {:e}", d.mu);
    matrix_block(&mut out, "K", &d.k);
    matrix_block(&mut out, "P", &d.p);
    match &d.f {
        Some(f) => matrix_block(&mut out, "F", f),
        None => out.push_str("F: none (full-state coupling)\n"),
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(TRAJECTORY_HEADER)?;
    for (k, step) in traj.steps.iter().enumerate() {
        let k = k.to_string();
        let global = step.error.to_string();
        for (c, xr) in step.exo.iter().enumerate() {
            w.write_record([k.as_str(), "0", &c.to_string(), &xr.to_string(), &xr.to_string(), "", &global])?;
        }
        for (i, (node, u)) in step.nodes.iter().zip(&step.inputs).enumerate() {
            let agent = (i + 1).to_string();
            let error = (&node.x - &step.exo).norm().to_string();
            for (c, x) in node.x.iter().enumerate() {
                // `+ 0.0` folds a negative zero into plain zero.
                let u = u.get(c).map(|v| (v + 0.0).to_string()).unwrap_or_default();
                w.write_record([k.as_str(), &agent, &c.to_string(), &x.to_string(), &step.exo[c].to_string(), &u, &error])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format error series: one row per step and series.
pub fn write_plot_data(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["k", "series", "value"])?;
    for (k, step) in traj.steps.iter().enumerate() {
        let k = k.to_string();
        w.write_record([k.as_str(), "error_max", &step.error.to_string()])?;
        for (i, node) in step.nodes.iter().enumerate() {
            let e = (&node.x - &step.exo).norm();
            w.write_record([k.as_str(), &format!("error_agent{}", i + 1), &e.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn convergence_text(r: &ConvergenceReport, tol: f64) -> String {
    format!(
        "convergence: {} (initial {:.6e}, peak {:.6e}, final {:.6e}, tail max {:.6e}, tol {:.6e})\n",
        if r.converged { "converged" } else { "not converged" },
        r.initial_error,
        r.peak_error,
        r.final_error,
        r.tail_max,
        tol
    )
}

pub fn certificate_text(r: &CertificateReport, kappa_bar: u32) -> String {
    let mut out = format!(
        "certificate: {} for kappa in 0..={kappa_bar} ({} frequencies x {} delay combinations)\n",
        if r.passed { "passed" } else { "failed" },
        r.omega_points,
        r.kappa_combinations
    );
    match &r.reason {
        Some(reason) => {
            let _ = writeln!(out, "  reason: {reason}");
        }
        None => {
            let _ = writeln!(
                out,
                "  min sigma_min {:.6e} at omega {:.6}, kappa {:?} (threshold {:e})",
                r.min_margin, r.argmin_omega, r.argmin_kappa, r.threshold
            );
        }
    }
    out
}

pub fn summary_line(cert: &CertificateReport, conv: &ConvergenceReport) -> String {
    let status = if cert.passed && conv.converged { "pass" } else { "fail" };
    format!(
        "SUMMARY status={status} certificate={} min_margin={:e} converged={} final_error={:e}\n",
        if cert.passed { "pass" } else { "fail" },
        cert.min_margin,
        conv.converged,
        conv.final_error
    )
}
