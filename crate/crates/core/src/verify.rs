//! Frequency-domain stability certificates for delayed linear systems and
//! convergence diagnostics for simulated trajectories.
//!
//! `x(k+1) = A₀x(k) + Σ A_i x(k − κ_i)` is asymptotically stable when the
//! undelayed sum `A₀ + ΣA_i` is Schur stable and
//! `det(e^{jω}I − A₀ − Σ e^{−jωκ_i}A_i) ≠ 0` for every `ω ∈ [−π, π]` and every
//! admissible delay combination. The determinant test is evaluated through the
//! smallest singular value on a uniform frequency grid.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;

use crate::design::{AgentModel, ProtocolDesign};
use crate::error::{Error, Result};
use crate::spectral::{self, is_schur_stable, min_singular_value, to_complex, ComplexMatrix, RealMatrix};

pub const DEFAULT_OMEGA_POINTS: usize = 4096;
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
pub const MAX_GRID_EVALUATIONS: u64 = 1_000_000;

/// A delayed term `A_i x(k − κ_i)` with `κ_i` ranging over an integer set.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedTerm {
    pub matrix: RealMatrix,
    pub kappa: RangeInclusive<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub passed: bool,
    /// Smallest `σ_min` over the grid (zero when the undelayed check fails).
    pub min_margin: f64,
    pub argmin_omega: f64,
    pub argmin_kappa: Vec<u32>,
    pub omega_points: usize,
    pub kappa_combinations: usize,
    pub threshold: f64,
    /// Set when the certificate fails before the sweep.
    pub reason: Option<String>,
}

fn kappa_combinations(terms: &[DelayedTerm]) -> Vec<Vec<u32>> {
    let mut combos = vec![Vec::new()];
    for term in terms {
        let mut next = Vec::new();
        for prefix in &combos {
            for k in term.kappa.clone() {
                let mut c = prefix.clone();
                c.push(k);
                next.push(c);
            }
        }
        combos = next;
    }
    combos
}

/// Grid evaluation of the delayed determinant condition.
pub fn delay_certificate(
    a0: &RealMatrix,
    terms: &[DelayedTerm],
    omega_points: usize,
    threshold: f64,
) -> Result<CertificateReport> {
    let n = a0.nrows();
    if a0.ncols() != n {
        return Err(Error::Dimension(format!("A0 must be square, got {:?}", a0.shape())));
    }
    for (i, t) in terms.iter().enumerate() {
        if t.matrix.shape() != (n, n) {
            return Err(Error::Dimension(format!("term {i} is {:?}, expected {n}x{n}", t.matrix.shape())));
        }
        if t.kappa.is_empty() {
            return Err(Error::Dimension(format!("term {i} has an empty delay range")));
        }
    }
    let combos = kappa_combinations(terms);
    let omega_points = omega_points.max(2);
    let evaluations = omega_points as u64 * combos.len() as u64;
    if evaluations > MAX_GRID_EVALUATIONS {
        return Err(Error::Sizing {
            evaluations,
            limit: MAX_GRID_EVALUATIONS,
        });
    }

    let undelayed = terms.iter().fold(a0.clone(), |acc, t| acc + &t.matrix);
    if !is_schur_stable(&undelayed, 0.0)? {
        return Ok(CertificateReport {
            passed: false,
            min_margin: 0.0,
            argmin_omega: 0.0,
            argmin_kappa: Vec::new(),
            omega_points,
            kappa_combinations: combos.len(),
            threshold,
            reason: Some(format!(
                "undelayed system unstable (spectral radius {:.9})",
                spectral::spectral_radius(&undelayed)?
            )),
        });
    }

    let a0_c = to_complex(a0);
    let terms_c: Vec<ComplexMatrix> = terms.iter().map(|t| to_complex(&t.matrix)).collect();
    let mut best = (f64::INFINITY, 0.0, Vec::new());
    for w in spectral::uniform_grid(-PI, PI, omega_points) {
        let mut base = -a0_c.clone();
        let z = Complex64::from_polar(1.0, w);
        for i in 0..n {
            base[(i, i)] += z;
        }
        for combo in &combos {
            let mut m = base.clone();
            for (tm, &kappa) in terms_c.iter().zip(combo) {
                m -= tm * Complex64::from_polar(1.0, -w * f64::from(kappa));
            }
            let s = min_singular_value(&m)?;
            if s < best.0 {
                best = (s, w, combo.clone());
            }
        }
    }
    let (min_margin, argmin_omega, argmin_kappa) = best;
    Ok(CertificateReport {
        passed: min_margin > threshold,
        min_margin,
        argmin_omega,
        argmin_kappa,
        omega_points,
        kappa_combinations: combos.len(),
        threshold,
        reason: None,
    })
}

/// Certificate for `x(k+1) = Ax(k) − Gx(k − κ)` with `κ ∈ {0, …, κ̄}`, where
/// `G = ρBK_ε` is the protocol's delayed feedback.
pub fn delayed_feedback_certificate(
    a: &RealMatrix,
    gain: &RealMatrix,
    kappa_bar: u32,
    omega_points: usize,
    threshold: f64,
) -> Result<CertificateReport> {
    let term = DelayedTerm {
        matrix: -gain,
        kappa: 0..=kappa_bar,
    };
    delay_certificate(a, &[term], omega_points, threshold)
}

/// Certificate for a designed protocol probed at delay bound `kappa_bar`
/// (which may differ from the design's own bound for diagnostics).
pub fn closed_loop_certificate(
    model: &AgentModel,
    design: &ProtocolDesign,
    kappa_bar: u32,
    omega_points: usize,
    threshold: f64,
) -> Result<CertificateReport> {
    let gain = &model.b * design.feedback();
    delayed_feedback_certificate(&model.a, &gain, kappa_bar, omega_points, threshold)
}

/// Finite-horizon convergence summary of a synchronization error series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub initial_error: f64,
    pub peak_error: f64,
    pub final_error: f64,
    /// Largest error over the tail window.
    pub tail_max: f64,
    /// `tail_max / peak_error` (zero for an identically zero series).
    pub decay_ratio: f64,
}

/// Convergence test over the last `tail_fraction` of the series.
///
/// Converged iff the final error is below `tol` and the tail maximum is below
/// `tail_fraction` times the initial error (or below `tol` outright, which
/// covers runs that start synchronized). Series shorter than 10 samples never
/// count as converged.
pub fn convergence_report(errors: &[f64], tail_fraction: f64, tol: f64) -> ConvergenceReport {
    let len = errors.len();
    let initial_error = errors.first().copied().unwrap_or(0.0);
    let final_error = errors.last().copied().unwrap_or(0.0);
    let peak_error = errors.iter().copied().fold(0.0, f64::max);
    let tail_len = ((len as f64 * tail_fraction).ceil() as usize).clamp(1, len.max(1));
    let tail_max = errors[len.saturating_sub(tail_len)..].iter().copied().fold(0.0, f64::max);
    let decay_ratio = if peak_error > 0.0 { tail_max / peak_error } else { 0.0 };
    let decayed = tail_max < initial_error * tail_fraction || tail_max < tol;
    ConvergenceReport {
        converged: len >= 10 && final_error < tol && decayed && errors.iter().all(|e| e.is_finite()),
        initial_error,
        peak_error,
        final_error,
        tail_max,
        decay_ratio,
    }
}
