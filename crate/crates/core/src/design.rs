//! Protocol design from the agent model and the delay bound alone.
//!
//! The pipeline is: peak unit-circle frequency `ω_max` → coupling gain `ρ`
//! with `ρ·cos(κ̄·ω_max) > 1/2` → frequency margin `θ` → resolvent bound `μ`
//! away from the low band → low-gain parameter `ε*` → Riccati gain `K_ε`
//! (and an observer gain `F` for partial-state coupling). Nothing here depends
//! on the number of agents, the graph or the individual delays.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riccati::{
    check_detectable, check_spectrum_in_closed_disc, check_stabilizable, solve_dare,
    solve_low_gain_dare, DareOptions, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::spectral::{
    self, is_schur_stable, min_singular_value, spectral_norm, spectral_radius, to_complex,
    unit_circle_resolvent, RealMatrix, UNIT_CIRCLE_TOL,
};
use crate::verify;

pub const DEFAULT_RHO_MARGIN: f64 = 1.05;
pub const DEFAULT_THETA_SAFETY: f64 = 0.01;
pub const DEFAULT_MU_GRID: usize = 2000;
pub const DEFAULT_BAND_GRID: usize = 400;
/// Safety factor applied to the gridded minimum singular value.
pub const MU_GRID_SAFETY: f64 = 0.9;
/// Required spectral radius of `A − FC` for the built-in observer.
pub const OBSERVER_RADIUS: f64 = 0.9;
const OBSERVER_WEIGHTS: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1000.0];

/// Identical agent dynamics `x(k+1) = Ax(k) + Bu(k − κ)`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealMatrix,
}

impl AgentModel {
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square, got {:?}", a.shape())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!("B must be {n}×m with m ≥ 1, got {:?}", b.shape())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Dimension(format!("C must be q×{n} with q ≥ 1, got {:?}", c.shape())));
        }
        Ok(AgentModel { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn q(&self) -> usize {
        self.c.nrows()
    }

    /// Spectrum in the closed unit disc, `(A, B)` stabilizable and, for
    /// partial-state coupling, `(C, A)` detectable.
    pub fn check_assumptions(&self, mode: CouplingMode) -> Result<()> {
        check_spectrum_in_closed_disc(&self.a)?;
        check_stabilizable(&self.a, &self.b)?;
        if mode == CouplingMode::Partial {
            check_detectable(&self.a, &self.c)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Full,
    Partial,
}

impl std::fmt::Display for CouplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CouplingMode::Full => "full",
            CouplingMode::Partial => "partial",
        })
    }
}

impl std::str::FromStr for CouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CouplingMode::Full),
            "partial" => Ok(CouplingMode::Partial),
            other => Err(Error::Scenario(format!("unknown coupling mode `{other}` (expected full|partial)"))),
        }
    }
}

/// User-pinned parameters. Pinned values are validated, not trusted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub rho_margin: f64,
    pub theta_safety: f64,
    pub mu_grid: usize,
    pub band_grid: usize,
    /// Frequency grid for certifying a pinned ε above the swept `ε*`.
    pub certificate_grid: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            rho_margin: DEFAULT_RHO_MARGIN,
            theta_safety: DEFAULT_THETA_SAFETY,
            mu_grid: DEFAULT_MU_GRID,
            band_grid: DEFAULT_BAND_GRID,
            certificate_grid: verify::DEFAULT_OMEGA_POINTS,
        }
    }
}

/// A complete protocol parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolDesign {
    pub mode: CouplingMode,
    /// Largest sweep value meeting both the norm bound and the low-band
    /// stability condition.
    pub epsilon_star: f64,
    pub epsilon: f64,
    /// True when `epsilon` was pinned by the user rather than set to `ε*`.
    pub epsilon_pinned: bool,
    pub rho: f64,
    pub k: RealMatrix,
    pub p: RealMatrix,
    pub f: Option<RealMatrix>,
    pub omega_max: f64,
    pub kappa_bar: u32,
    pub theta: f64,
    pub mu: f64,
}

impl ProtocolDesign {
    /// `ρ K_ε`, the gain applied to the protocol state.
    pub fn feedback(&self) -> RealMatrix {
        &self.k * self.rho
    }

    /// Largest admissible delay bound for `ω_max`, or `None` when unbounded.
    pub fn max_admissible_kappa(&self) -> Option<f64> {
        max_admissible_kappa(self.omega_max)
    }
}

/// `π / (2ω_max)`, or `None` (unbounded) when `ω_max = 0`.
pub fn max_admissible_kappa(omega_max: f64) -> Option<f64> {
    (omega_max > 0.0).then(|| FRAC_PI_2 / omega_max)
}

/// `κ̄ · ω_max < π/2`.
pub fn delay_admissible(a: &RealMatrix, kappa_bar: u32) -> Result<bool> {
    let w = spectral::omega_max(a, UNIT_CIRCLE_TOL)?;
    Ok(f64::from(kappa_bar) * w < FRAC_PI_2)
}

/// `ρ = max(margin / (2cos(κ̄ω_max)), margin / 2)`.
pub fn choose_rho(kappa_bar: u32, omega_max: f64, margin: f64) -> Result<f64> {
    let phase = f64::from(kappa_bar) * omega_max;
    if phase >= FRAC_PI_2 {
        return Err(Error::InadmissibleDelay { product: phase });
    }
    if !(margin > 1.0) {
        return Err(Error::Assumption(format!("rho margin must exceed 1, got {margin}")));
    }
    Ok((margin / (2.0 * phase.cos())).max(0.5 * margin))
}

pub fn choose_theta(rho: f64, kappa_bar: u32, omega_max: f64) -> f64 {
    choose_theta_with_safety(rho, kappa_bar, omega_max, DEFAULT_THETA_SAFETY)
}

/// Frequency margin `θ > 0` with `ρ·cos(κ̄(ω_max + θ)) ≥ 1/2 + safety`,
/// capped so that `ω_max + θ ≤ π`.
///
/// When `ρ` clears the bound by less than `safety`, half the actual clearance
/// is used instead.
pub fn choose_theta_with_safety(rho: f64, kappa_bar: u32, omega_max: f64, safety: f64) -> f64 {
    let cap = PI - omega_max;
    if kappa_bar == 0 {
        return cap;
    }
    let kb = f64::from(kappa_bar);
    let clearance = rho * (kb * omega_max).cos() - 0.5;
    let safety = if clearance > safety { safety } else { 0.5 * clearance };
    let target = ((0.5 + safety) / rho).min(1.0);
    let theta = target.acos() / kb - omega_max;
    theta.min(cap)
}

/// `0.9 · min σ_min(e^{jω}I − A)` over a uniform grid of `[ω_max + θ, π]`.
pub fn estimate_mu(a: &RealMatrix, omega_max: f64, theta: f64, grid_points: usize) -> Result<f64> {
    let lo = (omega_max + theta).min(PI);
    let mut smallest = f64::INFINITY;
    for w in spectral::uniform_grid(lo, PI, grid_points) {
        smallest = smallest.min(min_singular_value(&unit_circle_resolvent(a, w))?);
    }
    let mu = MU_GRID_SAFETY * smallest;
    if !(mu > 0.0) {
        return Err(Error::Consistency(format!(
            "resolvent bound μ = {mu} is not positive on [{lo}, π]: the grid touched an eigenvalue"
        )));
    }
    Ok(mu)
}

/// Geometric sweep `10^{-1}, 10^{-1.25}, …, 10^{-8}`.
pub fn epsilon_sweep_values() -> Vec<f64> {
    (4..=32).map(|i| 10f64.powf(-(i as f64) / 4.0)).collect()
}

/// Outcome of both ε* conditions at one sweep value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// `ρ‖BK_ε‖`.
    pub gain_norm: f64,
    pub norm_ok: bool,
    /// Worst spectral radius of `A − ρe^{−jωκ}BK_ε` over the low band.
    pub band_radius: f64,
    pub band_ok: bool,
}

impl SweepPoint {
    pub fn accepted(&self) -> bool {
        self.norm_ok && self.band_ok
    }
}

/// Worst spectral radius of `A − ρe^{−jωκ}BK` over the open band
/// `|ω| < ω_max + θ` (midpoint grid) and `κ ∈ {0, …, κ̄}`.
pub fn low_band_radius(
    a: &RealMatrix,
    bk: &RealMatrix,
    rho: f64,
    kappa_bar: u32,
    band: f64,
    grid_points: usize,
) -> Result<f64> {
    let mut worst = spectral_radius(&(a - bk * rho))?;
    if kappa_bar == 0 {
        return Ok(worst);
    }
    let a_c = to_complex(a);
    let bk_c = to_complex(bk) * Complex64::new(rho, 0.0);
    let points = grid_points.max(1);
    let h = 2.0 * band / points as f64;
    for i in 0..points {
        let w = -band + (i as f64 + 0.5) * h;
        for kappa in 1..=kappa_bar {
            let phase = Complex64::from_polar(1.0, -w * f64::from(kappa));
            let r = spectral::spectral_radius_complex(&(&a_c - &bk_c * phase))?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Evaluate both conditions at one ε.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_sweep_point(
    a: &RealMatrix,
    b: &RealMatrix,
    epsilon: f64,
    rho: f64,
    mu: f64,
    kappa_bar: u32,
    band: f64,
    band_grid: usize,
) -> Result<SweepPoint> {
    let sol = solve_low_gain_dare(a, b, epsilon, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let bk = b * &sol.k;
    let gain_norm = rho * spectral_norm(&bk);
    let band_radius = low_band_radius(a, &bk, rho, kappa_bar, band, band_grid)?;
    Ok(SweepPoint {
        epsilon,
        gain_norm,
        norm_ok: gain_norm <= mu / 2.0,
        band_radius,
        band_ok: band_radius < 1.0,
    })
}

/// Evaluate every sweep value (largest first).
#[allow(clippy::too_many_arguments)]
pub fn epsilon_sweep(
    a: &RealMatrix,
    b: &RealMatrix,
    rho: f64,
    mu: f64,
    kappa_bar: u32,
    omega_max: f64,
    theta: f64,
    band_grid: usize,
) -> Result<Vec<SweepPoint>> {
    let band = (omega_max + theta).min(PI);
    epsilon_sweep_values()
        .into_iter()
        .map(|eps| evaluate_sweep_point(a, b, eps, rho, mu, kappa_bar, band, band_grid))
        .collect()
}

/// Largest sweep value satisfying `ρ‖BK_ε‖ ≤ μ/2` and low-band stability.
pub fn choose_epsilon_star(
    a: &RealMatrix,
    b: &RealMatrix,
    rho: f64,
    mu: f64,
    kappa_bar: u32,
    omega_max: f64,
    theta: f64,
) -> Result<f64> {
    choose_epsilon_star_with(a, b, rho, mu, kappa_bar, omega_max, theta, DEFAULT_BAND_GRID)
}

#[allow(clippy::too_many_arguments)]
pub fn choose_epsilon_star_with(
    a: &RealMatrix,
    b: &RealMatrix,
    rho: f64,
    mu: f64,
    kappa_bar: u32,
    omega_max: f64,
    theta: f64,
    band_grid: usize,
) -> Result<f64> {
    let band = (omega_max + theta).min(PI);
    let mut diagnostics = Vec::new();
    for eps in epsilon_sweep_values() {
        let point = evaluate_sweep_point(a, b, eps, rho, mu, kappa_bar, band, band_grid)?;
        if point.accepted() {
            return Ok(eps);
        }
        diagnostics.push(point);
    }
    let smallest = diagnostics.last().expect("sweep is non-empty");
    Err(Error::DesignFailure(format!(
        "no ε in the sweep down to {:e} satisfies both conditions; at the smallest value \
         (a) ρ‖BK‖ = {:e} vs μ/2 = {:e} [{}], (b) low-band radius {:.9} [{}]",
        smallest.epsilon,
        smallest.gain_norm,
        mu / 2.0,
        if smallest.norm_ok { "ok" } else { "fail" },
        smallest.band_radius,
        if smallest.band_ok { "ok" } else { "fail" },
    )))
}

/// Observer gain `F` with `ρ(A − FC) ≤ 0.9`, from the dual Riccati equation.
pub fn design_observer(a: &RealMatrix, c: &RealMatrix) -> Result<RealMatrix> {
    check_detectable(a, c)?;
    let at = a.transpose();
    let ct = c.transpose();
    let n = a.nrows();
    let q = c.nrows();
    let mut best: Option<(f64, RealMatrix)> = None;
    for weight in OBSERVER_WEIGHTS {
        let (p, _) = solve_dare(
            &at,
            &ct,
            &(RealMatrix::identity(n, n) * weight),
            &RealMatrix::identity(q, q),
            DareOptions::default(),
        )?;
        let gram = RealMatrix::identity(q, q) + c * &p * &ct;
        let dual_gain = gram
            .cholesky()
            .ok_or_else(|| Error::Numeric("I + CPCᵀ is not positive definite".into()))?
            .solve(&(c * &p * &at));
        let f = dual_gain.transpose();
        let radius = spectral_radius(&(a - &f * c))?;
        if radius <= OBSERVER_RADIUS {
            return Ok(f);
        }
        if best.as_ref().is_none_or(|(r, _)| radius < *r) {
            best = Some((radius, f));
        }
    }
    let (radius, _) = best.expect("at least one observer weight tried");
    Err(Error::DesignFailure(format!(
        "no observer weight reached ρ(A − FC) ≤ {OBSERVER_RADIUS}; best was {radius:.6}"
    )))
}

/// Full design pipeline. Takes no network information by construction.
pub fn design_protocol(
    model: &AgentModel,
    kappa_bar: u32,
    mode: CouplingMode,
    overrides: DesignOverrides,
) -> Result<ProtocolDesign> {
    design_protocol_with(model, kappa_bar, mode, overrides, DesignOptions::default())
}

pub fn design_protocol_with(
    model: &AgentModel,
    kappa_bar: u32,
    mode: CouplingMode,
    overrides: DesignOverrides,
    opts: DesignOptions,
) -> Result<ProtocolDesign> {
    let (a, b) = (&model.a, &model.b);
    model.check_assumptions(mode).map_err(|e| e.at_stage("assumptions"))?;

    let omega_max = spectral::omega_max(a, UNIT_CIRCLE_TOL).map_err(|e| e.at_stage("omega_max"))?;
    let phase = f64::from(kappa_bar) * omega_max;
    if phase >= FRAC_PI_2 {
        return Err(Error::InadmissibleDelay { product: phase });
    }

    let rho = match overrides.rho {
        Some(rho) => {
            if !(rho.is_finite() && rho * phase.cos() > 0.5) {
                return Err(Error::DesignFailure(format!(
                    "pinned ρ = {rho} violates ρ·cos(κ̄ω_max) > 1/2 (cos term {:.6})",
                    phase.cos()
                ))
                .at_stage("rho"));
            }
            rho
        }
        None => choose_rho(kappa_bar, omega_max, opts.rho_margin).map_err(|e| e.at_stage("rho"))?,
    };

    let theta = choose_theta_with_safety(rho, kappa_bar, omega_max, opts.theta_safety);
    let mu = estimate_mu(a, omega_max, theta, opts.mu_grid).map_err(|e| e.at_stage("mu"))?;
    let epsilon_star = choose_epsilon_star_with(a, b, rho, mu, kappa_bar, omega_max, theta, opts.band_grid)
        .map_err(|e| e.at_stage("epsilon_star"))?;

    let (epsilon, epsilon_pinned) = match overrides.epsilon {
        Some(eps) => {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::DesignFailure(format!("pinned ε = {eps} outside (0, 1]")).at_stage("epsilon"));
            }
            (eps, true)
        }
        None => (epsilon_star, false),
    };

    let sol = solve_low_gain_dare(a, b, epsilon, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.at_stage("riccati"))?;
    let bk = b * &sol.k;
    if !is_schur_stable(&(a - &bk * rho), 0.0)? {
        return Err(Error::DesignFailure(format!("A − ρBK_ε is not Schur stable at ε = {epsilon}, ρ = {rho}"))
            .at_stage("riccati"));
    }

    if epsilon > epsilon_star {
        // Above the swept bound the norm condition is not available; require
        // the low-band condition and the full frequency-domain certificate.
        let band = (omega_max + theta).min(PI);
        let radius = low_band_radius(a, &bk, rho, kappa_bar, band, opts.band_grid)?;
        if radius >= 1.0 {
            return Err(Error::DesignFailure(format!(
                "pinned ε = {epsilon} fails the low-band stability condition (radius {radius:.9})"
            ))
            .at_stage("epsilon"));
        }
        let report = verify::delayed_feedback_certificate(
            a,
            &(&bk * rho),
            kappa_bar,
            opts.certificate_grid,
            verify::DEFAULT_THRESHOLD,
        )
        .map_err(|e| e.at_stage("epsilon"))?;
        if !report.passed {
            return Err(Error::DesignFailure(format!(
                "pinned ε = {epsilon} is above ε* = {epsilon_star:e} and fails the delay certificate \
                 (margin {:e})",
                report.min_margin
            ))
            .at_stage("epsilon"));
        }
    }

    let f = match mode {
        CouplingMode::Full => None,
        CouplingMode::Partial => Some(design_observer(a, &model.c).map_err(|e| e.at_stage("observer"))?),
    };

    Ok(ProtocolDesign {
        mode,
        epsilon_star,
        epsilon,
        epsilon_pinned,
        rho,
        k: sol.k,
        p: sol.p,
        f,
        omega_max,
        kappa_bar,
        theta,
        mu,
    })
}
