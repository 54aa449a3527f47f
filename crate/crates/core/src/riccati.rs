//! Low-gain discrete algebraic Riccati equation.
//!
//! Solves `AᵀPA − P − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q = 0` for the stabilizing
//! solution, with the designer's weights fixed to `Q = εI`, `R = I`. The
//! resulting gain `K = (I + BᵀPB)⁻¹BᵀPA` shrinks as `ε → 0`, which is what
//! buys tolerance to input delay and to complex gain perturbations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    self, eigenvalues, is_schur_stable, singular_values, symmetric_max_eigenvalue,
    symmetric_min_eigenvalue, to_complex, ComplexMatrix, RealMatrix,
};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Eigenvalues with modulus at least `1 - MARGINAL_TOL` are checked by the
/// PBH rank test.
const MARGINAL_TOL: f64 = 1e-7;
const PBH_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DareMethod {
    /// Riccati difference iteration from `P₀ = Q`. Linear convergence.
    FixedPoint,
    /// Structure-preserving doubling. Quadratic convergence.
    Doubling,
}

#[derive(Debug, Clone, Copy)]
pub struct DareOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: DareMethod,
}

impl Default for DareOptions {
    fn default() -> Self {
        DareOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            method: DareMethod::Doubling,
        }
    }
}

/// Stabilizing solution of the low-gain DARE together with its gain.
#[derive(Debug, Clone, PartialEq)]
pub struct DareSolution {
    pub p: RealMatrix,
    pub epsilon: f64,
    pub k: RealMatrix,
    /// `λ_max(BᵀPB)`.
    pub gamma: f64,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve the low-gain DARE with `Q = εI`, `R = I`.
pub fn solve_low_gain_dare(
    a: &RealMatrix,
    b: &RealMatrix,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DareSolution> {
    solve_low_gain_dare_with(
        a,
        b,
        epsilon,
        DareOptions {
            tol,
            max_iter,
            ..DareOptions::default()
        },
    )
}

pub fn solve_low_gain_dare_with(
    a: &RealMatrix,
    b: &RealMatrix,
    epsilon: f64,
    opts: DareOptions,
) -> Result<DareSolution> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Assumption(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let n = a.nrows();
    let q = RealMatrix::identity(n, n) * epsilon;
    let r = RealMatrix::identity(b.ncols(), b.ncols());
    let (p, iterations) = solve_dare(a, b, &q, &r, opts)?;
    let k = feedback_gain(a, b, &p)?;
    let gamma = symmetric_max_eigenvalue(&(b.transpose() * &p * b)).max(0.0);
    let residual = riccati_residual(a, b, &p, &q, &r);
    Ok(DareSolution {
        p,
        epsilon,
        k,
        gamma,
        residual,
        iterations,
    })
}

/// General-weight DARE. Returns the stabilizing solution and the iteration
/// count.
pub fn solve_dare(
    a: &RealMatrix,
    b: &RealMatrix,
    q: &RealMatrix,
    r: &RealMatrix,
    opts: DareOptions,
) -> Result<(RealMatrix, usize)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "DARE expects A n×n, B n×m, Q n×n; got A {:?}, B {:?}, Q {:?}",
            a.shape(),
            b.shape(),
            q.shape()
        )));
    }
    if r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::Dimension(format!(
            "R must be {m}×{m}, got {:?}",
            r.shape(),
            m = b.ncols()
        )));
    }
    if symmetric_min_eigenvalue(q) <= 0.0 || symmetric_min_eigenvalue(r) <= 0.0 {
        return Err(Error::Assumption("Q and R must be positive definite".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Assumption(format!("tolerance must be positive, got {}", opts.tol)));
    }
    check_spectrum_in_closed_disc(a)?;
    check_stabilizable(a, b)?;

    let (p, iterations) = match opts.method {
        DareMethod::FixedPoint => fixed_point(a, b, q, r, opts)?,
        DareMethod::Doubling => doubling(a, b, q, r, opts)?,
    };

    if symmetric_min_eigenvalue(&p) <= 0.0 {
        return Err(Error::Numeric("Riccati solution is not positive definite".into()));
    }
    let k = weighted_gain(a, b, &p, r)?;
    if !is_schur_stable(&(a - b * k), 0.0)? {
        return Err(Error::Numeric("Riccati solution is not stabilizing".into()));
    }
    Ok((p, iterations))
}

fn symmetrize(p: &RealMatrix) -> RealMatrix {
    (p + p.transpose()) * 0.5
}

/// One step of the Riccati difference map.
fn riccati_map(a: &RealMatrix, b: &RealMatrix, p: &RealMatrix, q: &RealMatrix, r: &RealMatrix) -> Result<RealMatrix> {
    let bt_p = b.transpose() * p;
    let gram = r + &bt_p * b;
    let rhs = &bt_p * a;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("R + BᵀPB is not positive definite".into()))?;
    let coupling = a.transpose() * p.transpose() * b * chol.solve(&rhs);
    Ok(symmetrize(&(a.transpose() * p * a + q - coupling)))
}

fn fixed_point(
    a: &RealMatrix,
    b: &RealMatrix,
    q: &RealMatrix,
    r: &RealMatrix,
    opts: DareOptions,
) -> Result<(RealMatrix, usize)> {
    let mut p = q.clone();
    let mut last = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let next = riccati_map(a, b, &p, q, r)?;
        // ‖map(P) − P‖ is exactly the DARE residual at P.
        last = (&next - &p).norm();
        if !last.is_finite() {
            return Err(Error::Numeric("Riccati iteration diverged".into()));
        }
        if last <= opts.tol {
            return Ok((p, iter + 1));
        }
        p = next;
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual: last,
    })
}

// Doubling recursion on (A_k, G_k, H_k) with G₀ = BR⁻¹Bᵀ, H₀ = Q; H_k
// converges to the stabilizing solution.
fn doubling(
    a: &RealMatrix,
    b: &RealMatrix,
    q: &RealMatrix,
    r: &RealMatrix,
    opts: DareOptions,
) -> Result<(RealMatrix, usize)> {
    let n = a.nrows();
    let eye = RealMatrix::identity(n, n);
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("R is not positive definite".into()))?
        .inverse();
    let mut ak = a.clone();
    let mut gk = symmetrize(&(b * r_inv * b.transpose()));
    let mut hk = q.clone();
    let cap = opts.max_iter.min(200);
    for iter in 0..cap {
        let w = (&eye + &gk * &hk)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular I + GH in doubling step".into()))?;
        let ak_w = &ak * &w;
        let a_next = &ak_w * &ak;
        let g_next = symmetrize(&(&gk + &ak_w * &gk * ak.transpose()));
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &w * &ak));
        let step = (&h_next - &hk).norm();
        if !step.is_finite() {
            return Err(Error::Numeric("doubling iteration diverged".into()));
        }
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if step <= 16.0 * f64::EPSILON * hk.norm() || step <= 1e-3 * opts.tol {
            let residual = riccati_residual(a, b, &hk, q, r);
            if residual <= opts.tol {
                return Ok((hk, iter + 1));
            }
            // Doubling has stalled at rounding level; finish with a few
            // fixed-point sweeps which contract monotonically near the solution.
            return polish(a, b, q, r, hk, opts, iter + 1);
        }
    }
    let residual = riccati_residual(a, b, &hk, q, r);
    if residual <= opts.tol {
        return Ok((hk, cap));
    }
    polish(a, b, q, r, hk, opts, cap)
}

fn polish(
    a: &RealMatrix,
    b: &RealMatrix,
    q: &RealMatrix,
    r: &RealMatrix,
    mut p: RealMatrix,
    opts: DareOptions,
    done: usize,
) -> Result<(RealMatrix, usize)> {
    let mut residual = riccati_residual(a, b, &p, q, r);
    let budget = opts.max_iter.saturating_sub(done).min(1000);
    for i in 0..budget {
        if residual <= opts.tol {
            return Ok((p, done + i));
        }
        p = riccati_map(a, b, &p, q, r)?;
        residual = riccati_residual(a, b, &p, q, r);
    }
    if residual <= opts.tol {
        return Ok((p, done + budget));
    }
    Err(Error::Convergence {
        iterations: done + budget,
        residual,
    })
}

/// Frobenius norm of `AᵀPA − P − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`.
pub fn riccati_residual(a: &RealMatrix, b: &RealMatrix, p: &RealMatrix, q: &RealMatrix, r: &RealMatrix) -> f64 {
    match riccati_map(a, b, p, q, r) {
        Ok(next) => (next - p).norm(),
        Err(_) => f64::INFINITY,
    }
}

/// `K = (I + BᵀPB)⁻¹BᵀPA`.
pub fn feedback_gain(a: &RealMatrix, b: &RealMatrix, p: &RealMatrix) -> Result<RealMatrix> {
    let m = b.ncols();
    weighted_gain(a, b, p, &RealMatrix::identity(m, m))
}

fn weighted_gain(a: &RealMatrix, b: &RealMatrix, p: &RealMatrix, r: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || p.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "feedback gain expects A n×n, B n×m, P n×n; got A {:?}, B {:?}, P {:?}",
            a.shape(),
            b.shape(),
            p.shape()
        )));
    }
    let bt_p = b.transpose() * p;
    let gram = r + &bt_p * b;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("R + BᵀPB is not positive definite".into()))?;
    Ok(chol.solve(&(bt_p * a)))
}

/// Every eigenvalue of `a` must satisfy `|λ| ≤ 1` (up to the unit-circle
/// tolerance).
pub fn check_spectrum_in_closed_disc(a: &RealMatrix) -> Result<()> {
    spectral::omega_max(a, spectral::UNIT_CIRCLE_TOL).map(|_| ())
}

/// PBH rank test at every eigenvalue of `a` on or near the unit circle.
pub fn check_stabilizable(a: &RealMatrix, b: &RealMatrix) -> Result<()> {
    let n = a.nrows();
    for lambda in eigenvalues(a)?.iter().filter(|z| z.norm() >= 1.0 - MARGINAL_TOL) {
        let mut pencil = ComplexMatrix::zeros(n, n + b.ncols());
        pencil.view_mut((0, 0), (n, n)).copy_from(&to_complex(a));
        for i in 0..n {
            pencil[(i, i)] -= lambda;
        }
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(&to_complex(b));
        let sv = singular_values(&pencil)?;
        let rank_floor = PBH_RANK_TOL * sv[0];
        if sv.len() < n || sv[n - 1] <= rank_floor {
            return Err(Error::Assumption(format!(
                "(A, B) is not stabilizable: mode λ = {lambda:.6} is uncontrollable"
            )));
        }
    }
    Ok(())
}

/// Detectability of `(C, A)` by duality with stabilizability of `(Aᵀ, Cᵀ)`.
pub fn check_detectable(a: &RealMatrix, c: &RealMatrix) -> Result<()> {
    check_stabilizable(&a.transpose(), &c.transpose()).map_err(|e| match e {
        Error::Assumption(msg) => Error::Assumption(
            msg.replace("(A, B) is not stabilizable", "(C, A) is not detectable")
                .replace("uncontrollable", "unobservable"),
        ),
        other => other,
    })
}

/// Open disc of complex gains `λ` for which `A + λBF_δ` stays Schur stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDisc {
    pub center: f64,
    pub radius: f64,
    pub gamma: f64,
}

impl GainDisc {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Degenerate(format!(
                "gain disc needs λ_max(BᵀPB) > 0, got {gamma}"
            )));
        }
        Ok(GainDisc {
            center: 1.0 + 1.0 / gamma,
            radius: (1.0 + gamma).sqrt() / gamma,
            gamma,
        })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

pub fn gain_disc(a: &RealMatrix, b: &RealMatrix, delta: f64) -> Result<GainDisc> {
    let sol = solve_low_gain_dare(a, b, delta, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    GainDisc::from_gamma(sol.gamma)
}

/// `F_δ = −(BᵀP_δB + I)⁻¹BᵀP_δA`.
pub fn low_gain_feedback(a: &RealMatrix, b: &RealMatrix, delta: f64) -> Result<RealMatrix> {
    let sol = solve_low_gain_dare(a, b, delta, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(-sol.k)
}

/// Whether `A + λBF_δ` is Schur stable.
pub fn check_lambda_stabilized(a: &RealMatrix, b: &RealMatrix, delta: f64, lambda: Complex64) -> Result<bool> {
    let f = low_gain_feedback(a, b, delta)?;
    lambda_closed_loop_stable(a, b, &f, lambda)
}

/// Same test with a precomputed `F_δ`.
pub fn lambda_closed_loop_stable(a: &RealMatrix, b: &RealMatrix, f: &RealMatrix, lambda: Complex64) -> Result<bool> {
    let closed = to_complex(a) + to_complex(&(b * f)) * lambda;
    spectral::is_schur_stable_complex(&closed, 0.0)
}

/// Matrix inequality `lhs ⪯ rhs` up to `tol`.
pub fn loewner_le(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>, tol: f64) -> bool {
    symmetric_min_eigenvalue(&(rhs - lhs)) >= -tol
}
