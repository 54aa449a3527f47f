//! Dense matrix spectral utilities: eigenvalues, singular values, Schur
//! stability and the peak unit-circle frequency of a system matrix.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Eigenvalues within this distance of the unit circle count as lying on it.
pub const UNIT_CIRCLE_TOL: f64 = 1e-7;

const SCHUR_MAX_SWEEPS: usize = 10_000;

/// Multiset of eigenvalues, sorted by descending modulus then ascending
/// argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<Complex64>);

impl Spectrum {
    fn from_unsorted(mut values: Vec<Complex64>) -> Self {
        values.sort_by(compare_eigenvalues);
        Spectrum(values)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest eigenvalue modulus.
    pub fn radius(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.0.iter()
    }
}

// Moduli are bucketed at 1e-10 so that conjugate pairs, whose computed moduli
// differ in the last bits, order by argument. The key is a total order.
fn ordering_key(z: &Complex64) -> (i64, f64) {
    let bucket = (z.norm() * 1e10).round() as i64;
    (-bucket, z.arg())
}

fn compare_eigenvalues(a: &Complex64, b: &Complex64) -> Ordering {
    let (ka, aa) = ordering_key(a);
    let (kb, ab) = ordering_key(b);
    ka.cmp(&kb).then(aa.total_cmp(&ab))
}

fn require_square<T>(m: &DMatrix<T>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension(format!("{what} must have order >= 1")));
    }
    Ok(m.nrows())
}

fn require_finite<'a>(mut entries: impl Iterator<Item = &'a f64>, what: &str) -> Result<()> {
    if entries.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} has non-finite entries")))
    }
}

/// All eigenvalues of a real square matrix, with multiplicity.
pub fn eigenvalues(m: &RealMatrix) -> Result<Spectrum> {
    let n = require_square(m, "eigenvalue input")?;
    require_finite(m.iter(), "eigenvalue input")?;
    if n == 1 {
        return Ok(Spectrum(vec![Complex64::new(m[(0, 0)], 0.0)]));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_SWEEPS).ok_or_else(|| {
        Error::Numeric(format!(
            "real Schur iteration did not converge within {SCHUR_MAX_SWEEPS} sweeps \
             (order {n}, max |entry| {:e})",
            m.amax()
        ))
    })?;
    let values = schur.complex_eigenvalues().iter().copied().collect();
    Ok(Spectrum::from_unsorted(values))
}

/// All eigenvalues of a complex square matrix, with multiplicity.
pub fn eigenvalues_complex(m: &ComplexMatrix) -> Result<Spectrum> {
    let n = require_square(m, "eigenvalue input")?;
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numeric("eigenvalue input has non-finite entries".into()));
    }
    if n == 1 {
        return Ok(Spectrum(vec![m[(0, 0)]]));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_SWEEPS).ok_or_else(|| {
        Error::Numeric(format!(
            "complex Schur iteration did not converge within {SCHUR_MAX_SWEEPS} sweeps \
             (order {n}, max |entry| {:e})",
            m.iter().map(|z| z.norm()).fold(0.0, f64::max)
        ))
    })?;
    let (_, t) = schur.unpack();
    Ok(Spectrum::from_unsorted(triangular_eigenvalues(&t)))
}

// The complex Schur form is normally triangular, but an undeflated 2x2 block
// can survive; solve those directly.
fn triangular_eigenvalues(t: &ComplexMatrix) -> Vec<Complex64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5).powu(2) + b * c;
            let root = disc.sqrt();
            out.push(half_tr + root);
            out.push(half_tr - root);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out
}

pub fn spectral_radius(m: &RealMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.radius())
}

pub fn spectral_radius_complex(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues_complex(m)?.radius())
}

/// Strict Schur test: every eigenvalue satisfies `|λ| < 1 - tol`.
pub fn is_schur_stable(m: &RealMatrix, tol: f64) -> Result<bool> {
    Ok(spectral_radius(m)? < 1.0 - tol)
}

pub fn is_schur_stable_complex(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(spectral_radius_complex(m)? < 1.0 - tol)
}

/// Largest argument among the unit-circle eigenvalues of `a`, or zero when
/// `a` is Schur stable.
///
/// Eigenvalues outside the circle by more than `tol` violate the model
/// assumption and are reported as an error.
pub fn omega_max(a: &RealMatrix, tol: f64) -> Result<f64> {
    let spectrum = eigenvalues(a)?;
    if let Some(bad) = spectrum.iter().find(|z| z.norm() > 1.0 + tol) {
        return Err(Error::Assumption(format!(
            "A has eigenvalue {bad} with modulus {:.9} outside the closed unit disc",
            bad.norm()
        )));
    }
    let peak = spectrum
        .iter()
        .filter(|z| (z.norm() - 1.0).abs() <= tol)
        .map(|z| z.arg().abs())
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))));
    Ok(peak.map_or(0.0, |w| w.min(PI)))
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Dimension("singular values of an empty matrix".into()));
    }
    let svd = m.clone().try_svd(false, false, f64::EPSILON, 0).ok_or_else(|| {
        Error::Numeric(format!("SVD failed to converge ({}x{})", m.nrows(), m.ncols()))
    })?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub fn min_singular_value(m: &ComplexMatrix) -> Result<f64> {
    let values = singular_values(m)?;
    // A wide matrix has min(rows, cols) singular values; that is the minimum.
    Ok(values.last().copied().unwrap_or(0.0).max(0.0))
}

/// Largest singular value (spectral norm) of a real matrix.
pub fn spectral_norm(m: &RealMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_max_eigenvalue(m: &RealMatrix) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(m: &RealMatrix) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `e^{jω} I - A`.
pub fn unit_circle_resolvent(a: &RealMatrix, omega: f64) -> ComplexMatrix {
    let z = Complex64::from_polar(1.0, omega);
    let mut out = -to_complex(a);
    for i in 0..a.nrows() {
        out[(i, i)] += z;
    }
    out
}

/// Uniform grid of `points` values covering `[lo, hi]` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let steps = points.max(2) - 1;
    (0..=steps).map(move |i| {
        if i == steps {
            hi
        } else {
            lo + (hi - lo) * (i as f64) / (steps as f64)
        }
    })
}
