mod common;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use regsync_core::spectral::{
    eigenvalues, is_schur_stable, omega_max, singular_values, spectral_radius, to_complex, UNIT_CIRCLE_TOL,
};
use regsync_core::RealMatrix;

fn square(max_n: usize) -> impl Strategy<Value = RealMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn eigenvalues_match_det_and_trace(m in square(6)) {
        let spec = eigenvalues(&m).unwrap();
        prop_assert_eq!(spec.len(), m.nrows());
        let prod = spec.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);
        let sum: Complex64 = spec.iter().sum();
        let det = m.determinant();
        let scale = spec.iter().fold(1.0, |acc, z| acc * z.norm().max(1.0));
        prop_assert!((prod - det).norm() <= 1e-8 * scale, "prod {} det {}", prod, det);
        prop_assert!((sum - m.trace()).norm() <= 1e-8 * (1.0 + m.abs().sum()));
    }

    #[test]
    fn spectrum_is_sorted(m in square(6)) {
        let spec = eigenvalues(&m).unwrap();
        for pair in spec.values().windows(2) {
            let (a, b) = (pair[0], pair[1]);
            prop_assert!(a.norm() >= b.norm() - 1e-9);
        }
    }

    #[test]
    fn omega_max_invariant_under_orthogonal_similarity(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (a, _) = common::random_admissible(&mut rng);
        let n = a.nrows();
        let q = common::random_matrix(&mut rng, n, n, 1.0).qr().q();
        let rotated = q.transpose() * &a * &q;
        let w = omega_max(&a, UNIT_CIRCLE_TOL).unwrap();
        let wr = omega_max(&rotated, UNIT_CIRCLE_TOL).unwrap();
        prop_assert!((w - wr).abs() <= 1e-9, "{} vs {}", w, wr);
    }

    #[test]
    fn determinant_between_extreme_singular_values(m in square(5)) {
        let sv = singular_values(&to_complex(&m)).unwrap();
        let n = m.nrows() as f64;
        let geo = m.determinant().abs().powf(1.0 / n);
        let (hi, lo) = (sv[0], sv[sv.len() - 1]);
        prop_assert!(lo <= geo * (1.0 + 1e-9) + 1e-12 && geo <= hi * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn schur_stable_iterates_decay(m in square(5), target in 0.1..0.95f64, seed in any::<u64>()) {
        let r = spectral_radius(&m).unwrap();
        prop_assume!(r > 1e-6);
        let m = m * (target / r);
        prop_assume!(is_schur_stable(&m, 0.0).unwrap());
        let n = m.nrows();
        let rho = spectral_radius(&m).unwrap();
        let steps = (10.0 * n as f64 / (1.0 - rho)).ceil() as usize;
        let mut rng = common::rng(seed);
        let x0 = DVector::from_column_slice(common::random_matrix(&mut rng, n, 1, 1.0).as_slice());
        prop_assume!(x0.norm() > 1e-6);
        let mut x = x0.clone();
        for _ in 0..steps {
            x = &m * x;
        }
        prop_assert!(x.norm() < x0.norm(), "‖x(K)‖ = {} after {} steps", x.norm(), steps);
    }
}
