mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use regsync_core::dynamics::{expanded_exchange, network_measurement};
use regsync_core::network::{d_bar, is_rooted, laplacian};
use regsync_core::spectral::spectral_radius;
use regsync_core::{CommGraph, CouplingMode, RealMatrix};

fn random_graph(seed: u64, n: usize) -> CommGraph {
    let mut rng = common::rng(seed);
    let adj = DMatrix::from_fn(n, n, |i, j| {
        if i != j && rng.random_bool(0.4) {
            rng.random_range(0.1..3.0)
        } else {
            0.0
        }
    });
    let mut roots: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    roots[rng.random_range(0..n)] = true;
    CommGraph::new(adj, roots).unwrap()
}

/// `(2I + D_in)⁻¹ L̄` assembled densely.
fn scaled_expanded_laplacian(g: &CommGraph) -> RealMatrix {
    let n = g.len();
    let mut l = RealMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = (0..n).map(|j| g.weight(i, j)).sum();
        for j in 0..n {
            l[(i, j)] = if i == j { d + g.root_flag(i) } else { -g.weight(i, j) };
        }
        l.row_mut(i).scale_mut(1.0 / (2.0 + d));
    }
    l
}

fn stack(vs: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(vs.iter().map(|v| v.len()).sum(), vs.iter().flat_map(|v| v.iter().copied()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn d_bar_rows(seed in any::<u64>(), n in 1..8usize) {
        let g = random_graph(seed, n);
        let m = d_bar(&g).unwrap();
        prop_assert!(laplacian(&g).column_sum().amax() < 1e-12 || n == 1);
        let ones = DVector::from_element(n, 1.0);
        prop_assert!((&m.laplacian * &ones).amax() < 1e-12);
        for i in 0..n {
            let expected = 1.0 - g.root_flag(i) / (2.0 + m.in_degree[i]);
            prop_assert!((m.d_bar.row(i).sum() - expected).abs() < 1e-12);
            prop_assert!(m.d_bar.row(i).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn kronecker_with_neutral_dynamics_is_stable(seed in any::<u64>(), n in 1..6usize) {
        let mut rng = common::rng(seed);
        let g = common::random_rooted_graph(&mut rng, n);
        prop_assert!(is_rooted(&g).unwrap());
        let (a, _) = common::random_admissible(&mut rng);
        let product = d_bar(&g).unwrap().d_bar.kronecker(&a);
        prop_assert!(spectral_radius(&product).unwrap() < 1.0);
    }

    #[test]
    fn measurement_matches_dense_oracle(seed in any::<u64>(), n in 1..7usize) {
        let g = random_graph(seed, n);
        let mut rng = common::rng(seed ^ 0x5eed);
        let model = common::demo_model();
        let xs = common::random_states(&mut rng, n, 3);
        let xr = common::random_states(&mut rng, 1, 3).remove(0);
        let lbar = scaled_expanded_laplacian(&g);
        let shifted: Vec<_> = xs.iter().map(|x| x - &xr).collect();

        let partial = stack(&network_measurement(&g, CouplingMode::Partial, &model.c, &xs, &xr));
        let oracle = lbar.kronecker(&model.c) * stack(&shifted);
        prop_assert!((partial - oracle).amax() < 1e-12);

        let full = stack(&network_measurement(&g, CouplingMode::Full, &model.c, &xs, &xr));
        let oracle = lbar.kronecker(&RealMatrix::identity(3, 3)) * stack(&shifted);
        prop_assert!((full - oracle).amax() < 1e-12);

        let exchanged = stack(&expanded_exchange(&g, &xs));
        let oracle = lbar.kronecker(&RealMatrix::identity(3, 3)) * stack(&xs);
        prop_assert!((exchanged - oracle).amax() < 1e-12);
    }
}

#[test]
fn three_cycle_measurement_by_hand() {
    let g = common::three_cycle();
    let c = RealMatrix::identity(1, 1);
    let xs: Vec<_> = [1.0, 2.0, 4.0].iter().map(|&v| DVector::from_element(1, v)).collect();
    let xr = DVector::from_element(1, 0.5);
    let z = network_measurement(&g, CouplingMode::Full, &c, &xs, &xr);
    // Node 1 hears node 3 and the exosystem; nodes 2 and 3 hear their predecessor.
    assert!((z[0][0] - ((1.0 - 4.0) + (1.0 - 0.5)) / 3.0).abs() < 1e-15);
    assert!((z[1][0] - (2.0 - 1.0) / 3.0).abs() < 1e-15);
    assert!((z[2][0] - (4.0 - 2.0) / 3.0).abs() < 1e-15);
}
