//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regsync_core::demos::{self, DemoCase};
use regsync_core::riccati::check_stabilizable;
use regsync_core::{AgentModel, CommGraph, CouplingMode, RealMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn demo_model() -> AgentModel {
    let cfg = demos::demo_model();
    AgentModel::new(
        regsync_core::scenario::matrix_from_rows(&cfg.a),
        regsync_core::scenario::matrix_from_rows(&cfg.b),
        regsync_core::scenario::matrix_from_rows(&cfg.c),
    )
    .unwrap()
}

pub fn full_state_model(m: &AgentModel) -> AgentModel {
    let n = m.n();
    AgentModel::new(m.a.clone(), m.b.clone(), RealMatrix::identity(n, n)).unwrap()
}

pub fn demo_graph(case: DemoCase) -> CommGraph {
    let edges: Vec<(usize, usize)> = case.edges().iter().map(|&(i, j)| (i - 1, j - 1)).collect();
    CommGraph::from_edges(case.agents(), &edges, &[0]).unwrap()
}

/// The directed 3-cycle 1 → 2 → 3 → 1 rooted at node 1.
pub fn three_cycle() -> CommGraph {
    CommGraph::from_edges(3, &[(1, 0), (2, 1), (0, 2)], &[0]).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> RealMatrix {
    DMatrix::from_fn(rows, cols, |_, _| uniform(rng, -scale, scale))
}

/// Random `(A, B)` with spectrum in the closed unit disc, at least one
/// eigenvalue on the circle, and `(A, B)` stabilizable.
pub fn random_admissible(rng: &mut ChaCha8Rng) -> (RealMatrix, RealMatrix) {
    loop {
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=2usize);
        let mut core = RealMatrix::zeros(n, n);
        let mut i = 0;
        let mut on_circle = false;
        while i < n {
            if i + 1 < n && rng.random_bool(0.6) {
                let w = uniform(rng, 0.05, PI - 0.05);
                let r = if !on_circle || rng.random_bool(0.5) { 1.0 } else { uniform(rng, 0.2, 0.95) };
                on_circle |= r == 1.0;
                core[(i, i)] = r * w.cos();
                core[(i, i + 1)] = -r * w.sin();
                core[(i + 1, i)] = r * w.sin();
                core[(i + 1, i + 1)] = r * w.cos();
                i += 2;
            } else {
                core[(i, i)] = if !on_circle || rng.random_bool(0.3) {
                    on_circle = true;
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    uniform(rng, -0.9, 0.9)
                };
                i += 1;
            }
        }
        let t = RealMatrix::identity(n, n) + random_matrix(rng, n, n, 0.3);
        let Some(t_inv) = t.clone().try_inverse() else { continue };
        let a = &t * core * t_inv;
        let b = random_matrix(rng, n, m, 1.0);
        if check_stabilizable(&a, &b).is_ok() {
            return (a, b);
        }
    }
}

/// Random weighted graph on `n` nodes that contains a spanning tree rooted at
/// node 0, plus a few extra edges.
pub fn random_rooted_graph(rng: &mut ChaCha8Rng, n: usize) -> CommGraph {
    let mut adj = RealMatrix::zeros(n, n);
    for i in 1..n {
        let parent = rng.random_range(0..i);
        adj[(i, parent)] = uniform(rng, 0.5, 2.0);
    }
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            adj[(i, j)] = uniform(rng, 0.5, 2.0);
        }
    }
    let mut roots = vec![false; n];
    roots[0] = true;
    CommGraph::new(adj, roots).unwrap()
}

pub fn random_states(rng: &mut ChaCha8Rng, count: usize, n: usize) -> Vec<DVector<f64>> {
    (0..count).map(|_| DVector::from_fn(n, |_, _| uniform(rng, -2.0, 2.0))).collect()
}

pub fn mode_model(mode: CouplingMode) -> AgentModel {
    match mode {
        CouplingMode::Full => full_state_model(&demo_model()),
        CouplingMode::Partial => demo_model(),
    }
}
