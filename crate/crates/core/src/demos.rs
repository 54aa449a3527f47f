//! Built-in example scenarios: one agent model on three directed networks.
//!
//! The agent has a stable mode at 1/2 and an undamped rotation at ±π/6, so
//! the exosystem produces an oscillating reference and the delay bound must
//! satisfy `κ̄ < 3`.

use crate::design::CouplingMode;
use crate::scenario::{DelayConfig, GraphConfig, ModelConfig, OutputConfig, Rows, ScenarioConfig, SimConfig};

pub const DEMO_K_MAX: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DemoCase {
    One,
    Two,
    Three,
}

impl DemoCase {
    pub const ALL: [DemoCase; 3] = [DemoCase::One, DemoCase::Two, DemoCase::Three];

    pub fn from_index(i: u32) -> Option<Self> {
        match i {
            1 => Some(DemoCase::One),
            2 => Some(DemoCase::Two),
            3 => Some(DemoCase::Three),
            _ => None,
        }
    }

    pub fn index(self) -> u32 {
        match self {
            DemoCase::One => 1,
            DemoCase::Two => 2,
            DemoCase::Three => 3,
        }
    }

    pub fn agents(self) -> usize {
        match self {
            DemoCase::One => 3,
            DemoCase::Two => 5,
            DemoCase::Three => 10,
        }
    }

    /// `(receiver, sender)` pairs, 1-based.
    pub fn edges(self) -> Vec<(usize, usize)> {
        match self {
            DemoCase::One => vec![(2, 1), (3, 2), (1, 3)],
            DemoCase::Two => {
                let mut e: Vec<_> = (1..=4).map(|i| (i + 1, i)).collect();
                e.extend([(1, 3), (3, 5)]);
                e
            }
            DemoCase::Three => {
                let mut e: Vec<_> = (1..=9).map(|i| (i + 1, i)).collect();
                e.extend([(1, 5), (1, 10), (5, 10)]);
                e
            }
        }
    }

    pub fn delays(self) -> Vec<u32> {
        match self {
            DemoCase::One => vec![1, 1, 2],
            DemoCase::Two => vec![2, 2, 2, 1, 2],
            DemoCase::Three => vec![1; 10],
        }
    }

    pub fn epsilon(self, mode: CouplingMode) -> f64 {
        match (self, mode) {
            (DemoCase::Two, CouplingMode::Partial) => 1e-5,
            _ => 1e-3,
        }
    }

    pub fn name(self, mode: CouplingMode) -> String {
        format!("case{}_{mode}", self.index())
    }
}

pub fn demo_model() -> ModelConfig {
    let s = 3f64.sqrt() / 2.0;
    ModelConfig {
        a: vec![vec![0.5, 1.0, 1.0], vec![0.0, s, -0.5], vec![0.0, 0.5, s]],
        b: vec![vec![1.0], vec![1.0], vec![0.0]],
        c: vec![vec![1.0, 0.0, 0.0]],
    }
}

pub fn identity_rows(n: usize) -> Rows {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Deterministic spread of initial agent states.
pub fn default_initial_states(agents: usize, n: usize) -> Rows {
    (0..agents)
        .map(|i| {
            (0..n)
                .map(|c| {
                    let v = 2.0 * ((i + c + 1) as f64).sin();
                    (v * 1e4).round() / 1e4
                })
                .collect()
        })
        .collect()
}

pub fn case_config(case: DemoCase, mode: CouplingMode) -> ScenarioConfig {
    let agents = case.agents();
    let mut adjacency = vec![vec![0.0; agents]; agents];
    for (i, j) in case.edges() {
        adjacency[i - 1][j - 1] = 1.0;
    }
    let mut model = demo_model();
    if mode == CouplingMode::Full {
        model.c = identity_rows(3);
    }
    let kappa = case.delays();
    let kappa_bar = kappa.iter().copied().max().unwrap_or(0);
    ScenarioConfig {
        mode,
        model,
        graph: GraphConfig { adjacency, roots: vec![1] },
        delays: DelayConfig { kappa, kappa_bar },
        protocol: crate::design::DesignOverrides {
            epsilon: Some(case.epsilon(mode)),
            rho: None,
        },
        sim: SimConfig {
            k_max: DEMO_K_MAX,
            initial_states: default_initial_states(agents, 3),
            exosystem: vec![1.0, 0.5, -0.5],
        },
        output: OutputConfig {
            directory: format!("out/{}", case.name(mode)),
            emit_plot_data: true,
        },
    }
}

/// The bundled TOML fixture for a case, as shipped in `fixtures/`.
pub fn bundled_fixture(case: DemoCase, mode: CouplingMode) -> &'static str {
    use CouplingMode::{Full, Partial};
    match (case, mode) {
        (DemoCase::One, Full) => include_str!("../fixtures/case1_full.toml"),
        (DemoCase::One, Partial) => include_str!("../fixtures/case1_partial.toml"),
        (DemoCase::Two, Full) => include_str!("../fixtures/case2_full.toml"),
        (DemoCase::Two, Partial) => include_str!("../fixtures/case2_partial.toml"),
        (DemoCase::Three, Full) => include_str!("../fixtures/case3_full.toml"),
        (DemoCase::Three, Partial) => include_str!("../fixtures/case3_partial.toml"),
    }
}
