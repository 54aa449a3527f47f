//! Scenario configuration: a TOML document describing the agent model, the
//! coupling mode, the graph, the delays, optional design overrides and the
//! simulation setup.
//!
//! ```toml
//! mode = "full"                  # or "partial"
//!
//! [model]
//! a = [[0.5, 1.0], [0.0, 1.0]]   # matrices are arrays of rows
//! b = [[0.0], [1.0]]
//! c = [[1.0, 0.0], [0.0, 1.0]]   # must be the identity in full mode
//!
//! [graph]
//! adjacency = [[0.0, 0.0], [1.0, 0.0]]  # a_ij > 0: agent i listens to agent j
//! roots = [1]                           # 1-based agent ids seeing the exosystem
//!
//! [delays]
//! kappa = [0, 1]
//! kappa_bar = 1                  # design bound, >= every kappa
//!
//! [protocol]                     # optional
//! epsilon = 0.001
//! rho = 1.05
//!
//! [sim]
//! k_max = 2000
//! initial_states = [[1.0, 0.0], [0.0, -1.0]]
//! exosystem = [0.5, 0.5]
//!
//! [output]
//! directory = "out"
//! emit_plot_data = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{design_protocol, AgentModel, CouplingMode, DesignOverrides, ProtocolDesign};
use crate::dynamics::{simulate, DelayProfile, InitialConditions, Trajectory, Vector};
use crate::error::{Error, Result};
use crate::network::CommGraph;
use crate::spectral::RealMatrix;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub adjacency: Rows,
    pub roots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    pub kappa: Vec<u32>,
    pub kappa_bar: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub k_max: usize,
    pub initial_states: Rows,
    pub exosystem: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    #[serde(default)]
    pub emit_plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            emit_plot_data: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: CouplingMode,
    pub model: ModelConfig,
    pub graph: GraphConfig,
    pub delays: DelayConfig,
    #[serde(default)]
    pub protocol: DesignOverrides,
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn shape_of(rows: &Rows) -> Option<(usize, usize)> {
    let cols = rows.first()?.len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some((rows.len(), cols))
}

pub fn matrix_from_rows(rows: &Rows) -> RealMatrix {
    let (r, c) = shape_of(rows).unwrap_or((0, 0));
    RealMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn rows_from_matrix(m: &RealMatrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn matrix(&mut self, field: &str, rows: &Rows) -> Option<(usize, usize)> {
        let Some(shape) = shape_of(rows) else {
            self.errors.push(format!("{field}: must be a non-empty array of equal-length rows"));
            return None;
        };
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            self.errors.push(format!("{field}: entries must be finite"));
        }
        Some(shape)
    }

    fn fail(&mut self, msg: String) {
        self.errors.push(msg);
    }
}

impl ScenarioConfig {
    /// Check every invariant, reporting all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut v = Validator { errors: Vec::new() };

        let a = v.matrix("model.a", &self.model.a);
        let b = v.matrix("model.b", &self.model.b);
        let c = v.matrix("model.c", &self.model.c);
        let mut n = None;
        if let Some((r, cols)) = a {
            if r != cols {
                v.fail(format!("model.a: must be square, got {r}x{cols}"));
            } else {
                n = Some(r);
            }
        }
        if let (Some(n), Some((br, _))) = (n, b) {
            if br != n {
                v.fail(format!("model.b: has {br} rows but model.a is {n}x{n}"));
            }
        }
        if let (Some(n), Some((_, cc))) = (n, c) {
            if cc != n {
                v.fail(format!("model.c: has {cc} columns but model.a is {n}x{n}"));
            } else if self.mode == CouplingMode::Full && matrix_from_rows(&self.model.c) != RealMatrix::identity(n, n) {
                v.fail("model.c: full-state coupling requires C to be the identity".into());
            }
        }

        let mut agents = None;
        if let Some((r, cols)) = v.matrix("graph.adjacency", &self.graph.adjacency) {
            if r != cols {
                v.fail(format!("graph.adjacency: must be square, got {r}x{cols}"));
            } else {
                agents = Some(r);
                for (i, row) in self.graph.adjacency.iter().enumerate() {
                    for (j, &w) in row.iter().enumerate() {
                        if w < 0.0 {
                            v.fail(format!("graph.adjacency[{i}][{j}]: weight {w} is negative"));
                        }
                        if i == j && w != 0.0 {
                            v.fail(format!("graph.adjacency[{i}][{i}]: self-loops are not allowed"));
                        }
                    }
                }
            }
        }
        if self.graph.roots.is_empty() {
            v.fail("graph.roots: at least one root agent is required".into());
        }
        if let Some(agents) = agents {
            for &r in &self.graph.roots {
                if r == 0 || r > agents {
                    v.fail(format!("graph.roots: agent id {r} outside 1..={agents}"));
                }
            }
            if self.delays.kappa.len() != agents {
                v.fail(format!(
                    "delays.kappa: has {} entries but graph.adjacency has order {agents}",
                    self.delays.kappa.len()
                ));
            }
            if self.sim.initial_states.len() != agents {
                v.fail(format!(
                    "sim.initial_states: has {} agents but graph.adjacency has order {agents}",
                    self.sim.initial_states.len()
                ));
            }
        }
        if let Some(&worst) = self.delays.kappa.iter().max() {
            if worst > self.delays.kappa_bar {
                v.fail(format!("delays.kappa_bar: {} is below the largest delay {worst}", self.delays.kappa_bar));
            }
        }
        if let Some(n) = n {
            for (i, x) in self.sim.initial_states.iter().enumerate() {
                if x.len() != n {
                    v.fail(format!("sim.initial_states[{i}]: has dimension {} but the state dimension is {n}", x.len()));
                }
            }
            if self.sim.exosystem.len() != n {
                v.fail(format!("sim.exosystem: has dimension {} but the state dimension is {n}", self.sim.exosystem.len()));
            }
        }
        if self.sim.initial_states.iter().flatten().chain(&self.sim.exosystem).any(|x| !x.is_finite()) {
            v.fail("sim: initial states must be finite".into());
        }
        if self.sim.k_max == 0 {
            v.fail("sim.k_max: must be at least 1".into());
        }
        if let Some(eps) = self.protocol.epsilon {
            if !(eps > 0.0 && eps <= 1.0) {
                v.fail(format!("protocol.epsilon: {eps} outside (0, 1]"));
            }
        }
        if let Some(rho) = self.protocol.rho {
            if !(rho.is_finite() && rho > 0.0) {
                v.fail(format!("protocol.rho: {rho} must be positive"));
            }
        }

        if v.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v.errors))
        }
    }

    pub fn agents(&self) -> usize {
        self.graph.adjacency.len()
    }

    pub fn model(&self) -> Result<AgentModel> {
        AgentModel::new(
            matrix_from_rows(&self.model.a),
            matrix_from_rows(&self.model.b),
            matrix_from_rows(&self.model.c),
        )
    }

    pub fn graph(&self) -> Result<CommGraph> {
        let n = self.agents();
        let mut flags = vec![false; n];
        for &r in &self.graph.roots {
            if r == 0 || r > n {
                return Err(Error::Scenario(format!("root id {r} outside 1..={n}")));
            }
            flags[r - 1] = true;
        }
        CommGraph::new(matrix_from_rows(&self.graph.adjacency), flags)
    }

    pub fn delays(&self) -> DelayProfile {
        DelayProfile::new(self.delays.kappa.clone())
    }

    pub fn initial_conditions(&self) -> InitialConditions {
        InitialConditions {
            x0: self.sim.initial_states.iter().map(|x| Vector::from_column_slice(x)).collect(),
            xr0: Vector::from_column_slice(&self.sim.exosystem),
            ..Default::default()
        }
    }

    /// Design from the model, the coupling mode and `delays.kappa_bar`.
    pub fn design(&self) -> Result<ProtocolDesign> {
        design_protocol(&self.model()?, self.delays.kappa_bar, self.mode, self.protocol)
    }

    pub fn simulate(&self, design: &ProtocolDesign) -> Result<Trajectory> {
        self.simulate_for(design, self.sim.k_max)
    }

    pub fn simulate_for(&self, design: &ProtocolDesign, k_max: usize) -> Result<Trajectory> {
        simulate(
            &self.model()?,
            design,
            &self.graph()?,
            &self.delays(),
            &self.initial_conditions(),
            k_max,
        )
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_config(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))
}
