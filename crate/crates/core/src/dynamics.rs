//! Closed-loop simulation of the agents, the exosystem and the protocol.
//!
//! Every step is a synchronous sweep: all measurements and exchanges are
//! formed from the time-`k` snapshot before any state is advanced.

use nalgebra::DVector;

use crate::design::{AgentModel, CouplingMode, ProtocolDesign};
use crate::error::{Error, Result};
use crate::network::{is_rooted, CommGraph};
use crate::spectral::RealMatrix;

pub type Vector = DVector<f64>;

/// Constant per-agent input delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayProfile {
    kappa: Vec<u32>,
}

impl DelayProfile {
    pub fn new(kappa: Vec<u32>) -> Self {
        DelayProfile { kappa }
    }

    pub fn uniform(n: usize, kappa: u32) -> Self {
        DelayProfile { kappa: vec![kappa; n] }
    }

    pub fn kappa(&self) -> &[u32] {
        &self.kappa
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn kappa_bar(&self) -> u32 {
        self.kappa.iter().copied().max().unwrap_or(0)
    }
}

/// Ring buffer of one agent's last `capacity` inputs.
#[derive(Debug, Clone)]
pub struct InputHistory {
    slots: Vec<Vector>,
    /// Index of the most recent input, `u(k − 1)`.
    head: usize,
}

impl InputHistory {
    /// `past[d - 1]` is `u(−d)`; missing entries are zero.
    pub fn new(capacity: usize, m: usize, past: &[Vector]) -> Self {
        let mut slots = vec![Vector::zeros(m); capacity];
        // Newest first: slot head holds u(-1), head-1 holds u(-2), ...
        let head = capacity.saturating_sub(1);
        for (d, u) in past.iter().take(capacity).enumerate() {
            let idx = (head + capacity - d) % capacity.max(1);
            slots[idx] = u.clone();
        }
        InputHistory { slots, head }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// `u(k − delay)` given the current input `u(k)`.
    pub fn delayed<'a>(&'a self, current: &'a Vector, delay: u32) -> &'a Vector {
        let d = delay as usize;
        if d == 0 {
            return current;
        }
        assert!(d <= self.slots.len(), "delay {d} exceeds history capacity {}", self.slots.len());
        let cap = self.slots.len();
        &self.slots[(self.head + cap + 1 - d) % cap]
    }

    /// Record `u(k)`, shifting the window by one step.
    pub fn push(&mut self, u: Vector) {
        if self.slots.is_empty() {
            return;
        }
        self.head = (self.head + 1) % self.slots.len();
        self.slots[self.head] = u;
    }
}

/// Agent state plus protocol internals.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub x: Vector,
    pub chi: Vector,
    /// Observer state, partial-state coupling only.
    pub xhat: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialConditions {
    pub x0: Vec<Vector>,
    /// Protocol states; zero when absent.
    pub chi0: Option<Vec<Vector>>,
    /// Observer states; zero when absent.
    pub xhat0: Option<Vec<Vector>>,
    /// `past_inputs[i][d - 1] = u_i(−d)`; zero when absent.
    pub past_inputs: Option<Vec<Vec<Vector>>>,
    pub xr0: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nodes: Vec<NodeState>,
    /// `u_i(k)` as computed by each protocol at this step.
    pub inputs: Vec<Vector>,
    pub exo: Vector,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Snapshot>,
}

impl Trajectory {
    pub fn k_max(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn agents(&self) -> usize {
        self.steps.first().map_or(0, |s| s.nodes.len())
    }

    pub fn errors(&self) -> Vec<f64> {
        sync_error(self)
    }
}

/// `e(k) = max_i ‖x_i(k) − x_r(k)‖₂`.
pub fn sync_error(traj: &Trajectory) -> Vec<f64> {
    traj.steps.iter().map(|s| s.error).collect()
}

fn max_deviation(nodes: &[NodeState], xr: &Vector) -> f64 {
    nodes.iter().map(|n| (&n.x - xr).norm()).fold(0.0, f64::max)
}

pub fn exosystem_step(a: &RealMatrix, xr: &Vector) -> Vector {
    a * xr
}

/// `ζ̄_i = (2 + d_in(i))⁻¹ [Σ_j a_ij(y_i − y_j) + ι_i(y_i − y_r)]`.
///
/// Full-state coupling measures `y = x`; partial-state coupling `y = Cx`.
pub fn network_measurement(
    g: &CommGraph,
    mode: CouplingMode,
    c: &RealMatrix,
    states: &[Vector],
    xr: &Vector,
) -> Vec<Vector> {
    let output = |x: &Vector| -> Vector {
        match mode {
            CouplingMode::Full => x.clone(),
            CouplingMode::Partial => c * x,
        }
    };
    let ys: Vec<Vector> = states.iter().map(output).collect();
    let yr = output(xr);
    (0..g.len())
        .map(|i| {
            let mut acc = (&ys[i] - &yr) * g.root_flag(i);
            for (j, yj) in ys.iter().enumerate() {
                let w = g.weight(i, j);
                if w != 0.0 {
                    acc += (&ys[i] - yj) * w;
                }
            }
            acc * g.normalization(i)
        })
        .collect()
}

/// `(2 + d_in(i))⁻¹ Σ_j ℓ̄_ij v_j` for every node.
pub fn expanded_exchange(g: &CommGraph, values: &[Vector]) -> Vec<Vector> {
    (0..g.len())
        .map(|i| {
            let mut acc = &values[i] * (g.in_degree(i) + g.root_flag(i));
            for (j, vj) in values.iter().enumerate() {
                let w = g.weight(i, j);
                if w != 0.0 && j != i {
                    acc -= vj * w;
                }
            }
            acc * g.normalization(i)
        })
        .collect()
}

/// Full-state coupling exchange of protocol states.
pub fn extra_exchange_full(g: &CommGraph, chi: &[Vector]) -> Vec<Vector> {
    expanded_exchange(g, chi)
}

/// Partial-state coupling exchange of protocol states and of each agent's own
/// delayed input.
pub fn extra_exchange_partial(g: &CommGraph, chi: &[Vector], delayed_u: &[Vector]) -> Vec<(Vector, Vector)> {
    expanded_exchange(g, chi)
        .into_iter()
        .zip(expanded_exchange(g, delayed_u))
        .collect()
}

/// `u_i(k) = −ρK_ε χ_i(k)`.
pub fn protocol_input(design: &ProtocolDesign, chi: &Vector) -> Vector {
    -(&design.k * chi) * design.rho
}

/// `χ' = Aχ + Bu(k − κ) + Aζ̄ − Aζ̂`.
pub fn full_state_protocol_step(
    model: &AgentModel,
    design: &ProtocolDesign,
    node: &NodeState,
    zeta_bar: &Vector,
    zeta_hat: &Vector,
    u_delayed: &Vector,
) -> (Vector, Vector) {
    let u = protocol_input(design, &node.chi);
    let chi_next = &model.a * (&node.chi + zeta_bar - zeta_hat) + &model.b * u_delayed;
    (chi_next, u)
}

/// `x̂' = Ax̂ + Bζ̂₂ + F(ζ̄ − Cx̂)`, `χ' = Aχ + Bu(k − κ) + Ax̂ − Aζ̂₁`.
///
/// Returns `(χ', x̂', u)`.
#[allow(clippy::too_many_arguments)]
pub fn partial_state_protocol_step(
    model: &AgentModel,
    design: &ProtocolDesign,
    chi: &Vector,
    xhat: &Vector,
    zeta_bar: &Vector,
    zeta_hat_chi: &Vector,
    zeta_hat_input: &Vector,
    u_delayed: &Vector,
) -> Result<(Vector, Vector, Vector)> {
    let f = design
        .f
        .as_ref()
        .ok_or_else(|| Error::Scenario("partial-state protocol requires an observer gain F".into()))?;
    let u = protocol_input(design, chi);
    let innovation = zeta_bar - &model.c * xhat;
    let xhat_next = &model.a * xhat + &model.b * zeta_hat_input + f * innovation;
    let chi_next = &model.a * (chi + xhat - zeta_hat_chi) + &model.b * u_delayed;
    Ok((chi_next, xhat_next, u))
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Scenario(format!("{what} has {got} entries, expected {want}")));
    }
    Ok(())
}

fn check_dim(what: &str, v: &Vector, want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::Dimension(format!("{what} has dimension {}, expected {want}", v.len())));
    }
    Ok(())
}

/// Run the closed loop for `k_max` steps, returning `k_max + 1` snapshots.
pub fn simulate(
    model: &AgentModel,
    design: &ProtocolDesign,
    g: &CommGraph,
    delays: &DelayProfile,
    initial: &InitialConditions,
    k_max: usize,
) -> Result<Trajectory> {
    let (n, m) = (model.n(), model.m());
    let agents = g.len();
    check_len("delay profile", delays.len(), agents)?;
    check_len("initial states", initial.x0.len(), agents)?;
    if delays.kappa_bar() > design.kappa_bar {
        return Err(Error::Scenario(format!(
            "largest delay {} exceeds the design bound {}",
            delays.kappa_bar(),
            design.kappa_bar
        )));
    }
    if design.k.shape() != (m, n) {
        return Err(Error::Dimension(format!("design gain is {:?}, model needs {m}x{n}", design.k.shape())));
    }
    if !is_rooted(g)? {
        return Err(Error::Scenario("communication graph is not rooted in the root set".into()));
    }
    check_dim("exosystem x_r(0)", &initial.xr0, n)?;
    for (i, x) in initial.x0.iter().enumerate() {
        check_dim(&format!("x_{}(0)", i + 1), x, n)?;
    }
    let partial = design.mode == CouplingMode::Partial;

    let zeros = || vec![Vector::zeros(n); agents];
    let chi0 = initial.chi0.clone().unwrap_or_else(zeros);
    check_len("protocol states", chi0.len(), agents)?;
    let xhat0 = initial.xhat0.clone().unwrap_or_else(zeros);
    check_len("observer states", xhat0.len(), agents)?;
    for (i, (c, h)) in chi0.iter().zip(&xhat0).enumerate() {
        check_dim(&format!("chi_{}(0)", i + 1), c, n)?;
        check_dim(&format!("xhat_{}(0)", i + 1), h, n)?;
    }

    let capacity = delays.kappa_bar() as usize;
    let mut histories: Vec<InputHistory> = (0..agents)
        .map(|i| {
            let past = initial
                .past_inputs
                .as_ref()
                .and_then(|p| p.get(i))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            InputHistory::new(capacity, m, past)
        })
        .collect();
    if let Some(p) = &initial.past_inputs {
        check_len("past inputs", p.len(), agents)?;
        for (i, hist) in p.iter().enumerate() {
            for u in hist {
                check_dim(&format!("past input of agent {}", i + 1), u, m)?;
            }
        }
    }

    let mut nodes: Vec<NodeState> = (0..agents)
        .map(|i| NodeState {
            x: initial.x0[i].clone(),
            chi: chi0[i].clone(),
            xhat: partial.then(|| xhat0[i].clone()),
        })
        .collect();
    let mut xr = initial.xr0.clone();
    let mut steps = Vec::with_capacity(k_max + 1);

    for k in 0..=k_max {
        let inputs: Vec<Vector> = nodes.iter().map(|nd| protocol_input(design, &nd.chi)).collect();
        let error = max_deviation(&nodes, &xr);
        if k == k_max {
            steps.push(Snapshot { nodes, inputs, exo: xr, error });
            break;
        }

        let delayed: Vec<Vector> = (0..agents)
            .map(|i| histories[i].delayed(&inputs[i], delays.kappa()[i]).clone())
            .collect();
        let xs: Vec<Vector> = nodes.iter().map(|nd| nd.x.clone()).collect();
        let chis: Vec<Vector> = nodes.iter().map(|nd| nd.chi.clone()).collect();
        let zeta_bar = network_measurement(g, design.mode, &model.c, &xs, &xr);

        let next: Vec<NodeState> = if partial {
            let exchanges = extra_exchange_partial(g, &chis, &delayed);
            (0..agents)
                .map(|i| {
                    let nd = &nodes[i];
                    let xhat = nd.xhat.as_ref().expect("partial mode carries observer state");
                    let (chi, xhat, _) = partial_state_protocol_step(
                        model,
                        design,
                        &nd.chi,
                        xhat,
                        &zeta_bar[i],
                        &exchanges[i].0,
                        &exchanges[i].1,
                        &delayed[i],
                    )?;
                    Ok(NodeState {
                        x: &model.a * &nd.x + &model.b * &delayed[i],
                        chi,
                        xhat: Some(xhat),
                    })
                })
                .collect::<Result<_>>()?
        } else {
            let zeta_hat = extra_exchange_full(g, &chis);
            (0..agents)
                .map(|i| {
                    let nd = &nodes[i];
                    let (chi, _) = full_state_protocol_step(model, design, nd, &zeta_bar[i], &zeta_hat[i], &delayed[i]);
                    NodeState {
                        x: &model.a * &nd.x + &model.b * &delayed[i],
                        chi,
                        xhat: None,
                    }
                })
                .collect()
        };

        let xr_next = exosystem_step(&model.a, &xr);
        steps.push(Snapshot { nodes, inputs: inputs.clone(), exo: xr, error });
        for (h, u) in histories.iter_mut().zip(inputs) {
            h.push(u);
        }
        nodes = next;
        xr = xr_next;
    }
    Ok(Trajectory { steps })
}
