//! Scale-free regulated state synchronization for discrete-time multi-agent
//! systems with unknown, non-uniform input delays.
//!
//! [`design`] builds a protocol from the agent model and a delay bound alone,
//! [`dynamics`] simulates it over any rooted directed graph, and [`verify`]
//! certifies the delayed closed loop in the frequency domain.

pub mod demos;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod network;
pub mod riccati;
pub mod scenario;
pub mod spectral;
pub mod verify;

pub use design::{design_protocol, AgentModel, CouplingMode, DesignOverrides, ProtocolDesign};
pub use dynamics::{simulate, DelayProfile, InitialConditions, Trajectory};
pub use error::{Error, Result};
pub use network::{CommGraph, NetworkMatrices};
pub use riccati::{DareSolution, GainDisc};
pub use scenario::{load_config, parse_config, write_config, ScenarioConfig};
pub use spectral::{ComplexMatrix, RealMatrix, Spectrum};
pub use verify::{CertificateReport, ConvergenceReport};
