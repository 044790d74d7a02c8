//! Density-matrix simulation of repeated ancilla-based parity measurements
//! stabilizing a two-qubit Bell state, with feedback or Pauli-frame updating.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod noise;
pub mod oracle;
pub mod par;
pub mod protocol;
pub mod qops;
pub mod schedule;
pub mod tomography;

pub use error::{Error, Result};
pub use experiment::{load_config, run_experiment, ExperimentConfig, ResultTable};
pub use noise::{DeviceParams, NoiseModel};
pub use protocol::{RoundResult, Simulation};
pub use schedule::{Basis, Mode, Target, Timing};
