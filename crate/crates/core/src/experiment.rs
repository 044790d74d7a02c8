//! Experiment configuration, figure presets and the result table they produce.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{ancilla_excited, measure_ancilla, Engine};
use crate::error::{Error, Result};
use crate::noise::{DeviceParams, NoiseModel};
use crate::oracle::statevector_segments;
use crate::par::{self, Execution};
use crate::protocol::{data_correlations, RoundResult, Simulation};
use crate::qops::{data_state, fidelity, phi_plus, psi_plus, DensityMatrix, PureState, DIM};
use crate::schedule::{
    compile_experiment, cycle_pattern, Basis, CompileOptions, Experiment, Mode, Segment, Target, Timing,
};
use crate::tomography::{self, exact_pauli_set, PauliSet};

/// Named experiments, one per figure panel, plus a free-form sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    /// Three-qubit state just before the first ancilla readout.
    Fig3a,
    /// Data-qubit states conditioned on the first parity outcome.
    Fig3bc,
    /// One ZZ round with feedback.
    Fig3d,
    /// One ZZ and one XX round with feedback.
    Fig3e,
    /// Repeated ZZ rounds with feedback.
    Fig4Zz,
    /// Alternating ZZ/XX rounds with feedback.
    #[default]
    Fig4Alt,
    /// Repeated ZZ rounds with Pauli frame updates.
    Fig9Zz,
    /// Alternating ZZ/XX rounds with Pauli frame updates.
    Fig9Alt,
    Custom,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 9] = [
        ExperimentName::Fig3a,
        ExperimentName::Fig3bc,
        ExperimentName::Fig3d,
        ExperimentName::Fig3e,
        ExperimentName::Fig4Zz,
        ExperimentName::Fig4Alt,
        ExperimentName::Fig9Zz,
        ExperimentName::Fig9Alt,
        ExperimentName::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Fig3a => "fig3a",
            ExperimentName::Fig3bc => "fig3bc",
            ExperimentName::Fig3d => "fig3d",
            ExperimentName::Fig3e => "fig3e",
            ExperimentName::Fig4Zz => "fig4_zz",
            ExperimentName::Fig4Alt => "fig4_alt",
            ExperimentName::Fig9Zz => "fig9_zz",
            ExperimentName::Fig9Alt => "fig9_alt",
            ExperimentName::Custom => "custom",
        }
    }

    /// Default `(pattern, mode, rounds)`; `None` for the single-shot state characterizations.
    pub fn preset(self) -> Option<(Vec<Basis>, Mode, usize)> {
        use Basis::{XX, ZZ};
        match self {
            ExperimentName::Fig3a | ExperimentName::Fig3bc | ExperimentName::Custom => None,
            ExperimentName::Fig3d => Some((vec![ZZ], Mode::Feedback, 1)),
            ExperimentName::Fig3e => Some((vec![ZZ, XX], Mode::Feedback, 2)),
            ExperimentName::Fig4Zz => Some((vec![ZZ], Mode::Feedback, 12)),
            ExperimentName::Fig4Alt => Some((vec![ZZ, XX], Mode::Feedback, 12)),
            ExperimentName::Fig9Zz => Some((vec![ZZ], Mode::Pfu, 12)),
            ExperimentName::Fig9Alt => Some((vec![ZZ, XX], Mode::Pfu, 12)),
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Overrides the preset round count.
    pub rounds: Option<usize>,
    /// Overrides the preset mode.
    pub mode: Option<Mode>,
    /// Tomography shots per measurement setting; 0 uses exact expectation values.
    pub shots: u64,
    pub seed: u64,
    pub target: Target,
    /// Parity pattern for `custom`, cycled to `rounds`.
    pub sequence: Vec<Basis>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: ExperimentName::default(),
            rounds: None,
            mode: None,
            shots: 0,
            seed: 0,
            target: Target::PhiPlus,
            sequence: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidInput(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Everything needed to run one experiment. Missing keys take the device defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub device: DeviceParams,
    pub timing: Timing,
    pub experiment: ExperimentSpec,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.timing.validate()?;
        if self.experiment.rounds == Some(0) {
            return Err(Error::param("experiment.rounds", "must be >= 1"));
        }
        if self.experiment.name == ExperimentName::Custom && self.experiment.sequence.is_empty() {
            return Err(Error::param("experiment.sequence", "custom experiments need a parity sequence"));
        }
        Ok(())
    }

    /// Pattern, mode and round count after applying overrides to the preset.
    pub fn schedule_plan(&self) -> (Vec<Basis>, Mode, usize) {
        let spec = &self.experiment;
        let (pattern, mode, rounds) = spec.name.preset().unwrap_or_else(|| match spec.name {
            ExperimentName::Custom => (spec.sequence.clone(), Mode::Feedback, spec.sequence.len()),
            _ => (vec![Basis::ZZ], Mode::Feedback, 1),
        });
        (pattern, spec.mode.unwrap_or(mode), spec.rounds.unwrap_or(rounds))
    }

    pub fn simulation(&self) -> Result<Simulation> {
        Simulation::new(
            self.device.clone(),
            self.timing.clone(),
            CompileOptions {
                target: self.experiment.target,
                zero_angles: false,
            },
        )
    }

    /// Compiled schedule for this configuration.
    pub fn compiled(&self) -> Result<Experiment> {
        let (pattern, mode, rounds) = self.schedule_plan();
        let sim = self.simulation()?;
        compile_experiment(&cycle_pattern(&pattern, rounds), mode, &sim.timing, &sim.options)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

/// One row of output: a completed round, or a characterized state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub basis: String,
    pub mode: String,
    pub fidelity: f64,
    pub exp_zz: f64,
    pub exp_xx: f64,
    pub exp_yy: f64,
    pub p_plus: f64,
    pub ancilla_excited: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pauli_set: Option<PauliSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub experiment: ExperimentName,
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: [&str; 9] = [
    "N",
    "basis",
    "mode",
    "fidelity",
    "exp_zz",
    "exp_xx",
    "exp_yy",
    "p_plus",
    "ancilla_excited",
];

/// Estimated state: exact, or reconstructed from finite-shot tomography.
struct Characterized {
    state: DensityMatrix,
    pauli: PauliSet,
}

fn characterize(rho: &DensityMatrix, model: &NoiseModel, shots: u64, seed: u64) -> Result<Characterized> {
    if shots == 0 {
        return Ok(Characterized {
            state: rho.clone(),
            pauli: exact_pauli_set(rho)?,
        });
    }
    let assignment = if rho.dim() == DIM {
        tomography::matrix_rows(&model.measurement.assignment3)
    } else {
        tomography::matrix_rows(&model.measurement.assignment_data(&model.params))
    };
    let pauli = tomography::estimate_pauli_set(rho, shots, &assignment, seed)?;
    let state = tomography::mle_reconstruct(&pauli)?;
    Ok(Characterized { state, pauli })
}

fn row_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add((row as u64).wrapping_mul(1_000_003))
}

#[allow(clippy::too_many_arguments)]
fn data_row(
    n: usize,
    basis: Basis,
    mode: &str,
    data: &DensityMatrix,
    reference: &PureState,
    p_plus: f64,
    ancilla: f64,
    model: &NoiseModel,
    spec: &ExperimentSpec,
) -> Result<ResultRow> {
    let est = characterize(data, model, spec.shots, row_seed(spec.seed, n))?;
    let (exp_zz, exp_xx, exp_yy) = data_correlations(&est.state);
    Ok(ResultRow {
        n,
        basis: basis.to_string(),
        mode: mode.to_string(),
        fidelity: fidelity(&est.state, reference)?,
        exp_zz,
        exp_xx,
        exp_yy,
        p_plus,
        ancilla_excited: ancilla,
        pauli_set: Some(est.pauli),
    })
}

/// Noiseless image of `|000⟩` under the preparation and the first ZZ mapping block.
pub fn ideal_mapped_state(sim: &Simulation) -> Result<PureState> {
    let round = sim.round(Basis::ZZ, Mode::Feedback)?;
    let (pre, _) = round.split_at_measurement();
    let segments: Vec<Segment> = sim.preparation().into_iter().chain(pre.iter().cloned()).collect();
    let (psi, _) = statevector_segments(&PureState::basis(DIM, 0), &segments, &[], &DeviceParams::noiseless())?;
    Ok(psi)
}

fn run_fig3a(sim: &Simulation, spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let rho = sim.pre_measurement_state()?;
    let ideal = ideal_mapped_state(sim)?;
    let est = characterize(&rho, &sim.model, spec.shots, row_seed(spec.seed, 0))?;
    let (exp_zz, exp_xx, exp_yy) = data_correlations(&data_state(&est.state));
    let p_plus = measure_ancilla(&rho, &sim.model.measurement)?.p_plus;
    Ok(vec![ResultRow {
        n: 0,
        basis: Basis::ZZ.to_string(),
        mode: "pre_measurement".into(),
        fidelity: fidelity(&est.state, &ideal)?,
        exp_zz,
        exp_xx,
        exp_yy,
        p_plus,
        ancilla_excited: ancilla_excited(&rho),
        pauli_set: Some(est.pauli),
    }])
}

fn run_fig3bc(sim: &Simulation, spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let states = sim.conditioned_states()?;
    let mut even = data_row(
        1,
        Basis::ZZ,
        "cond_plus",
        &states.even,
        &phi_plus(),
        states.p_plus,
        0.0,
        &sim.model,
        spec,
    )?;
    let odd_spec = ExperimentSpec {
        seed: row_seed(spec.seed, 7),
        ..spec.clone()
    };
    let mut odd = data_row(
        1,
        Basis::ZZ,
        "cond_minus",
        &states.odd,
        &psi_plus(),
        states.p_minus,
        1.0,
        &sim.model,
        &odd_spec,
    )?;
    // Ancilla population is fixed by the conditioning itself.
    even.ancilla_excited = 0.0;
    odd.ancilla_excited = 1.0;
    Ok(vec![even, odd])
}

fn rows_from_rounds(results: &[RoundResult], sim: &Simulation, spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let target = spec.target.state();
    results
        .iter()
        .map(|r| {
            data_row(
                r.round,
                r.basis,
                &r.mode.to_string(),
                &r.data,
                &target,
                r.p_plus,
                r.ancilla_excited,
                &sim.model,
                spec,
            )
        })
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let sim = config.simulation()?;
    let spec = &config.experiment;
    let rows = match spec.name {
        ExperimentName::Fig3a => run_fig3a(&sim, spec)?,
        ExperimentName::Fig3bc => run_fig3bc(&sim, spec)?,
        _ => {
            let (pattern, mode, rounds) = config.schedule_plan();
            let mut engine = Engine::new(&sim.model);
            let prepared = sim.prepared_state(&mut engine)?;
            let results = sim.run_from(&mut engine, prepared, &pattern, mode, rounds)?;
            rows_from_rounds(&results, &sim, spec)?
        }
    };
    Ok(ResultTable {
        experiment: spec.name,
        rows,
    })
}

/// Run independent configurations, concurrently when `exec` allows.
pub fn sweep(configs: Vec<ExperimentConfig>, exec: Execution) -> Vec<Result<ResultTable>> {
    par::map_with(exec, configs, |c| run_experiment(&c))
}
