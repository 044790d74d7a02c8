//! Repeated parity stabilization in real-time feedback or Pauli-frame-updating mode.

use std::fmt;

use serde::Serialize;

use crate::engine::{ancilla_excited, merge_by_frame, Branch, Engine};
use crate::error::{Error, Result};
use crate::noise::{DeviceParams, NoiseModel};
use crate::qops::{
    data_state, embed_single, expectation, fidelity, pauli_product, r, sigma_x, sigma_z, CMatrix,
    DensityMatrix, Pauli, Site,
};
use crate::schedule::{
    compile_parity_round, compile_preparation, cycle_pattern, Basis, CompileOptions, Mode, Outcome,
    Round, Segment, Timing,
};

/// Classical Pauli frame `X^x Z^z` on D2 applied to the tomography operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct PauliFrame {
    pub x: bool,
    pub z: bool,
}

impl PauliFrame {
    pub const IDENTITY: PauliFrame = PauliFrame { x: false, z: false };

    /// Group product modulo phase.
    pub fn compose(self, other: PauliFrame) -> PauliFrame {
        PauliFrame {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    /// 8x8 operator `X^x Z^z` on D2.
    pub fn operator(self) -> CMatrix {
        let mut m = CMatrix::identity(2, 2);
        if self.z {
            m = sigma_z() * m;
        }
        if self.x {
            m = sigma_x() * m;
        }
        embed_single(&m, Site::D2).unwrap()
    }

    /// State as seen through the frame: `P ρ P†`.
    pub fn apply(self, rho: &DensityMatrix) -> DensityMatrix {
        if self == PauliFrame::IDENTITY {
            return rho.clone();
        }
        rho.conjugate_by(&self.operator())
    }
}

impl fmt::Display for PauliFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match (self.x, self.z) {
            (false, false) => "I",
            (true, false) => "X",
            (false, true) => "Z",
            (true, true) => "XZ",
        })
    }
}

/// Probability-weighted states keyed by their D2 Pauli frame (at most four).
#[derive(Debug, Clone)]
pub struct FrameEnsemble {
    pub branches: Vec<Branch>,
}

impl FrameEnsemble {
    pub fn single(state: DensityMatrix) -> FrameEnsemble {
        FrameEnsemble {
            branches: vec![Branch::root(state)],
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    /// Raw unconditional state `Σ w ρ`, ignoring frames.
    pub fn raw_state(&self) -> DensityMatrix {
        let m = self
            .branches
            .iter()
            .fold(CMatrix::zeros(8, 8), |acc, b| acc + b.state.scaled(b.weight));
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// Frame-corrected state `Σ w P ρ P†`; observables on it equal the
    /// weight-averaged frame-rotated observables of each branch.
    pub fn corrected_state(&self) -> DensityMatrix {
        let m = self.branches.iter().fold(CMatrix::zeros(8, 8), |acc, b| {
            acc + b.frame.apply(&b.state).scaled(b.weight)
        });
        DensityMatrix::from_matrix_unchecked(m)
    }
}

/// Observables after one round.
#[derive(Debug, Clone)]
pub struct RoundResult {
    /// 1-based round index.
    pub round: usize,
    pub basis: Basis,
    pub mode: Mode,
    pub ensemble: FrameEnsemble,
    /// Frame-corrected three-qubit state.
    pub state: DensityMatrix,
    /// Frame-corrected `D1 ⊗ D2` state.
    pub data: DensityMatrix,
    pub fidelity: f64,
    pub exp_zz: f64,
    pub exp_xx: f64,
    pub exp_yy: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    /// Ancilla excited population just before the conditional pulse.
    pub ancilla_excited: f64,
}

/// Data-qubit correlations `⟨ZZ⟩, ⟨XX⟩, ⟨YY⟩`.
pub fn data_correlations(data: &DensityMatrix) -> (f64, f64, f64) {
    let e = |p: Pauli| expectation(data, &pauli_product(&[p, p])).unwrap();
    (e(Pauli::Z), e(Pauli::X), e(Pauli::Y))
}

/// Two data-qubit states conditioned on the ancilla outcome at measurement time.
#[derive(Debug, Clone)]
pub struct ConditionedStates {
    pub p_plus: f64,
    pub p_minus: f64,
    pub even: DensityMatrix,
    pub odd: DensityMatrix,
}

/// A configured device, timing and compile options, ready to run protocols.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: NoiseModel,
    pub timing: Timing,
    pub options: CompileOptions,
}

impl Simulation {
    pub fn new(params: DeviceParams, timing: Timing, options: CompileOptions) -> Result<Self> {
        timing.validate()?;
        Ok(Simulation {
            model: NoiseModel::new(params)?,
            timing,
            options,
        })
    }

    /// Characterized device with default timing.
    pub fn device_default() -> Simulation {
        Simulation::new(DeviceParams::default(), Timing::default(), CompileOptions::default())
            .expect("default parameters are valid")
    }

    pub fn noiseless() -> Simulation {
        Simulation::new(DeviceParams::noiseless(), Timing::default(), CompileOptions::default())
            .expect("noiseless parameters are valid")
    }

    pub fn preparation(&self) -> Vec<Segment> {
        compile_preparation(&self.timing, &self.options)
    }

    pub fn round(&self, basis: Basis, mode: Mode) -> Result<Round> {
        compile_parity_round(basis, mode, &self.timing, &self.options)
    }

    /// `|000⟩` after the preparation pulses.
    pub fn prepared_state(&self, engine: &mut Engine<'_>) -> Result<DensityMatrix> {
        engine.run_segments(&DensityMatrix::ground(), &self.preparation())
    }

    /// Three-qubit state right before the first ancilla readout.
    pub fn pre_measurement_state(&self) -> Result<DensityMatrix> {
        let mut engine = Engine::new(&self.model);
        let prepared = self.prepared_state(&mut engine)?;
        self.map_parity(&mut engine, &prepared, Basis::ZZ)
    }

    fn map_parity(
        &self,
        engine: &mut Engine<'_>,
        rho: &DensityMatrix,
        basis: Basis,
    ) -> Result<DensityMatrix> {
        let round = self.round(basis, Mode::Feedback)?;
        let (pre, _) = round.split_at_measurement();
        engine.run_segments(rho, pre)
    }

    /// Data states conditioned on the first ZZ outcome, from the prepared state.
    pub fn conditioned_states(&self) -> Result<ConditionedStates> {
        project_conditioned_states(&self.pre_measurement_state()?, &self.model)
    }

    /// Conditioned data states for an arbitrary `D1 ⊗ D2` input with the ancilla in `|0⟩`.
    pub fn conditioned_from_data(&self, data: &DensityMatrix) -> Result<ConditionedStates> {
        let rho = embed_data_state(data)?;
        let mut engine = Engine::new(&self.model);
        let mapped = self.map_parity(&mut engine, &rho, Basis::ZZ)?;
        project_conditioned_states(&mapped, &self.model)
    }

    /// Prepare, then run `rounds` rounds cycling through `pattern`.
    pub fn run(&self, pattern: &[Basis], mode: Mode, rounds: usize) -> Result<Vec<RoundResult>> {
        let mut engine = Engine::new(&self.model);
        let prepared = self.prepared_state(&mut engine)?;
        self.run_from(&mut engine, prepared, pattern, mode, rounds)
    }

    pub fn run_from(
        &self,
        engine: &mut Engine<'_>,
        initial: DensityMatrix,
        pattern: &[Basis],
        mode: Mode,
        rounds: usize,
    ) -> Result<Vec<RoundResult>> {
        if rounds == 0 || pattern.is_empty() {
            return Err(Error::InvalidInput("need at least one round".into()));
        }
        let mut ensemble = FrameEnsemble::single(initial);
        let mut results = Vec::with_capacity(rounds);
        for (i, basis) in cycle_pattern(pattern, rounds).into_iter().enumerate() {
            let round = self.round(basis, mode)?;
            let (next, result) = self
                .run_round(engine, &round, ensemble, i + 1)
                .map_err(|e| Error::InRound {
                    round: i + 1,
                    source: Box::new(e),
                })?;
            ensemble = next;
            results.push(result);
        }
        Ok(results)
    }

    /// One round on a frame ensemble.
    pub fn run_round(
        &self,
        engine: &mut Engine<'_>,
        round: &Round,
        ensemble: FrameEnsemble,
        index: usize,
    ) -> Result<(FrameEnsemble, RoundResult)> {
        let (pre, post) = round.split_at_measurement();
        let mut branches = ensemble.branches;
        for seg in pre {
            branches = engine.step_branches(branches, seg)?;
        }
        let (mut branches, p_plus, p_minus) = engine.measure_branches(branches)?;
        let (conditional, delay) = post.split_last().expect("round ends with a conditional pulse");
        for seg in delay {
            branches = engine.step_branches(branches, seg)?;
        }
        let excited: f64 = branches
            .iter()
            .map(|b| b.weight * ancilla_excited(&b.state))
            .sum();
        branches = engine.step_branches(branches, conditional)?;

        if round.mode == Mode::Pfu {
            let desired = self.options.target.desired(round.basis);
            for b in &mut branches {
                let flipped = b.last_outcome() != Some(desired);
                match round.basis {
                    Basis::ZZ => b.frame.x = flipped,
                    Basis::XX => b.frame.z = flipped,
                }
            }
        }
        let ensemble = FrameEnsemble {
            branches: merge_by_frame(branches),
        };
        let weight = ensemble.total_weight();
        if (weight - 1.0).abs() > 1e-9 {
            return Err(Error::Measurement(format!("branch weights sum to {weight}")));
        }

        let state = ensemble.corrected_state();
        let data = data_state(&state);
        let (exp_zz, exp_xx, exp_yy) = data_correlations(&data);
        let result = RoundResult {
            round: index,
            basis: round.basis,
            mode: round.mode,
            fidelity: fidelity(&data, &self.options.target.state())?,
            exp_zz,
            exp_xx,
            exp_yy,
            p_plus,
            p_minus,
            ancilla_excited: excited,
            data,
            state,
            ensemble: ensemble.clone(),
        };
        Ok((ensemble, result))
    }
}

/// `ρ_data ⊗ |0⟩⟨0|_A` in `D1 ⊗ A ⊗ D2` order.
pub fn embed_data_state(data: &DensityMatrix) -> Result<DensityMatrix> {
    if data.dim() != 4 {
        return Err(Error::InvalidInput("data state must be 4x4".into()));
    }
    let mut m = CMatrix::zeros(8, 8);
    let idx = |k: usize| 4 * (k >> 1) + (k & 1);
    for i in 0..4 {
        for j in 0..4 {
            m[(idx(i), idx(j))] = data.matrix()[(i, j)];
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Ancilla POVM on a three-qubit state at measurement time, followed by tracing out the ancilla.
pub fn project_conditioned_states(
    state: &DensityMatrix,
    model: &NoiseModel,
) -> Result<ConditionedStates> {
    let m = crate::engine::measure_ancilla(state, &model.measurement)?;
    let branch = |o: Outcome| -> Result<DensityMatrix> {
        m.state(o)
            .map(data_state)
            .ok_or_else(|| Error::Measurement(format!("outcome {o:?} has zero probability")))
    };
    Ok(ConditionedStates {
        p_plus: m.p_plus,
        p_minus: m.p_minus,
        even: branch(Outcome::Plus)?,
        odd: branch(Outcome::Minus)?,
    })
}

/// Feedback-mode run with the given device parameters and default timing.
pub fn run_feedback(pattern: &[Basis], params: &DeviceParams, rounds: usize) -> Result<Vec<RoundResult>> {
    Simulation::new(params.clone(), Timing::default(), CompileOptions::default())?
        .run(pattern, Mode::Feedback, rounds)
}

/// Pauli-frame-updating run with the given device parameters and default timing.
pub fn run_pfu(pattern: &[Basis], params: &DeviceParams, rounds: usize) -> Result<Vec<RoundResult>> {
    Simulation::new(params.clone(), Timing::default(), CompileOptions::default())?
        .run(pattern, Mode::Pfu, rounds)
}

/// Uniform mixture of the four data-qubit computational states.
pub fn mixed_data_state() -> DensityMatrix {
    DensityMatrix::from_matrix_unchecked(CMatrix::identity(4, 4) * r(0.25))
}
