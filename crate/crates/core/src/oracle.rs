//! Reference solutions independent of the Liouvillian-exponential path: a
//! noiseless state-vector simulator, closed-form single-qubit decay, and a
//! fixed-step Runge-Kutta integrator of the master equation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{decay_rates, stark_compensation, stark_unitary, DeviceParams};
use crate::qops::{c, kron_all, r, CMatrix, CVector, DensityMatrix, PureState, Site, DIM};
use crate::schedule::{Experiment, InstantOp, Outcome, Pair, Rotation, Segment, SegmentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Statevector,
    FixedStep,
}

#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    pub value: T,
    pub provenance: Provenance,
}

impl<T> OracleResult<T> {
    fn new(value: T, provenance: Provenance) -> Self {
        OracleResult { value, provenance }
    }
}

fn rotations_unitary(rots: &[Rotation]) -> CMatrix {
    let mut factors = vec![CMatrix::identity(2, 2); 3];
    for rot in rots {
        let i = rot.site.index();
        factors[i] = rot.unitary_2x2() * &factors[i];
    }
    kron_all(&factors)
}

fn cz_unitary(pair: Pair, phase: f64) -> CMatrix {
    let (a, b) = pair.sites();
    let mut u = CMatrix::identity(DIM, DIM);
    for i in 0..DIM {
        let bit = |s: Site| (i >> (2 - s.index())) & 1;
        if bit(a) == 1 && bit(b) == 1 {
            u[(i, i)] = c(phase.cos(), -phase.sin());
        }
    }
    u
}

/// Ideal unitary of a segment, or `None` for a measurement.
fn segment_unitary(seg: &Segment, outcome: Option<Outcome>, params: &DeviceParams) -> Option<CMatrix> {
    match &seg.kind {
        SegmentKind::Rotation(rots) => Some(rotations_unitary(rots)),
        SegmentKind::Cz { pair, phase } => Some(cz_unitary(*pair, *phase)),
        SegmentKind::Idle => Some(CMatrix::identity(DIM, DIM)),
        SegmentKind::Instant(InstantOp::Rotations(rots)) => Some(rotations_unitary(rots)),
        SegmentKind::Instant(InstantOp::Stark) => Some(stark_unitary(params)),
        SegmentKind::Instant(InstantOp::StarkCompensation) => Some(stark_compensation(params)),
        SegmentKind::ConditionalPulse { .. } => Some(rotations_unitary(seg.rotations(outcome))),
        SegmentKind::MeasureAncilla => None,
    }
}

fn project_ancilla(psi: &CVector, outcome: Outcome) -> Result<CVector> {
    let keep = match outcome {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
    };
    let mut v = psi.clone();
    for i in 0..DIM {
        if (i >> 1) & 1 != keep {
            v[i] = r(0.0);
        }
    }
    let norm = v.norm();
    if norm < 1e-12 {
        return Err(Error::InvalidInput(format!(
            "forced outcome {outcome:?} has zero probability"
        )));
    }
    Ok(v / r(norm))
}

/// Run segments on a state vector with forced projective outcomes; returns
/// the final state and the number of outcomes consumed.
pub fn statevector_segments(
    psi: &PureState,
    segments: &[Segment],
    outcomes: &[Outcome],
    params: &DeviceParams,
) -> Result<(PureState, usize)> {
    let mut v = psi.amplitudes().clone();
    let mut used = 0;
    let mut last = None;
    for seg in segments {
        match segment_unitary(seg, last, params) {
            Some(u) => v = u * v,
            None => {
                let o = *outcomes.get(used).ok_or_else(|| {
                    Error::InvalidInput("not enough forced outcomes for the schedule".into())
                })?;
                v = project_ancilla(&v, o)?;
                last = Some(o);
                used += 1;
            }
        }
    }
    Ok((PureState::new(v)?, used))
}

/// Noiseless run of a compiled experiment from `|000⟩` with one forced outcome per round.
pub fn statevector_run(
    experiment: &Experiment,
    outcomes: &[Outcome],
) -> Result<OracleResult<PureState>> {
    if outcomes.len() != experiment.rounds.len() {
        return Err(Error::InvalidInput(format!(
            "{} outcomes supplied for {} rounds",
            outcomes.len(),
            experiment.rounds.len()
        )));
    }
    let params = DeviceParams::noiseless();
    let all: Vec<Segment> = experiment
        .preparation
        .iter()
        .chain(experiment.rounds.iter().flat_map(|r| r.segments.iter()))
        .cloned()
        .collect();
    let (psi, _) = statevector_segments(&PureState::basis(DIM, 0), &all, outcomes, &params)?;
    Ok(OracleResult::new(psi, Provenance::Statevector))
}

/// Closed-form relaxation and dephasing of one qubit: populations relax to the
/// ground state as `e^{−t/T1}`, coherences decay as `e^{−t/T2}`.
pub fn analytic_decay(
    t1_us: f64,
    t2_us: f64,
    t_ns: f64,
    rho0: &DensityMatrix,
) -> Result<OracleResult<DensityMatrix>> {
    if rho0.dim() != 2 {
        return Err(Error::InvalidInput("analytic decay is single-qubit".into()));
    }
    if t2_us > 2.0 * t1_us {
        return Err(Error::param("t2_us", "T2 exceeds 2*T1"));
    }
    let m = rho0.matrix();
    let pop = (-t_ns / (t1_us * 1e3)).exp();
    let coh = (-t_ns / (t2_us * 1e3)).exp();
    let p1 = m[(1, 1)].re * pop;
    let out = CMatrix::from_row_slice(
        2,
        2,
        &[r(1.0 - p1), m[(0, 1)] * r(coh), m[(1, 0)] * r(coh), r(p1)],
    );
    Ok(OracleResult::new(
        DensityMatrix::from_matrix_unchecked(out),
        Provenance::Analytic,
    ))
}

/// Single-qubit collapse operators for `analytic_decay` cross-checks.
pub fn single_qubit_collapse(t1_us: f64, t2_us: f64) -> Vec<CMatrix> {
    let (g1, gphi) = decay_rates(t1_us, t2_us);
    vec![
        crate::qops::sigma_minus() * r(g1.sqrt()),
        crate::qops::sigma_z() * r(gphi.max(0.0).sqrt()),
    ]
}

/// Right-hand side `−i[H, ρ] + Σ (c ρ c† − ½{c†c, ρ})` in matrix form.
pub fn lindblad_rhs(h: &CMatrix, collapse: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let mut out = (h * rho - rho * h) * c(0.0, -1.0);
    for op in collapse {
        let cd = op.adjoint();
        let cdc = &cd * op;
        out += op * rho * &cd - (&cdc * rho + rho * &cdc) * r(0.5);
    }
    out
}

/// Classical RK4 over `[0, duration]` with step `dt` (the last step is shortened).
pub fn rk4(h: &CMatrix, collapse: &[CMatrix], rho: &CMatrix, duration: f64, dt: f64) -> CMatrix {
    let mut y = rho.clone();
    let mut t = 0.0;
    while t < duration - 1e-12 {
        let step = dt.min(duration - t);
        let k1 = lindblad_rhs(h, collapse, &y);
        let k2 = lindblad_rhs(h, collapse, &(&y + &k1 * r(step / 2.0)));
        let k3 = lindblad_rhs(h, collapse, &(&y + &k2 * r(step / 2.0)));
        let k4 = lindblad_rhs(h, collapse, &(&y + &k3 * r(step)));
        y += (k1 + k2 * r(2.0) + k3 * r(2.0) + k4) * r(step / 6.0);
        t += step;
    }
    y
}

/// Fixed-step integration of one segment with a given Hamiltonian (rad/ns) and
/// collapse set. Flags trace drift above `1e-6`.
pub fn fixed_step_integrate(
    rho: &DensityMatrix,
    h: &CMatrix,
    collapse: &[CMatrix],
    duration_ns: f64,
    dt_ns: f64,
) -> Result<OracleResult<DensityMatrix>> {
    if !(dt_ns > 0.0 && dt_ns <= 1.0) {
        return Err(Error::InvalidInput(format!("step {dt_ns} ns outside (0, 1]")));
    }
    let out = rk4(h, collapse, rho.matrix(), duration_ns, dt_ns);
    let drift = (out.trace().re - rho.trace()).abs();
    if drift > 1e-6 {
        return Err(Error::Propagation {
            segment: "fixed-step oracle".into(),
            reason: format!("trace drift {drift:e}"),
        });
    }
    Ok(OracleResult::new(
        DensityMatrix::from_matrix_unchecked(out),
        Provenance::FixedStep,
    ))
}
