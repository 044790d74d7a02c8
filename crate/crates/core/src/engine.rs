//! Density-matrix propagation through compiled segments.
//!
//! Each timed segment has a constant generator, so its propagator is the exact
//! exponential of the 64x64 Liouvillian acting on the column-stacked state.
//! Propagators are cached per run.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::noise::{MeasurementModel, NoiseModel};
use crate::par;
use crate::protocol::PauliFrame;
use crate::qops::{c, kron_all, r, unitarity_error, CMatrix, CVector, DensityMatrix, DIM};
use crate::schedule::{InstantOp, Outcome, Segment, SegmentKind};

/// Lindblad generator in the column-stacking convention `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    generator: CMatrix,
}

impl Liouvillian {
    pub fn new(h: &CMatrix, collapse: &[CMatrix]) -> Liouvillian {
        let n = h.nrows();
        let id = CMatrix::identity(n, n);
        let mi = c(0.0, -1.0);
        let mut gen = (id.kronecker(h) - h.transpose().kronecker(&id)) * mi;
        for op in collapse {
            if op.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let cdc = op.adjoint() * op;
            gen += op.conjugate().kronecker(op);
            gen -= (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)) * r(0.5);
        }
        Liouvillian { generator: gen }
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    /// `exp(L t)`
    pub fn propagator(&self, t: f64) -> CMatrix {
        (&self.generator * r(t)).exp()
    }
}

pub fn vectorize(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Apply a superoperator to a state.
pub fn apply_superop(superop: &CMatrix, rho: &DensityMatrix) -> DensityMatrix {
    let n = rho.dim();
    DensityMatrix::from_matrix_unchecked(unvectorize(&(superop * vectorize(rho.matrix())), n))
}

/// `UρU†` for unitary `U`.
pub fn apply_unitary(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    if u.shape() != rho.matrix().shape() {
        return Err(Error::InvalidInput("unitary dimension mismatch".into()));
    }
    let err = unitarity_error(u);
    if err > 1e-10 {
        return Err(Error::InvalidInput(format!("operator is not unitary (error {err:e})")));
    }
    Ok(rho.conjugate_by(u))
}

/// Weighted state of one measurement record.
#[derive(Debug, Clone)]
pub struct Branch {
    pub weight: f64,
    pub state: DensityMatrix,
    /// Outcomes since this branch was last merged.
    pub record: Vec<Outcome>,
    pub frame: PauliFrame,
}

impl Branch {
    pub fn root(state: DensityMatrix) -> Branch {
        Branch {
            weight: 1.0,
            state,
            record: Vec::new(),
            frame: PauliFrame::IDENTITY,
        }
    }

    pub fn last_outcome(&self) -> Option<Outcome> {
        self.record.last().copied()
    }
}

/// Result of an ancilla POVM on one state; degenerate outcomes are dropped.
#[derive(Debug, Clone)]
pub struct Measured {
    pub p_plus: f64,
    pub p_minus: f64,
    pub branches: Vec<(Outcome, f64, DensityMatrix)>,
}

impl Measured {
    pub fn state(&self, outcome: Outcome) -> Option<&DensityMatrix> {
        self.branches
            .iter()
            .find(|(o, _, _)| *o == outcome)
            .map(|(_, _, s)| s)
    }
}

/// Probability below which a measurement branch is discarded.
pub const DEGENERATE_BRANCH: f64 = 1e-12;

/// `p_i = Tr(M_i ρ M_i†)`, `ρ_i = M_i ρ M_i† / p_i`.
pub fn measure_ancilla(rho: &DensityMatrix, model: &MeasurementModel) -> Result<Measured> {
    let project = |m: &CMatrix| {
        let s = m * rho.matrix() * m.adjoint();
        let p = s.trace().re;
        (p, s)
    };
    let (p_plus, s_plus) = project(&model.m_plus);
    let (p_minus, s_minus) = project(&model.m_minus);
    let total = p_plus + p_minus;
    if !(total.is_finite() && total > DEGENERATE_BRANCH) {
        return Err(Error::Measurement(format!(
            "outcome probabilities vanish (p+ = {p_plus}, p- = {p_minus})"
        )));
    }
    let mut branches = Vec::with_capacity(2);
    let mut kept = 0.0;
    for (o, p, s) in [(Outcome::Plus, p_plus, s_plus), (Outcome::Minus, p_minus, s_minus)] {
        if p > DEGENERATE_BRANCH {
            kept += p;
            branches.push((o, p, DensityMatrix::from_matrix_unchecked(s / r(p))));
        }
    }
    for b in &mut branches {
        b.1 /= kept;
    }
    Ok(Measured {
        p_plus,
        p_minus,
        branches,
    })
}

/// Convex combination of branches that share one Pauli frame.
pub fn recombine(branches: &[Branch]) -> Result<DensityMatrix> {
    let first = branches
        .first()
        .ok_or_else(|| Error::InvalidInput("no branches to recombine".into()))?;
    if let Some(b) = branches.iter().find(|b| b.frame != first.frame) {
        return Err(Error::FrameMismatch(format!("{} vs {}", first.frame, b.frame)));
    }
    let total: f64 = branches.iter().map(|b| b.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("branch weights sum to {total}, not 1")));
    }
    Ok(DensityMatrix::from_matrix_unchecked(mix(branches)))
}

fn mix(branches: &[Branch]) -> CMatrix {
    let n = branches[0].state.dim();
    branches
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, b| acc + b.state.scaled(b.weight))
}

/// Merge branches with equal frames; output ordered by frame.
pub fn merge_by_frame(branches: Vec<Branch>) -> Vec<Branch> {
    let mut groups: Vec<(PauliFrame, Vec<Branch>)> = Vec::new();
    for b in branches {
        match groups.iter_mut().find(|(f, _)| *f == b.frame) {
            Some((_, g)) => g.push(b),
            None => groups.push((b.frame, vec![b])),
        }
    }
    groups.sort_by_key(|(f, _)| *f);
    groups
        .into_iter()
        .map(|(frame, g)| {
            let w: f64 = g.iter().map(|b| b.weight).sum();
            let state = DensityMatrix::from_matrix_unchecked(mix(&g) / r(w));
            Branch {
                weight: w,
                state,
                record: Vec::new(),
                frame,
            }
        })
        .collect()
}

/// Resolved action of one segment for one branch outcome.
#[derive(Debug, Clone)]
pub enum Step {
    Superop(Arc<CMatrix>),
    Unitary(Arc<CMatrix>),
    Identity,
}

impl Step {
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        match self {
            Step::Superop(p) => apply_superop(p, rho),
            Step::Unitary(u) => rho.conjugate_by(u),
            Step::Identity => rho.clone(),
        }
    }
}

/// Steps for both outcomes of a segment (identical unless it is a conditional pulse).
#[derive(Debug, Clone)]
pub struct PreparedSegment {
    pub plus: Step,
    pub minus: Step,
}

impl PreparedSegment {
    pub fn for_outcome(&self, outcome: Option<Outcome>) -> &Step {
        match outcome {
            Some(Outcome::Minus) => &self.minus,
            _ => &self.plus,
        }
    }
}

/// Per-run propagator cache over a fixed noise model.
pub struct Engine<'m> {
    model: &'m NoiseModel,
    cache: HashMap<String, Arc<CMatrix>>,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m NoiseModel) -> Engine<'m> {
        Engine {
            model,
            cache: HashMap::new(),
        }
    }

    pub fn model(&self) -> &NoiseModel {
        self.model
    }

    pub fn cached_propagators(&self) -> usize {
        self.cache.len()
    }

    /// Full Hamiltonian of a timed segment (control plus residual ZZ when noisy).
    pub fn hamiltonian(&self, seg: &Segment, outcome: Option<Outcome>) -> CMatrix {
        let h = seg.control_hamiltonian(outcome);
        if seg.noise_active {
            h + &self.model.h_zz
        } else {
            h
        }
    }

    pub fn liouvillian(&self, seg: &Segment, outcome: Option<Outcome>) -> Liouvillian {
        let h = self.hamiltonian(seg, outcome);
        if seg.noise_active {
            Liouvillian::new(&h, &self.model.collapse)
        } else {
            Liouvillian::new(&h, &[])
        }
    }

    fn timed_step(&mut self, seg: &Segment, outcome: Option<Outcome>) -> Result<Step> {
        let rots = seg.rotations(outcome);
        let key = format!("{:?}|{}|{}", rots, seg.duration_ns, seg.noise_active)
            + &match &seg.kind {
                SegmentKind::Cz { pair, phase } => format!("|cz {pair:?} {phase:?}"),
                _ => String::new(),
            };
        if let Some(p) = self.cache.get(&key) {
            return Ok(Step::Superop(p.clone()));
        }
        let prop = self
            .liouvillian(seg, outcome)
            .propagator(f64::from(seg.duration_ns));
        if prop.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Propagation {
                segment: seg.label.to_string(),
                reason: "propagator has non-finite entries".into(),
            });
        }
        let prop = Arc::new(prop);
        self.cache.insert(key, prop.clone());
        Ok(Step::Superop(prop))
    }

    fn instant_unitary(&self, op: &InstantOp) -> CMatrix {
        match op {
            InstantOp::Rotations(rots) => {
                let mut factors = vec![CMatrix::identity(2, 2); 3];
                for rot in rots {
                    let i = rot.site.index();
                    factors[i] = rot.unitary_2x2() * &factors[i];
                }
                kron_all(&factors)
            }
            InstantOp::Stark => self.model.stark.clone(),
            InstantOp::StarkCompensation => self.model.stark_compensation.clone(),
        }
    }

    /// Resolve a non-measurement segment into per-outcome steps.
    pub fn prepare(&mut self, seg: &Segment) -> Result<PreparedSegment> {
        match &seg.kind {
            SegmentKind::MeasureAncilla => Err(Error::InvalidInput(
                "measurement segments are not propagated".into(),
            )),
            SegmentKind::Instant(op) => {
                let u = Step::Unitary(Arc::new(self.instant_unitary(op)));
                Ok(PreparedSegment {
                    plus: u.clone(),
                    minus: u,
                })
            }
            _ if seg.duration_ns == 0 => Ok(PreparedSegment {
                plus: Step::Identity,
                minus: Step::Identity,
            }),
            SegmentKind::ConditionalPulse { .. } => Ok(PreparedSegment {
                plus: self.timed_step(seg, Some(Outcome::Plus))?,
                minus: self.timed_step(seg, Some(Outcome::Minus))?,
            }),
            _ => {
                let s = self.timed_step(seg, None)?;
                Ok(PreparedSegment {
                    plus: s.clone(),
                    minus: s,
                })
            }
        }
    }

    /// Evolve one state through one segment. Conditional pulses use `outcome`.
    pub fn propagate_with(
        &mut self,
        rho: &DensityMatrix,
        seg: &Segment,
        outcome: Option<Outcome>,
    ) -> Result<DensityMatrix> {
        let step = self.prepare(seg)?;
        let out = step.for_outcome(outcome).apply(rho);
        check_state(&out, seg)?;
        Ok(out)
    }

    pub fn propagate(&mut self, rho: &DensityMatrix, seg: &Segment) -> Result<DensityMatrix> {
        self.propagate_with(rho, seg, None)
    }

    /// Evolve a list of segments (no measurements).
    pub fn run_segments(&mut self, rho: &DensityMatrix, segs: &[Segment]) -> Result<DensityMatrix> {
        segs.iter()
            .try_fold(rho.clone(), |acc, seg| self.propagate(&acc, seg))
    }

    /// Evolve every branch through one segment, fanning out over branches.
    pub fn step_branches(&mut self, branches: Vec<Branch>, seg: &Segment) -> Result<Vec<Branch>> {
        let prepared = self.prepare(seg)?;
        par::map_vec(branches, |mut b| {
            b.state = prepared.for_outcome(b.last_outcome()).apply(&b.state);
            check_state(&b.state, seg)?;
            Ok(b)
        })
        .into_iter()
        .collect()
    }

    /// Split each branch on the ancilla outcome. Returns the new branches and
    /// the total outcome probabilities.
    pub fn measure_branches(&self, branches: Vec<Branch>) -> Result<(Vec<Branch>, f64, f64)> {
        let measurement = &self.model.measurement;
        let model = self.model;
        let split = par::map_vec(branches, |b| {
            let m = measure_ancilla(&b.state, measurement)?;
            let children: Vec<Branch> = m
                .branches
                .into_iter()
                .map(|(o, p, s)| {
                    let mut record = b.record.clone();
                    record.push(o);
                    Branch {
                        weight: b.weight * p,
                        state: model.apply_cross_dephasing(&s),
                        record,
                        frame: b.frame,
                    }
                })
                .collect();
            Ok::<_, Error>((children, b.weight * m.p_plus, b.weight * m.p_minus))
        });
        let mut out = Vec::new();
        let (mut pp, mut pm) = (0.0, 0.0);
        for s in split {
            let (children, a, b) = s?;
            out.extend(children);
            pp += a;
            pm += b;
        }
        Ok((out, pp, pm))
    }
}

fn check_state(rho: &DensityMatrix, seg: &Segment) -> Result<()> {
    if rho
        .matrix()
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Propagation {
            segment: seg.label.to_string(),
            reason: "state has non-finite entries".into(),
        });
    }
    Ok(())
}

/// Ancilla-excited population of a three-qubit state.
pub fn ancilla_excited(rho: &DensityMatrix) -> f64 {
    debug_assert_eq!(rho.dim(), DIM);
    rho.excited_population(crate::qops::Site::A)
}
