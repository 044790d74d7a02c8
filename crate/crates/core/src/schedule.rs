//! Compilation of the parity-stabilization protocol into piecewise-constant segments.
//!
//! A ZZ round is the parity map (CNOTs decomposed as CZ gates between two
//! `R_y(±π/2)` pulses on the ancilla), an instantaneous ancilla measurement with
//! the readout Stark phase and its virtual-Z compensation, the feedback delay
//! with CPMG decoupling of the data qubits, and the conditional pulse slot.
//! An XX round wraps the parity map in basis-change pulses on D1 and D2.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{embed_pair, embed_single, projector, r, CMatrix, Pauli, Site};

/// Drive axis of a single-qubit rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

/// `R_axis(angle) = exp(−i angle σ_axis / 2)` on one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub site: Site,
    pub axis: Axis,
    pub angle: f64,
}

impl Rotation {
    pub fn new(site: Site, axis: Axis, angle: f64) -> Self {
        Rotation { site, axis, angle }
    }

    /// Exact 2x2 unitary `cos(θ/2) I − i sin(θ/2) σ`.
    pub fn unitary_2x2(&self) -> CMatrix {
        let (s, c) = (self.angle / 2.0).sin_cos();
        CMatrix::identity(2, 2) * r(c) - self.axis.pauli().matrix() * crate::qops::c(0.0, s)
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{:?}({:+.4}π)@{}", self.axis, self.angle / PI, self.site)
    }
}

/// Coupled pair for a controlled-phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pair {
    D1A,
    AD2,
}

impl Pair {
    pub fn sites(self) -> (Site, Site) {
        match self {
            Pair::D1A => (Site::D1, Site::A),
            Pair::AD2 => (Site::A, Site::D2),
        }
    }
}

/// Zero-duration unitary.
#[derive(Debug, Clone, PartialEq)]
pub enum InstantOp {
    Rotations(Vec<Rotation>),
    /// Readout-induced Stark phase on D1 and D2.
    Stark,
    /// Virtual-Z compensating the Stark phase.
    StarkCompensation,
}

/// Parity outcome of an ancilla measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    /// Ancilla read as `|0⟩`.
    Plus,
    /// Ancilla read as `|1⟩`.
    Minus,
}

impl Outcome {
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    /// Simultaneous drives on distinct sites; amplitude `angle / duration` each.
    Rotation(Vec<Rotation>),
    /// Generator `(phase / duration) |11⟩⟨11|` on the pair.
    Cz { pair: Pair, phase: f64 },
    Idle,
    Instant(InstantOp),
    /// Instantaneous POVM on the ancilla.
    MeasureAncilla,
    /// Drives applied for the duration depending on the last outcome; an
    /// empty list is a free evolution of the same length.
    ConditionalPulse {
        on_plus: Vec<Rotation>,
        on_minus: Vec<Rotation>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration_ns: u32,
    /// Collapse operators and the residual ZZ Hamiltonian act during this segment.
    pub noise_active: bool,
    pub label: &'static str,
}

impl Segment {
    fn timed(kind: SegmentKind, duration_ns: u32, label: &'static str) -> Segment {
        Segment {
            kind,
            duration_ns,
            noise_active: true,
            label,
        }
    }

    fn instant(kind: SegmentKind, label: &'static str) -> Segment {
        Segment {
            kind,
            duration_ns: 0,
            noise_active: false,
            label,
        }
    }

    pub fn rotation(rots: Vec<Rotation>, duration_ns: u32, label: &'static str) -> Segment {
        Segment::timed(SegmentKind::Rotation(rots), duration_ns, label)
    }

    pub fn idle(duration_ns: u32, label: &'static str) -> Segment {
        Segment::timed(SegmentKind::Idle, duration_ns, label)
    }

    pub fn cz(pair: Pair, phase: f64, duration_ns: u32) -> Segment {
        let label = match pair {
            Pair::D1A => "cz D1-A",
            Pair::AD2 => "cz A-D2",
        };
        Segment::timed(SegmentKind::Cz { pair, phase }, duration_ns, label)
    }

    pub fn is_instant(&self) -> bool {
        matches!(self.kind, SegmentKind::Instant(_) | SegmentKind::MeasureAncilla)
    }

    /// Control Hamiltonian (rad/ns) for timed segments, without the residual coupling.
    /// For a conditional pulse `outcome` selects the branch.
    pub fn control_hamiltonian(&self, outcome: Option<Outcome>) -> CMatrix {
        let t = f64::from(self.duration_ns);
        let drives = |rots: &[Rotation]| -> CMatrix {
            rots.iter().fold(CMatrix::zeros(8, 8), |acc, rot| {
                let amp = rot.angle / t;
                acc + embed_single(&(rot.axis.pauli().matrix() * r(amp / 2.0)), rot.site).unwrap()
            })
        };
        match &self.kind {
            SegmentKind::Rotation(rots) => drives(rots),
            SegmentKind::Cz { pair, phase } => {
                let (a, b) = pair.sites();
                let p11 = projector(1).kronecker(&projector(1));
                embed_pair(&(p11 * r(phase / t)), a, b).unwrap()
            }
            SegmentKind::ConditionalPulse { on_plus, on_minus } => match outcome {
                Some(Outcome::Minus) => drives(on_minus),
                _ => drives(on_plus),
            },
            _ => CMatrix::zeros(8, 8),
        }
    }

    /// Rotations applied in this segment for the given branch outcome.
    pub fn rotations(&self, outcome: Option<Outcome>) -> &[Rotation] {
        match &self.kind {
            SegmentKind::Rotation(rots) => rots,
            SegmentKind::Instant(InstantOp::Rotations(rots)) => rots,
            SegmentKind::ConditionalPulse { on_plus, on_minus } => match outcome {
                Some(Outcome::Minus) => on_minus,
                _ => on_plus,
            },
            _ => &[],
        }
    }

    pub fn describe(&self) -> String {
        let rots = |v: &[Rotation]| {
            if v.is_empty() {
                "idle".to_string()
            } else {
                v.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
            }
        };
        match &self.kind {
            SegmentKind::Rotation(v) => rots(v),
            SegmentKind::Cz { phase, .. } => format!("phase {:.4}π on |11⟩", phase / PI),
            SegmentKind::Idle => String::new(),
            SegmentKind::Instant(InstantOp::Rotations(v)) => rots(v),
            SegmentKind::Instant(InstantOp::Stark) => "stark phase".into(),
            SegmentKind::Instant(InstantOp::StarkCompensation) => "virtual-Z".into(),
            SegmentKind::MeasureAncilla => "POVM on A".into(),
            SegmentKind::ConditionalPulse { on_plus, on_minus } => {
                format!("+1: {} | -1: {}", rots(on_plus), rots(on_minus))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    ZZ,
    XX,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::ZZ => "ZZ",
            Basis::XX => "XX",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ZZ" | "zz" => Ok(Basis::ZZ),
            "XX" | "xx" => Ok(Basis::XX),
            other => Err(Error::InvalidInput(format!("unknown parity basis {other:?}"))),
        }
    }
}

/// Real-time feedback on the data qubits, or Pauli frame updating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Feedback,
    Pfu,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Feedback => "feedback",
            Mode::Pfu => "pfu",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feedback" => Ok(Mode::Feedback),
            "pfu" => Ok(Mode::Pfu),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

/// Bell state the feedback steers towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    PhiPlus,
    PsiPlus,
}

impl Target {
    /// Parity outcome that needs no data correction in the given basis.
    pub fn desired(self, basis: Basis) -> Outcome {
        match (self, basis) {
            (Target::PsiPlus, Basis::ZZ) => Outcome::Minus,
            _ => Outcome::Plus,
        }
    }

    pub fn state(self) -> crate::qops::PureState {
        match self {
            Target::PhiPlus => crate::qops::phi_plus(),
            Target::PsiPlus => crate::qops::psi_plus(),
        }
    }
}

/// Pulse and delay durations in nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timing {
    pub gate_ns: u32,
    pub flux_d1a_ns: u32,
    pub flux_ad2_ns: u32,
    pub buffer_ns: u32,
    /// Readout pulse length; its decoherence is part of the feedback delay.
    pub readout_ns: u32,
    /// Time between the ancilla measurement and the conditional pulse.
    pub feedback_delay_ns: u32,
    pub cpmg_count: u32,
    /// Zero-duration CPMG pulses instead of `gate_ns` drives.
    pub cpmg_ideal_pulses: bool,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            gate_ns: 50,
            flux_d1a_ns: 96,
            flux_ad2_ns: 105,
            buffer_ns: 40,
            readout_ns: 200,
            feedback_delay_ns: 1000,
            cpmg_count: 4,
            cpmg_ideal_pulses: false,
        }
    }
}

impl Timing {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("gate_ns", self.gate_ns),
            ("flux_d1a_ns", self.flux_d1a_ns),
            ("flux_ad2_ns", self.flux_ad2_ns),
        ] {
            if v == 0 {
                return Err(Error::param(format!("timing.{key}"), "must be > 0"));
            }
        }
        if self.feedback_delay_ns > 0
            && !self.cpmg_ideal_pulses
            && self.feedback_delay_ns < self.cpmg_count * self.gate_ns
        {
            return Err(Error::param(
                "timing.feedback_delay_ns",
                format!(
                    "{} ns cannot hold {} CPMG pulses of {} ns",
                    self.feedback_delay_ns, self.cpmg_count, self.gate_ns
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompileOptions {
    pub target: Target,
    /// Replace every rotation and CZ angle with zero.
    pub zero_angles: bool,
}

impl CompileOptions {
    fn angle(&self, a: f64) -> f64 {
        if self.zero_angles {
            0.0
        } else {
            a
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub basis: Basis,
    pub mode: Mode,
    pub segments: Vec<Segment>,
    pub duration_ns: u32,
}

impl Round {
    /// Segments up to (excluding) the measurement, and the rest after it.
    pub fn split_at_measurement(&self) -> (&[Segment], &[Segment]) {
        let idx = self
            .segments
            .iter()
            .position(|s| s.kind == SegmentKind::MeasureAncilla)
            .expect("round has a measurement");
        (&self.segments[..idx], &self.segments[idx + 1..])
    }
}

/// Preparation followed by the compiled rounds; ends with state tomography.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub preparation: Vec<Segment>,
    pub rounds: Vec<Round>,
}

impl Experiment {
    pub fn duration_ns(&self) -> u32 {
        self.preparation.iter().map(|s| s.duration_ns).sum::<u32>()
            + self.rounds.iter().map(|r| r.duration_ns).sum::<u32>()
    }

    /// Human-readable listing with start and end times.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut t = 0u32;
        let line = |out: &mut String, t: &mut u32, seg: &Segment| {
            let end = *t + seg.duration_ns;
            let _ = writeln!(
                out,
                "{:>7} {:>7}  {:<16} {}",
                *t,
                end,
                seg.label,
                seg.describe()
            );
            *t = end;
        };
        let _ = writeln!(out, "{:>7} {:>7}  {:<16} detail", "start", "end", "segment");
        let _ = writeln!(out, "# preparation");
        for seg in &self.preparation {
            line(&mut out, &mut t, seg);
        }
        for (i, round) in self.rounds.iter().enumerate() {
            let _ = writeln!(
                out,
                "# round {} {} {} ({} ns)",
                i + 1,
                round.basis,
                round.mode,
                round.duration_ns
            );
            for seg in &round.segments {
                line(&mut out, &mut t, seg);
            }
        }
        let _ = writeln!(out, "{t:>7} {t:>7}  tomography");
        out
    }
}

/// Simultaneous `R_y(π/2)` on D1 and D2 from `|000⟩`.
pub fn compile_preparation(timing: &Timing, options: &CompileOptions) -> Vec<Segment> {
    vec![Segment::rotation(
        vec![
            Rotation::new(Site::D1, Axis::Y, options.angle(FRAC_PI_2)),
            Rotation::new(Site::D2, Axis::Y, options.angle(FRAC_PI_2)),
        ],
        timing.gate_ns,
        "prep",
    )]
}

/// Feedback delay: CPMG π_x pulses on D1 and D2 centred at `(2k+1)/(2n)` of the delay.
fn compile_delay(timing: &Timing, options: &CompileOptions) -> Vec<Segment> {
    let td = timing.feedback_delay_ns;
    let n = timing.cpmg_count;
    if td == 0 {
        return Vec::new();
    }
    if n == 0 {
        return vec![Segment::idle(td, "delay")];
    }
    let pulse = || {
        vec![
            Rotation::new(Site::D1, Axis::X, options.angle(PI)),
            Rotation::new(Site::D2, Axis::X, options.angle(PI)),
        ]
    };
    let half = if timing.cpmg_ideal_pulses { 0 } else { timing.gate_ns / 2 };
    let width = if timing.cpmg_ideal_pulses { 0 } else { timing.gate_ns };
    let mut segs = Vec::new();
    let mut t = 0u32;
    for k in 0..n {
        // rounded centre in integer ns
        let centre = ((2 * k + 1) as u64 * td as u64 + n as u64) / (2 * n as u64);
        let start = centre as u32 - half;
        if start > t {
            segs.push(Segment::idle(start - t, "delay"));
        }
        if timing.cpmg_ideal_pulses {
            segs.push(Segment::instant(
                SegmentKind::Instant(InstantOp::Rotations(pulse())),
                "cpmg π_x",
            ));
        } else {
            segs.push(Segment::rotation(pulse(), width, "cpmg π_x"));
        }
        t = start + width;
    }
    if td > t {
        segs.push(Segment::idle(td - t, "delay"));
    }
    segs
}

pub fn compile_parity_round(
    basis: Basis,
    mode: Mode,
    timing: &Timing,
    options: &CompileOptions,
) -> Result<Round> {
    timing.validate()?;
    let tg = timing.gate_ns;
    let a = |angle: f64| vec![Rotation::new(Site::A, Axis::Y, options.angle(angle))];
    let data_basis = |angle: f64| {
        vec![
            Rotation::new(Site::D1, Axis::Y, options.angle(angle)),
            Rotation::new(Site::D2, Axis::Y, options.angle(angle)),
        ]
    };
    let cz_phase = options.angle(PI);

    let mut segs = Vec::new();
    if basis == Basis::XX {
        segs.push(Segment::rotation(data_basis(-FRAC_PI_2), tg, "basis D1,D2"));
    }
    segs.push(Segment::rotation(a(FRAC_PI_2), tg, "map A"));
    segs.push(Segment::idle(timing.buffer_ns, "buffer"));
    segs.push(Segment::cz(Pair::D1A, cz_phase, timing.flux_d1a_ns));
    segs.push(Segment::idle(timing.buffer_ns, "buffer"));
    segs.push(Segment::idle(timing.buffer_ns, "buffer"));
    segs.push(Segment::cz(Pair::AD2, cz_phase, timing.flux_ad2_ns));
    segs.push(Segment::idle(timing.buffer_ns, "buffer"));
    segs.push(Segment::rotation(a(-FRAC_PI_2), tg, "map A"));
    if basis == Basis::XX {
        segs.push(Segment::rotation(data_basis(FRAC_PI_2), tg, "basis D1,D2"));
    }
    segs.push(Segment::instant(SegmentKind::MeasureAncilla, "measure A"));
    segs.push(Segment::instant(SegmentKind::Instant(InstantOp::Stark), "stark"));
    segs.push(Segment::instant(
        SegmentKind::Instant(InstantOp::StarkCompensation),
        "virtual-Z",
    ));
    segs.extend(compile_delay(timing, options));

    let reset = Rotation::new(Site::A, Axis::X, options.angle(PI));
    // X on D2 flips ZZ; Z on D2 flips XX.
    let correction = match basis {
        Basis::ZZ => Rotation::new(Site::D2, Axis::X, options.angle(PI)),
        Basis::XX => Rotation::new(Site::D2, Axis::Z, options.angle(PI)),
    };
    let mut on_plus = Vec::new();
    let mut on_minus = vec![reset];
    if mode == Mode::Feedback {
        match options.target.desired(basis) {
            Outcome::Plus => on_minus.insert(0, correction),
            Outcome::Minus => on_plus.push(correction),
        }
    }
    segs.push(Segment::timed(
        SegmentKind::ConditionalPulse { on_plus, on_minus },
        tg,
        "conditional",
    ));

    let duration_ns = segs.iter().map(|s| s.duration_ns).sum();
    Ok(Round {
        basis,
        mode,
        segments: segs,
        duration_ns,
    })
}

/// One round per entry of `sequence`, after the preparation pulses.
pub fn compile_experiment(
    sequence: &[Basis],
    mode: Mode,
    timing: &Timing,
    options: &CompileOptions,
) -> Result<Experiment> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("experiment needs at least one round".into()));
    }
    let rounds = sequence
        .iter()
        .map(|&b| compile_parity_round(b, mode, timing, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        preparation: compile_preparation(timing, options),
        rounds,
    })
}

/// `pattern` repeated cyclically to `n` rounds, e.g. `[ZZ, XX]` → ZZ, XX, ZZ, ...
pub fn cycle_pattern(pattern: &[Basis], n: usize) -> Vec<Basis> {
    pattern.iter().copied().cycle().take(n).collect()
}
