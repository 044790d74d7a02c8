#![allow(dead_code)]

use bellstab::engine::{merge_by_frame, Branch, Engine};
use bellstab::error::Result;
use bellstab::protocol::Simulation;
use bellstab::qops::{c, CMatrix, DensityMatrix};
use bellstab::schedule::{cycle_pattern, Basis, Mode, SegmentKind};
use proptest::prelude::*;

/// `G G† / Tr` for a complex Ginibre matrix built from `2·dim²` numbers.
pub fn density_from(dim: usize, xs: &[f64]) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        c(xs[k], xs[k + 1])
    });
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityMatrix::new(m / t).expect("Ginibre state is valid")
}

pub fn density_strategy(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0..1.0f64, 2 * dim * dim)
        .prop_filter("non-degenerate", |xs| xs.iter().any(|x| x.abs() > 1e-3))
        .prop_map(move |xs| density_from(dim, &xs))
}

/// Two-qubit state embedded with the ancilla in `|a⟩`.
pub fn with_ancilla_state(data: &DensityMatrix, a: usize) -> DensityMatrix {
    let mut m = CMatrix::zeros(8, 8);
    let idx = |k: usize| 4 * (k >> 1) + 2 * a + (k & 1);
    for i in 0..4 {
        for j in 0..4 {
            m[(idx(i), idx(j))] = data.matrix()[(i, j)];
        }
    }
    DensityMatrix::from_matrix_unchecked(m)
}

/// Feedback-mode rounds driven segment by segment, calling `inspect` on every
/// branch state after every segment. With `merge = false` the branch tree is
/// kept whole so records identify each outcome string.
pub fn run_segments_checked(
    sim: &Simulation,
    initial: DensityMatrix,
    pattern: &[Basis],
    rounds: usize,
    merge: bool,
    mut inspect: impl FnMut(&str, &DensityMatrix),
) -> Result<Vec<Branch>> {
    let mut engine = Engine::new(&sim.model);
    let mut branches = vec![Branch::root(initial)];
    for basis in cycle_pattern(pattern, rounds) {
        let round = sim.round(basis, Mode::Feedback)?;
        for seg in &round.segments {
            branches = if seg.kind == SegmentKind::MeasureAncilla {
                engine.measure_branches(branches)?.0
            } else {
                engine.step_branches(branches, seg)?
            };
            for b in &branches {
                inspect(seg.label, &b.state);
            }
        }
        if merge {
            branches = merge_by_frame(branches);
        }
    }
    Ok(branches)
}
