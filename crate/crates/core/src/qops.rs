//! Operator and state algebra on the three-qubit register `D1 ⊗ A ⊗ D2`.
//!
//! Basis index of `|d1 a d2⟩` is `4·d1 + 2·a + d2`; `|0⟩` is the ground state.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const DIM: usize = 8;

const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// One of the three physical qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    D1,
    A,
    D2,
}

impl Site {
    pub const ALL: [Site; 3] = [Site::D1, Site::A, Site::D2];

    /// Position in the tensor product, most significant first.
    pub fn index(self) -> usize {
        match self {
            Site::D1 => 0,
            Site::A => 1,
            Site::D2 => 2,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Site::D1 => "D1",
            Site::A => "A",
            Site::D2 => "D2",
        };
        f.write_str(s)
    }
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(ch: char) -> Option<Pauli> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => CMatrix::identity(2, 2),
            Pauli::X => sigma_x(),
            Pauli::Y => sigma_y(),
            Pauli::Z => sigma_z(),
        }
    }
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[r(0.0), c(0.0, -1.0), c(0.0, 1.0), r(0.0)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[r(1.0), r(0.0), r(0.0), r(-1.0)])
}

/// Lowering operator `|0⟩⟨1|`.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(0.0), r(0.0)])
}

/// `|k⟩⟨k|` for `k ∈ {0, 1}`.
pub fn projector(k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(k, k)] = r(1.0);
    m
}

/// Tensor product of a list of factors, left factor most significant.
pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// Tensor product of three Paulis on `D1, A, D2`, e.g. `"XIX"`.
pub fn pauli_string(label: &str) -> Result<CMatrix> {
    let letters = parse_pauli_label(label, 3)?;
    Ok(pauli_product(&letters))
}

/// Tensor product of Paulis of any length (the CLI uses 2-qubit labels on `D1, D2`).
pub fn pauli_product(letters: &[Pauli]) -> CMatrix {
    let mats: Vec<CMatrix> = letters.iter().map(|p| p.matrix()).collect();
    kron_all(&mats)
}

pub fn parse_pauli_label(label: &str, len: usize) -> Result<Vec<Pauli>> {
    let letters: Option<Vec<Pauli>> = label.chars().map(Pauli::from_char).collect();
    match letters {
        Some(l) if l.len() == len => Ok(l),
        _ => Err(Error::InvalidInput(format!(
            "pauli label {label:?} must be {len} characters over I,X,Y,Z"
        ))),
    }
}

/// Embed a single-qubit operator at `site`, identity on the other two qubits.
pub fn embed_single(op: &CMatrix, site: Site) -> Result<CMatrix> {
    if op.shape() != (2, 2) {
        return Err(Error::InvalidInput(format!(
            "single-qubit operator must be 2x2, got {:?}",
            op.shape()
        )));
    }
    let mut factors = vec![CMatrix::identity(2, 2); 3];
    factors[site.index()] = op.clone();
    Ok(kron_all(&factors))
}

/// Embed a two-qubit operator on adjacent sites `(D1, A)` or `(A, D2)`.
pub fn embed_pair(op: &CMatrix, first: Site, second: Site) -> Result<CMatrix> {
    if op.shape() != (4, 4) {
        return Err(Error::InvalidInput("pair operator must be 4x4".into()));
    }
    let id = CMatrix::identity(2, 2);
    match (first, second) {
        (Site::D1, Site::A) => Ok(op.kronecker(&id)),
        (Site::A, Site::D2) => Ok(id.kronecker(op)),
        _ => Err(Error::InvalidInput(format!(
            "pair ({first}, {second}) is not an adjacent coupled pair"
        ))),
    }
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest absolute entry of `m − m†`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest absolute entry of `U†U − I`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n))
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(CVector);

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<PureState> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("state vector has zero norm".into()));
        }
        Ok(PureState(amplitudes / r(norm)))
    }

    /// Computational basis state `|index⟩` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> PureState {
        let mut v = CVector::zeros(dim);
        v[index] = r(1.0);
        PureState(v)
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<PureState> {
        PureState::new(CVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| r(a)),
        ))
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn kron(&self, other: &PureState) -> PureState {
        PureState(self.0.kronecker(&other.0))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.0.dotc(&other.0).norm_sqr()
    }
}

/// `(|00⟩ + |11⟩)/√2` on `D1 ⊗ D2`.
pub fn phi_plus() -> PureState {
    PureState::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
}

/// `(|01⟩ + |10⟩)/√2` on `D1 ⊗ D2`.
pub fn psi_plus() -> PureState {
    PureState::from_real(&[0.0, 1.0, 1.0, 0.0]).unwrap()
}

/// Embed a data-qubit state `D1 ⊗ D2` with the ancilla in `|a⟩`.
pub fn with_ancilla(data: &PureState, a: usize) -> PureState {
    let d = data.amplitudes();
    let mut v = CVector::zeros(DIM);
    for d1 in 0..2 {
        for d2 in 0..2 {
            v[4 * d1 + 2 * a + d2] = d[2 * d1 + d2];
        }
    }
    PureState(v)
}

/// Hermitian positive-semidefinite matrix with unit trace (or a declared branch weight).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates squareness, Hermiticity and unit trace. Positivity is checked
    /// separately with [`DensityMatrix::min_eigenvalue`] since it needs a decomposition.
    pub fn new(m: CMatrix) -> Result<DensityMatrix> {
        if !m.is_square() {
            return Err(Error::InvalidInput("density matrix must be square".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("density matrix has non-finite entries".into()));
        }
        let herm = hermiticity_error(&m);
        if herm > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "density matrix is not Hermitian (error {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("density matrix trace {tr} != 1")));
        }
        Ok(DensityMatrix(m))
    }

    pub fn from_matrix_unchecked(m: CMatrix) -> DensityMatrix {
        DensityMatrix(m)
    }

    pub fn maximally_mixed(dim: usize) -> DensityMatrix {
        DensityMatrix(CMatrix::identity(dim, dim) / r(dim as f64))
    }

    /// `|index⟩⟨index|`
    pub fn basis(dim: usize, index: usize) -> DensityMatrix {
        PureState::basis(dim, index).to_density()
    }

    pub fn ground() -> DensityMatrix {
        DensityMatrix::basis(DIM, 0)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Hermitian part, rescaled to unit trace.
    pub fn normalized(&self) -> DensityMatrix {
        let h = (&self.0 + self.0.adjoint()) * r(0.5);
        let tr = h.trace().re;
        DensityMatrix(h / r(tr))
    }

    pub fn scaled(&self, w: f64) -> CMatrix {
        &self.0 * r(w)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * r(0.5);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn conjugate_by(&self, u: &CMatrix) -> DensityMatrix {
        DensityMatrix(u * &self.0 * u.adjoint())
    }

    /// Population of `|1⟩` on `site` for a three-qubit state.
    pub fn excited_population(&self, site: Site) -> f64 {
        (0..DIM)
            .filter(|i| (i >> (2 - site.index())) & 1 == 1)
            .map(|i| self.0[(i, i)].re)
            .sum()
    }
}

/// Reduced state on the kept sites (in `D1, A, D2` order) of a three-qubit state.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Site]) -> Result<DensityMatrix> {
    if rho.dim() != DIM {
        return Err(Error::InvalidInput("partial trace expects a three-qubit state".into()));
    }
    if keep.is_empty() {
        return Err(Error::InvalidInput("partial trace needs at least one kept site".into()));
    }
    let mut kept: Vec<usize> = keep.iter().map(|s| s.index()).collect();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..3).filter(|i| !kept.contains(i)).collect();
    let k = kept.len();
    let dim_out = 1 << k;
    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0;
        for (j, &q) in kept.iter().enumerate() {
            idx |= ((kept_bits >> (k - 1 - j)) & 1) << (2 - q);
        }
        for (j, &q) in traced.iter().enumerate() {
            idx |= ((traced_bits >> (traced.len() - 1 - j)) & 1) << (2 - q);
        }
        idx
    };
    let m = rho.matrix();
    let mut out = CMatrix::zeros(dim_out, dim_out);
    for row in 0..dim_out {
        for col in 0..dim_out {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..(1 << traced.len()) {
                acc += m[(compose(row, t), compose(col, t))];
            }
            out[(row, col)] = acc;
        }
    }
    Ok(DensityMatrix(out))
}

/// Data-qubit state `D1 ⊗ D2`.
pub fn data_state(rho: &DensityMatrix) -> DensityMatrix {
    partial_trace(rho, &[Site::D1, Site::D2]).expect("three-qubit state")
}

/// `⟨ψ|ρ|ψ⟩`
pub fn fidelity(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::InvalidInput(format!(
            "fidelity dimension mismatch: state {} vs target {}",
            rho.dim(),
            psi.dim()
        )));
    }
    let v = psi.amplitudes();
    let f = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
    Ok(f.clamp(0.0, 1.0))
}

/// `Tr(Oρ)` for Hermitian `O`.
pub fn expectation(rho: &DensityMatrix, op: &CMatrix) -> Result<f64> {
    if op.shape() != rho.matrix().shape() {
        return Err(Error::InvalidInput(format!(
            "observable shape {:?} does not match state dimension {}",
            op.shape(),
            rho.dim()
        )));
    }
    if hermiticity_error(op) > HERMITIAN_TOL {
        return Err(Error::InvalidInput("observable is not Hermitian".into()));
    }
    let v = (op * rho.matrix()).trace();
    debug_assert!(v.im.abs() < 1e-9, "imaginary expectation {v}");
    Ok(v.re)
}
