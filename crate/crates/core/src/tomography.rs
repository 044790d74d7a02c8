//! Pauli-set tomography: exact expectation values, finite-shot readout with
//! assignment errors, assignment correction, and reconstruction of the
//! nearest physical density matrix.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qops::{c, expectation, parse_pauli_label, pauli_product, r, CMatrix, DensityMatrix, Pauli};

const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// Expectation values keyed by Pauli label (qubit order `D1 A D2`, or `D1 D2`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliSet {
    pub n_qubits: usize,
    pub values: BTreeMap<String, f64>,
}

impl PauliSet {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.values.get(label).copied()
    }
}

fn n_qubits_of(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(1),
        4 => Ok(2),
        8 => Ok(3),
        d => Err(Error::InvalidInput(format!("unsupported state dimension {d}"))),
    }
}

/// All `4^n − 1` non-identity labels in lexicographic I<X<Y<Z order.
pub fn pauli_labels(n: usize) -> Vec<String> {
    let mut labels = vec![String::new()];
    for _ in 0..n {
        labels = labels
            .into_iter()
            .flat_map(|l| LETTERS.iter().map(move |ch| format!("{l}{ch}")))
            .collect();
    }
    labels.retain(|l| l.chars().any(|ch| ch != 'I'));
    labels
}

/// All `3^n` local measurement settings.
pub fn measurement_bases(n: usize) -> Vec<String> {
    let mut bases = vec![String::new()];
    for _ in 0..n {
        bases = bases
            .into_iter()
            .flat_map(|l| ['X', 'Y', 'Z'].into_iter().map(move |ch| format!("{l}{ch}")))
            .collect();
    }
    bases
}

pub fn exact_pauli_set(rho: &DensityMatrix) -> Result<PauliSet> {
    let n = n_qubits_of(rho.dim())?;
    let values = pauli_labels(n)
        .into_iter()
        .map(|label| {
            let op = pauli_product(&parse_pauli_label(&label, n)?);
            Ok((label, expectation(rho, &op)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(PauliSet { n_qubits: n, values })
}

/// Counts over the `2^n` outcomes of one measurement setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotRecord {
    pub basis: String,
    pub counts: Vec<u64>,
    pub shots: u64,
}

/// Single-qubit unitary taking the eigenbasis of `axis` to the computational basis.
fn basis_change(axis: char) -> CMatrix {
    let h = CMatrix::from_row_slice(2, 2, &[r(1.0), r(1.0), r(1.0), r(-1.0)]) * r(0.5_f64.sqrt());
    match axis {
        'X' => h,
        // H S†
        'Y' => h * CMatrix::from_row_slice(2, 2, &[r(1.0), r(0.0), r(0.0), c(0.0, -1.0)]),
        _ => CMatrix::identity(2, 2),
    }
}

/// Outcome distribution of a measurement setting without readout errors.
pub fn ideal_distribution(rho: &DensityMatrix, basis: &str) -> Result<Vec<f64>> {
    let n = n_qubits_of(rho.dim())?;
    if basis.len() != n || !basis.chars().all(|ch| matches!(ch, 'X' | 'Y' | 'Z')) {
        return Err(Error::InvalidInput(format!(
            "measurement basis {basis:?} must be {n} characters over X,Y,Z"
        )));
    }
    let u = basis
        .chars()
        .map(basis_change)
        .reduce(|a, b| a.kronecker(&b))
        .unwrap();
    let rotated = rho.conjugate_by(&u);
    Ok((0..rho.dim())
        .map(|i| rotated.matrix()[(i, i)].re.max(0.0))
        .collect())
}

/// `q[s] = Σ_ζ p[ζ] A[ζ][s]` for row-stochastic `A`.
pub fn apply_assignment(p: &[f64], assignment: &[Vec<f64>]) -> Vec<f64> {
    (0..p.len())
        .map(|s| p.iter().zip(assignment).map(|(pz, row)| pz * row[s]).sum())
        .collect()
}

fn check_assignment(assignment: &[Vec<f64>], dim: usize) -> Result<()> {
    if assignment.len() != dim || assignment.iter().any(|row| row.len() != dim) {
        return Err(Error::InvalidInput(format!("assignment matrix must be {dim}x{dim}")));
    }
    for row in assignment {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("assignment matrix is not row-stochastic".into()));
        }
    }
    Ok(())
}

/// Multinomial draw of `shots` outcomes, through the assignment matrix.
pub fn sample_counts(
    rho: &DensityMatrix,
    basis: &str,
    shots: u64,
    assignment: &[Vec<f64>],
    seed: u64,
) -> Result<ShotRecord> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be >= 1".into()));
    }
    check_assignment(assignment, rho.dim())?;
    let probs = apply_assignment(&ideal_distribution(rho, basis)?, assignment);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0_f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == probs.len() - 1 || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .sample(&mut rng);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    Ok(ShotRecord {
        basis: basis.to_string(),
        counts,
        shots,
    })
}

/// Invert the assignment: solve `Aᵀ x = f` for the ideal outcome distribution.
pub fn correct_frequencies(record: &ShotRecord, assignment: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = record.counts.len();
    check_assignment(assignment, dim)?;
    let f: Vec<f64> = record
        .counts
        .iter()
        .map(|&k| k as f64 / record.shots as f64)
        .collect();
    correct_distribution(&f, assignment)
}

pub fn correct_distribution(f: &[f64], assignment: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = f.len();
    let at = DMatrix::from_fn(dim, dim, |s, z| assignment[z][s]);
    let b = nalgebra::DVector::from_column_slice(f);
    at.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::InvalidInput("assignment matrix is singular".into()))
}

/// Pauli expectations from per-setting outcome distributions, averaging over
/// every setting compatible with each label.
pub fn pauli_set_from_distributions(n: usize, dists: &BTreeMap<String, Vec<f64>>) -> Result<PauliSet> {
    let mut values = BTreeMap::new();
    for label in pauli_labels(n) {
        let support: Vec<(usize, char)> = label
            .chars()
            .enumerate()
            .filter(|(_, ch)| *ch != 'I')
            .collect();
        let mut acc = 0.0;
        let mut used = 0usize;
        for (basis, p) in dists {
            let bchars: Vec<char> = basis.chars().collect();
            if !support.iter().all(|&(i, ch)| bchars.get(i) == Some(&ch)) {
                continue;
            }
            let e: f64 = p
                .iter()
                .enumerate()
                .map(|(outcome, &prob)| {
                    let parity = support
                        .iter()
                        .filter(|&&(i, _)| (outcome >> (n - 1 - i)) & 1 == 1)
                        .count();
                    if parity % 2 == 0 {
                        prob
                    } else {
                        -prob
                    }
                })
                .sum();
            acc += e;
            used += 1;
        }
        if used == 0 {
            return Err(Error::IncompleteBasis(format!("no setting measures {label}")));
        }
        values.insert(label, (acc / used as f64).clamp(-1.0, 1.0));
    }
    Ok(PauliSet { n_qubits: n, values })
}

/// `(I + Σ ⟨P⟩ P) / 2^n`; may be unphysical.
pub fn linear_inversion(set: &PauliSet) -> Result<CMatrix> {
    let n = set.n_qubits;
    let dim = 1 << n;
    let mut m = CMatrix::identity(dim, dim);
    for label in pauli_labels(n) {
        let v = set
            .get(&label)
            .ok_or_else(|| Error::IncompleteBasis(format!("missing expectation for {label}")))?;
        let letters: Vec<Pauli> = parse_pauli_label(&label, n)?;
        m += pauli_product(&letters) * r(v);
    }
    Ok(m / r(dim as f64))
}

/// Euclidean projection of `v` onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Closest unit-trace positive-semidefinite matrix in Frobenius norm.
pub fn project_to_physical(m: &CMatrix) -> DensityMatrix {
    let h = (m + m.adjoint()) * r(0.5);
    let eig = SymmetricEigen::new(h);
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let proj = project_simplex(&vals);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        proj.len(),
        proj.iter().map(|&x| r(x)),
    ));
    let v = &eig.eigenvectors;
    let out = v * d * v.adjoint();
    DensityMatrix::from_matrix_unchecked((&out + out.adjoint()) * r(0.5))
}

/// Linear inversion of a complete Pauli set followed by projection onto physical states.
pub fn mle_reconstruct(set: &PauliSet) -> Result<DensityMatrix> {
    Ok(project_to_physical(&linear_inversion(set)?))
}

/// Finite-shot tomography of `rho`: sample every setting, correct readout,
/// and estimate the Pauli set.
pub fn estimate_pauli_set(
    rho: &DensityMatrix,
    shots: u64,
    assignment: &[Vec<f64>],
    seed: u64,
) -> Result<PauliSet> {
    let n = n_qubits_of(rho.dim())?;
    let mut dists = BTreeMap::new();
    for (i, basis) in measurement_bases(n).into_iter().enumerate() {
        let rec = sample_counts(rho, &basis, shots, assignment, seed.wrapping_add(i as u64))?;
        dists.insert(basis, correct_frequencies(&rec, assignment)?);
    }
    pauli_set_from_distributions(n, &dists)
}

pub fn matrix_rows<const N: usize>(m: &[[f64; N]; N]) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.to_vec()).collect()
}

pub fn identity_assignment(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_povm, DeviceParams};
    use crate::qops::{frobenius, phi_plus, psi_plus, PureState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn label_counts() {
        assert_eq!(pauli_labels(2).len(), 15);
        assert_eq!(pauli_labels(3).len(), 63);
        assert_eq!(measurement_bases(3).len(), 27);
    }

    #[test]
    fn bell_pauli_sets() {
        let phi = exact_pauli_set(&phi_plus().to_density()).unwrap();
        assert_abs_diff_eq!(phi.get("ZZ").unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.get("XX").unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.get("YY").unwrap(), -1.0, epsilon = 1e-15);
        for single in ["XI", "IX", "YI", "IY", "ZI", "IZ"] {
            assert_abs_diff_eq!(phi.get(single).unwrap(), 0.0, epsilon = 1e-15);
        }
        let psi = exact_pauli_set(&psi_plus().to_density()).unwrap();
        assert_abs_diff_eq!(psi.get("ZZ").unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.get("XX").unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.get("YY").unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_assignment_ground_state() {
        let rho = DensityMatrix::ground();
        let rec = sample_counts(&rho, "ZZZ", 1000, &identity_assignment(8), 7).unwrap();
        assert_eq!(rec.counts[0], 1000);
        assert_eq!(rec.counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn invalid_basis_and_shots_rejected() {
        let rho = DensityMatrix::ground();
        assert!(sample_counts(&rho, "ZZ", 10, &identity_assignment(8), 1).is_err());
        assert!(sample_counts(&rho, "ZQZ", 10, &identity_assignment(8), 1).is_err());
        assert!(sample_counts(&rho, "ZZZ", 0, &identity_assignment(8), 1).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let rho = phi_plus().to_density();
        let a = identity_assignment(4);
        let x = sample_counts(&rho, "XY", 5000, &a, 42).unwrap();
        let y = sample_counts(&rho, "XY", 5000, &a, 42).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn default_assignment_on_computational_states() {
        let m = build_povm(&DeviceParams::default()).unwrap();
        let a = matrix_rows(&m.assignment3);
        for z in 0..8 {
            let rec = sample_counts(&DensityMatrix::basis(8, z), "ZZZ", 100_000, &a, z as u64).unwrap();
            assert!(rec.counts[z] as f64 / 1e5 >= 0.95);
        }
    }

    #[test]
    fn assignment_correction_recovers_ideal() {
        let m = build_povm(&DeviceParams::default()).unwrap();
        let a = matrix_rows(&m.assignment3);
        let rho = PureState::from_real(&[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0])
            .unwrap()
            .to_density();
        for basis in ["ZZZ", "XYZ", "YXX"] {
            let ideal = ideal_distribution(&rho, basis).unwrap();
            let observed = apply_assignment(&ideal, &a);
            let back = correct_distribution(&observed, &a).unwrap();
            for (x, y) in ideal.iter().zip(&back) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn exact_distributions_give_exact_pauli_set() {
        let rho = PureState::from_real(&[0.3, 0.1, -0.5, 0.8]).unwrap().to_density();
        let mut dists = BTreeMap::new();
        for b in measurement_bases(2) {
            dists.insert(b.clone(), ideal_distribution(&rho, &b).unwrap());
        }
        let est = pauli_set_from_distributions(2, &dists).unwrap();
        let exact = exact_pauli_set(&rho).unwrap();
        for (k, v) in &exact.values {
            assert_abs_diff_eq!(est.values[k], v, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_round_trip() {
        let rho = PureState::from_real(&[0.3, 0.1, -0.5, 0.8]).unwrap().to_density();
        let set = exact_pauli_set(&rho).unwrap();
        let back = mle_reconstruct(&set).unwrap();
        assert!(frobenius(&(back.matrix() - rho.matrix())) < 1e-9);
    }

    #[test]
    fn unphysical_set_is_projected() {
        let mut set = exact_pauli_set(&phi_plus().to_density()).unwrap();
        set.values.insert("ZZ".into(), 1.05);
        set.values.insert("XX".into(), 1.05);
        let rho = mle_reconstruct(&set).unwrap();
        assert!(rho.min_eigenvalue() >= -1e-12);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_set_rejected() {
        let mut set = exact_pauli_set(&phi_plus().to_density()).unwrap();
        set.values.remove("XY");
        assert!(matches!(mle_reconstruct(&set), Err(Error::IncompleteBasis(_))));
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.2, -0.1]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert_eq!(project_simplex(&[0.25; 4]), vec![0.25; 4]);
    }
}
