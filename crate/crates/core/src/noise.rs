//! Device noise and readout model: Lindblad collapse operators, the always-on
//! residual ZZ Hamiltonian, the ancilla POVM, readout assignment matrices and
//! readout-induced Stark phases.
//!
//! Internal time unit is the nanosecond; rates are in 1/ns and Hamiltonians in rad/ns.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    c, embed_pair, embed_single, kron_all, projector, r, sigma_minus, sigma_z, CMatrix, DensityMatrix,
    Site,
};

/// Coherence times of one transmon, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitParams {
    pub t1_us: f64,
    /// Hahn-echo decay time.
    pub t2_echo_us: f64,
    /// Ramsey decay time.
    pub t2_ramsey_us: f64,
}

impl QubitParams {
    pub const fn new(t1_us: f64, t2_echo_us: f64, t2_ramsey_us: f64) -> Self {
        QubitParams {
            t1_us,
            t2_echo_us,
            t2_ramsey_us,
        }
    }

    pub const NOISELESS: QubitParams = QubitParams::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);

    pub fn t2_us(&self, source: T2Source) -> f64 {
        match source {
            T2Source::Echo => self.t2_echo_us,
            T2Source::Ramsey => self.t2_ramsey_us,
        }
    }
}

/// Which measured T2 feeds the dephasing collapse operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum T2Source {
    #[default]
    Echo,
    Ramsey,
}

/// How the configured residual-ZZ rates enter the Hamiltonian.
///
/// `Angular` uses the number directly as an angular rate (`j` in rad/ms), which
/// reproduces the reference master-equation fidelities. `Cyclic` treats it as
/// `j/2π` and multiplies by 2π, a 2π-times stronger coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZzConvention {
    #[default]
    Angular,
    Cyclic,
}

impl ZzConvention {
    /// Rate in kHz to rad/ns.
    pub fn rad_per_ns(self, khz: f64) -> f64 {
        match self {
            ZzConvention::Angular => khz * 1e-6,
            ZzConvention::Cyclic => 2.0 * PI * khz * 1e-6,
        }
    }
}

/// Raw ancilla readout probabilities `P(measured | prepared)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutProbs {
    pub p0_given0: f64,
    pub p1_given0: f64,
    pub p0_given1: f64,
    pub p1_given1: f64,
}

impl ReadoutProbs {
    pub const IDEAL: ReadoutProbs = ReadoutProbs {
        p0_given0: 1.0,
        p1_given0: 0.0,
        p0_given1: 0.0,
        p1_given1: 1.0,
    };

    /// Columns rescaled so that `P(0|j) + P(1|j) = 1`.
    pub fn normalized(&self) -> ReadoutProbs {
        let s0 = self.p0_given0 + self.p1_given0;
        let s1 = self.p0_given1 + self.p1_given1;
        ReadoutProbs {
            p0_given0: self.p0_given0 / s0,
            p1_given0: self.p1_given0 / s0,
            p0_given1: self.p0_given1 / s1,
            p1_given1: self.p1_given1 / s1,
        }
    }

    /// Row-stochastic 2x2 assignment matrix, row = prepared state.
    pub fn assignment(&self) -> [[f64; 2]; 2] {
        let n = self.normalized();
        [[n.p0_given0, n.p1_given0], [n.p0_given1, n.p1_given1]]
    }
}

/// Device parameters. Defaults are the characterized values of the three-qubit
/// device (D1, A, D2) used for the parity stabilization experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    pub d1: QubitParams,
    pub a: QubitParams,
    pub d2: QubitParams,
    pub t2_source: T2Source,
    /// Residual ZZ rate between D1 and A.
    pub j_d1a_khz: f64,
    /// Residual ZZ rate between D2 and A.
    pub j_d2a_khz: f64,
    pub zz_convention: ZzConvention,
    pub readout: ReadoutProbs,
    /// Correct-assignment probability of the data qubits in multiplexed readout.
    pub assignment_d1: f64,
    pub assignment_d2: f64,
    /// Deterministic phase picked up by the data qubits during ancilla readout.
    pub stark_d1_deg: f64,
    pub stark_d2_deg: f64,
    /// Apply the virtual-Z that undoes the Stark phase.
    pub stark_compensation: bool,
    /// Extra angle added to the compensating virtual-Z.
    pub stark_overcorrection_deg: f64,
    /// Phase-flip channel on the data qubits at ancilla readout.
    pub cross_dephasing: bool,
    pub cross_dephasing_d1: f64,
    pub cross_dephasing_d2: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            d1: QubitParams::new(19.7, 22.4, 12.5),
            a: QubitParams::new(13.7, 14.5, 11.7),
            d2: QubitParams::new(23.4, 15.0, 11.2),
            t2_source: T2Source::Echo,
            j_d1a_khz: 110.0,
            j_d2a_khz: 370.0,
            zz_convention: ZzConvention::Angular,
            readout: ReadoutProbs {
                p0_given0: 0.994,
                p1_given0: 0.0054,
                p0_given1: 0.021,
                p1_given1: 0.9795,
            },
            assignment_d1: 0.987,
            assignment_d2: 0.991,
            stark_d1_deg: 33.4,
            stark_d2_deg: 33.2,
            stark_compensation: true,
            stark_overcorrection_deg: 0.0,
            cross_dephasing: false,
            cross_dephasing_d1: 0.003,
            cross_dephasing_d2: 0.003,
        }
    }
}

impl DeviceParams {
    /// No decoherence, no residual coupling, projective readout, no Stark shift.
    pub fn noiseless() -> Self {
        DeviceParams {
            d1: QubitParams::NOISELESS,
            a: QubitParams::NOISELESS,
            d2: QubitParams::NOISELESS,
            j_d1a_khz: 0.0,
            j_d2a_khz: 0.0,
            readout: ReadoutProbs::IDEAL,
            assignment_d1: 1.0,
            assignment_d2: 1.0,
            stark_d1_deg: 0.0,
            stark_d2_deg: 0.0,
            ..DeviceParams::default()
        }
    }

    pub fn qubit(&self, site: Site) -> &QubitParams {
        match site {
            Site::D1 => &self.d1,
            Site::A => &self.a,
            Site::D2 => &self.d2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for site in Site::ALL {
            let q = self.qubit(site);
            let name = site.to_string().to_lowercase();
            for (key, v) in [
                ("t1_us", q.t1_us),
                ("t2_echo_us", q.t2_echo_us),
                ("t2_ramsey_us", q.t2_ramsey_us),
            ] {
                if v.is_nan() || v <= 0.0 {
                    return Err(Error::param(
                        format!("device.{name}.{key}"),
                        format!("must be > 0, got {v}"),
                    ));
                }
            }
            for (key, t2) in [("t2_echo_us", q.t2_echo_us), ("t2_ramsey_us", q.t2_ramsey_us)] {
                if t2 > 2.0 * q.t1_us {
                    return Err(Error::param(
                        format!("device.{name}.{key}"),
                        format!("T2 = {t2} exceeds 2*T1 = {}", 2.0 * q.t1_us),
                    ));
                }
            }
        }
        for (key, v) in [("j_d1a_khz", self.j_d1a_khz), ("j_d2a_khz", self.j_d2a_khz)] {
            if !v.is_finite() {
                return Err(Error::param(format!("device.{key}"), "must be finite"));
            }
        }
        let ro = &self.readout;
        for (key, p) in [
            ("p0_given0", ro.p0_given0),
            ("p1_given0", ro.p1_given0),
            ("p0_given1", ro.p0_given1),
            ("p1_given1", ro.p1_given1),
        ] {
            check_prob(&format!("device.readout.{key}"), p)?;
        }
        if ro.p0_given0 + ro.p1_given0 <= 0.0 || ro.p0_given1 + ro.p1_given1 <= 0.0 {
            return Err(Error::param("device.readout", "a readout column sums to zero"));
        }
        check_prob("device.assignment_d1", self.assignment_d1)?;
        check_prob("device.assignment_d2", self.assignment_d2)?;
        check_prob("device.cross_dephasing_d1", self.cross_dephasing_d1)?;
        check_prob("device.cross_dephasing_d2", self.cross_dephasing_d2)?;
        for (key, v) in [
            ("stark_d1_deg", self.stark_d1_deg),
            ("stark_d2_deg", self.stark_d2_deg),
            ("stark_overcorrection_deg", self.stark_overcorrection_deg),
        ] {
            if !v.is_finite() {
                return Err(Error::param(format!("device.{key}"), "must be finite"));
            }
        }
        Ok(())
    }
}

fn check_prob(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(field, format!("probability {p} outside [0, 1]")))
    }
}

/// `1/T` in 1/ns for `T` in µs; infinite `T` gives zero.
fn rate_per_ns(t_us: f64) -> f64 {
    1.0 / (t_us * 1e3)
}

/// Relaxation and pure-dephasing rates `(1/T1, ½(1/T2 − 1/(2T1)))` in 1/ns.
pub fn decay_rates(t1_us: f64, t2_us: f64) -> (f64, f64) {
    let g1 = rate_per_ns(t1_us);
    let g2 = rate_per_ns(t2_us);
    (g1, 0.5 * (g2 - 0.5 * g1))
}

/// Six collapse operators: for each of D1, A, D2 the relaxation operator
/// `√(1/T1) σ₋` followed by the dephasing operator `√(½(1/T2 − 1/(2T1))) σ_z`.
pub fn collapse_ops(params: &DeviceParams) -> Result<Vec<CMatrix>> {
    params.validate()?;
    let mut ops = Vec::with_capacity(6);
    for site in Site::ALL {
        let q = params.qubit(site);
        let (g1, gphi) = decay_rates(q.t1_us, q.t2_us(params.t2_source));
        ops.push(embed_single(&(sigma_minus() * r(g1.sqrt())), site)?);
        ops.push(embed_single(&(sigma_z() * r(gphi.max(0.0).sqrt())), site)?);
    }
    Ok(ops)
}

/// `j_D1A |11⟩⟨11|_{D1,A} ⊗ I + j_D2A I ⊗ |11⟩⟨11|_{A,D2}` in rad/ns.
pub fn residual_zz_hamiltonian(params: &DeviceParams) -> CMatrix {
    let p11 = projector(1).kronecker(&projector(1));
    let w1 = params.zz_convention.rad_per_ns(params.j_d1a_khz);
    let w2 = params.zz_convention.rad_per_ns(params.j_d2a_khz);
    embed_pair(&(&p11 * r(w1)), Site::D1, Site::A).unwrap()
        + embed_pair(&(&p11 * r(w2)), Site::A, Site::D2).unwrap()
}

/// Ancilla readout: minimal-disturbance POVM plus the full three-qubit
/// assignment matrix used by the tomography readout.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    /// Outcome +1 (ancilla read as `|0⟩`).
    pub m_plus: CMatrix,
    /// Outcome −1 (ancilla read as `|1⟩`).
    pub m_minus: CMatrix,
    /// `assignment3[ζ][s] = P(assigned s | prepared ζ)`, indices in `D1 A D2` order.
    pub assignment3: [[f64; 8]; 8],
    /// Column-normalized ancilla readout probabilities.
    pub probs: ReadoutProbs,
}

impl MeasurementModel {
    /// Two-qubit `D1 ⊗ D2` assignment matrix (ancilla marginalized out).
    pub fn assignment_data(&self, params: &DeviceParams) -> [[f64; 4]; 4] {
        let d1 = symmetric_assignment(params.assignment_d1);
        let d2 = symmetric_assignment(params.assignment_d2);
        let mut out = [[0.0; 4]; 4];
        for (z, row) in out.iter_mut().enumerate() {
            for (s, v) in row.iter_mut().enumerate() {
                *v = d1[z >> 1][s >> 1] * d2[z & 1][s & 1];
            }
        }
        out
    }
}

fn symmetric_assignment(p: f64) -> [[f64; 2]; 2] {
    [[p, 1.0 - p], [1.0 - p, p]]
}

pub fn build_povm(params: &DeviceParams) -> Result<MeasurementModel> {
    params.validate()?;
    let n = params.readout.normalized();
    let p0 = projector(0);
    let p1 = projector(1);
    let m_plus = &p0 * r(n.p0_given0.sqrt()) + &p1 * r(n.p0_given1.sqrt());
    let m_minus = &p0 * r(n.p1_given0.sqrt()) + &p1 * r(n.p1_given1.sqrt());

    let a = params.readout.assignment();
    let d1 = symmetric_assignment(params.assignment_d1);
    let d2 = symmetric_assignment(params.assignment_d2);
    let mut assignment3 = [[0.0; 8]; 8];
    for (z, row) in assignment3.iter_mut().enumerate() {
        for (s, v) in row.iter_mut().enumerate() {
            *v = d1[z >> 2][s >> 2] * a[(z >> 1) & 1][(s >> 1) & 1] * d2[z & 1][s & 1];
        }
    }

    Ok(MeasurementModel {
        m_plus: embed_single(&m_plus, Site::A)?,
        m_minus: embed_single(&m_minus, Site::A)?,
        assignment3,
        probs: n,
    })
}

/// `exp(−i φ Z / 2)` as a 2x2 matrix.
pub fn rz(phi: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c((phi / 2.0).cos(), -(phi / 2.0).sin()),
            r(0.0),
            r(0.0),
            c((phi / 2.0).cos(), (phi / 2.0).sin()),
        ],
    )
}

fn data_z_rotation(phi_d1: f64, phi_d2: f64) -> CMatrix {
    kron_all(&[rz(phi_d1), CMatrix::identity(2, 2), rz(phi_d2)])
}

/// Readout-induced Stark phase `e^{−iφ_D1 Z_D1/2} e^{−iφ_D2 Z_D2/2}`.
pub fn stark_unitary(params: &DeviceParams) -> CMatrix {
    data_z_rotation(params.stark_d1_deg.to_radians(), params.stark_d2_deg.to_radians())
}

/// Virtual-Z applied after the ancilla readout. The exact inverse of
/// [`stark_unitary`] when the over-correction is zero; identity when disabled.
pub fn stark_compensation(params: &DeviceParams) -> CMatrix {
    if !params.stark_compensation {
        return CMatrix::identity(8, 8);
    }
    let extra = params.stark_overcorrection_deg;
    data_z_rotation(
        -(params.stark_d1_deg + extra).to_radians(),
        -(params.stark_d2_deg + extra).to_radians(),
    )
}

/// Everything the engine needs to evolve and measure the register.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub params: DeviceParams,
    pub collapse: Vec<CMatrix>,
    pub h_zz: CMatrix,
    pub measurement: MeasurementModel,
    pub stark: CMatrix,
    pub stark_compensation: CMatrix,
}

impl NoiseModel {
    pub fn new(params: DeviceParams) -> Result<NoiseModel> {
        params.validate()?;
        Ok(NoiseModel {
            collapse: collapse_ops(&params)?,
            h_zz: residual_zz_hamiltonian(&params),
            measurement: build_povm(&params)?,
            stark: stark_unitary(&params),
            stark_compensation: stark_compensation(&params),
            params,
        })
    }

    pub fn noiseless() -> NoiseModel {
        NoiseModel::new(DeviceParams::noiseless()).expect("noiseless params are valid")
    }

    /// Phase-flip channel on D1 and D2 from the ancilla readout drive; identity when disabled.
    pub fn apply_cross_dephasing(&self, rho: &DensityMatrix) -> DensityMatrix {
        if !self.params.cross_dephasing {
            return rho.clone();
        }
        let mut m = rho.matrix().clone();
        for (site, p) in [
            (Site::D1, self.params.cross_dephasing_d1),
            (Site::D2, self.params.cross_dephasing_d2),
        ] {
            let z = embed_single(&sigma_z(), site).unwrap();
            m = &m * r(1.0 - p) + (&z * &m * &z) * r(p);
        }
        DensityMatrix::from_matrix_unchecked(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{hermiticity_error, PureState};
    use approx::assert_abs_diff_eq;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    #[test]
    fn dephasing_rate_boundaries() {
        let (_, g) = decay_rates(10.0, 10.0);
        assert_abs_diff_eq!(g, 1.0 / (4.0 * 10.0e3), epsilon = 1e-18);
        let (_, g) = decay_rates(10.0, 20.0);
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn default_collapse_rates_are_positive() {
        let ops = collapse_ops(&DeviceParams::default()).unwrap();
        assert_eq!(ops.len(), 6);
        for op in &ops {
            assert!(max_abs(op) > 0.0);
        }
        // D1 relaxation: √(1/19.7 µs)
        assert_abs_diff_eq!(ops[0][(0, 4)].re, (1.0 / 19.7e3_f64).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn t2_above_twice_t1_is_rejected() {
        let mut p = DeviceParams::default();
        p.a.t2_echo_us = 30.0;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("device.a.t2_echo_us"), "{err}");
        assert!(collapse_ops(&p).is_err());
    }

    #[test]
    fn negative_t1_names_field() {
        let mut p = DeviceParams::default();
        p.d2.t1_us = -1.0;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("device.d2.t1_us"), "{err}");
    }

    #[test]
    fn residual_zz_entries() {
        let zero = DeviceParams {
            j_d1a_khz: 0.0,
            j_d2a_khz: 0.0,
            ..DeviceParams::default()
        };
        assert_eq!(residual_zz_hamiltonian(&zero), CMatrix::zeros(8, 8));

        let h = residual_zz_hamiltonian(&DeviceParams {
            zz_convention: ZzConvention::Cyclic,
            ..DeviceParams::default()
        });
        let w1 = 2.0 * PI * 110e3 * 1e-9;
        let w2 = 2.0 * PI * 370e3 * 1e-9;
        assert_abs_diff_eq!(h[(0b110, 0b110)].re, w1, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(0b011, 0b011)].re, w2, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(0b111, 0b111)].re, w1 + w2, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(0b101, 0b101)].re, 0.0);
        assert!(hermiticity_error(&h) == 0.0);
    }

    #[test]
    fn residual_zz_pi_phase_on_110() {
        // Diagonal evolution: phase on |110⟩ after t = 1/(2 j) is 2π j t = π.
        let p = DeviceParams {
            zz_convention: ZzConvention::Cyclic,
            ..DeviceParams::default()
        };
        let h = residual_zz_hamiltonian(&p);
        let t_ns = 1.0 / (2.0 * 110e3) * 1e9;
        let phase = h[(0b110, 0b110)].re * t_ns;
        assert_abs_diff_eq!(phase, PI, epsilon = 1e-12);
    }

    #[test]
    fn angular_convention_is_cyclic_over_two_pi() {
        let angular = residual_zz_hamiltonian(&DeviceParams::default());
        let cyclic = residual_zz_hamiltonian(&DeviceParams {
            zz_convention: ZzConvention::Cyclic,
            ..DeviceParams::default()
        });
        for i in 0..8 {
            assert_abs_diff_eq!(angular[(i, i)].re * 2.0 * PI, cyclic[(i, i)].re, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(angular[(0b011, 0b011)].re, 370e3 * 1e-9, epsilon = 1e-18);
    }

    #[test]
    fn ideal_povm_is_projective() {
        let m = build_povm(&DeviceParams::noiseless()).unwrap();
        assert_eq!(m.m_plus, embed_single(&projector(0), Site::A).unwrap());
        assert_eq!(m.m_minus, embed_single(&projector(1), Site::A).unwrap());
    }

    #[test]
    fn default_povm_probabilities() {
        let m = build_povm(&DeviceParams::default()).unwrap();
        let rho0 = DensityMatrix::ground();
        let p_plus = (&m.m_plus * rho0.matrix() * m.m_plus.adjoint()).trace().re;
        assert_abs_diff_eq!(p_plus, 0.994, epsilon = 1e-3);
        assert_abs_diff_eq!(p_plus, 0.994 / (0.994 + 0.0054), epsilon = 1e-12);

        let rho1 = DensityMatrix::basis(8, 0b010);
        let p_plus1 = (&m.m_plus * rho1.matrix() * m.m_plus.adjoint()).trace().re;
        assert_abs_diff_eq!(p_plus1, 0.021 / (0.021 + 0.9795), epsilon = 1e-12);
        assert_abs_diff_eq!(p_plus1, 0.021, epsilon = 1e-4);
    }

    #[test]
    fn povm_completeness() {
        let m = build_povm(&DeviceParams::default()).unwrap();
        let e = m.m_plus.adjoint() * &m.m_plus + m.m_minus.adjoint() * &m.m_minus;
        assert!(max_abs(&(e - CMatrix::identity(8, 8))) < 1e-12);
    }

    #[test]
    fn assignment_matrix_is_row_stochastic_and_diagonal_dominant() {
        let p = DeviceParams::default();
        let m = build_povm(&p).unwrap();
        for (z, row) in m.assignment3.iter().enumerate() {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(row[z] >= 0.95);
        }
        for row in m.assignment_data(&p) {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stark_examples() {
        let zero = DeviceParams {
            stark_d1_deg: 0.0,
            stark_d2_deg: 0.0,
            ..DeviceParams::default()
        };
        assert!(max_abs(&(stark_unitary(&zero) - CMatrix::identity(8, 8))) < 1e-15);

        let p = DeviceParams::default();
        let net = stark_compensation(&p) * stark_unitary(&p);
        assert!(max_abs(&(net - CMatrix::identity(8, 8))) < 1e-15);

        // Uncompensated: D1 in |+⟩ rotates by 33.4° about z.
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap();
        let ground = PureState::basis(2, 0);
        let psi = plus.kron(&ground).kron(&ground).to_density();
        let out = psi.conjugate_by(&stark_unitary(&p));
        let x = crate::qops::expectation(&out, &crate::qops::pauli_string("XII").unwrap()).unwrap();
        assert_abs_diff_eq!(x, 33.4_f64.to_radians().cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(x, 0.835, epsilon = 1e-3);
    }

    #[test]
    fn cross_dephasing_is_off_by_default() {
        let model = NoiseModel::new(DeviceParams::default()).unwrap();
        let plus = PureState::from_real(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let rho = plus.to_density();
        assert_eq!(model.apply_cross_dephasing(&rho), rho);

        let on = NoiseModel::new(DeviceParams {
            cross_dephasing: true,
            ..DeviceParams::default()
        })
        .unwrap();
        let out = on.apply_cross_dephasing(&rho);
        assert_abs_diff_eq!(out.matrix()[(0, 4)].re, 0.5 * (1.0 - 2.0 * 0.003), epsilon = 1e-15);
    }
}
