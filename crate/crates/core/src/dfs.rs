//! Decoherence-free-subspace encoding on physical qubits with XY exchange.
//!
//! Qubits are ordered left to right in bit strings, the leftmost being the
//! most significant bit of the basis index. One logical qubit uses
//! `q₁ q₂ A₁` with `|0⟩_L = |100⟩`, `|1⟩_L = |010⟩`, `|A₁⟩ = |001⟩`. Two
//! logical qubits use `q₁ q₂ A₁ q₃ q₄ A₂`, and the entangling coupling acts
//! between `q₂` and `q₃`, `q₄`.
//!
//! Every state in these subspaces carries the same number of excitations per
//! block, so collective dephasing only adds a global phase.

use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_unitary, LindbladChannel, LindbladSpec};
use crate::error::{Error, Result};
use crate::linalg::{cis, kron, pauli, ComplexMatrix, StateVector, C64, ONE, ZERO};
use crate::metrics::unitary_six_state_fidelity;
use crate::model::ErrorModel;
use crate::pulses::Schedule;

/// `op` acting on qubit `j` (0 = leftmost) of an `n`-qubit register.
pub fn qubit_operator(n: usize, j: usize, op: &ComplexMatrix) -> ComplexMatrix {
    assert!(j < n, "qubit {j} out of range for {n} qubits");
    (0..n)
        .map(|k| if k == j { op.clone() } else { pauli::identity() })
        .reduce(|acc, m| kron(&acc, &m))
        .expect("n > 0")
}

/// `S_j⁺ S_k⁻`
fn hop(n: usize, up: usize, down: usize) -> ComplexMatrix {
    &qubit_operator(n, up, &pauli::raising()) * &qubit_operator(n, down, &pauli::lowering())
}

fn plus_hc(m: ComplexMatrix) -> ComplexMatrix {
    let d = m.dagger();
    &m + &d
}

/// `J₁ e^{−iφ₁} S₁⁺S_A⁻ + J₂ e^{−iφ₂} S₂⁺S_A⁻ + h.c.` on three qubits.
pub fn physical_hamiltonian_1(j1: f64, j2: f64, phi1: f64, phi2: f64) -> ComplexMatrix {
    let a = hop(3, 0, 2).scale(cis(-phi1) * j1);
    let b = hop(3, 1, 2).scale(cis(-phi2) * j2);
    plus_hc(&a + &b)
}

/// `g₁ e^{−iφ₃} S₂⁺S₃⁻ + g₂ e^{−iφ₄} S₂⁺S₄⁻ + h.c.` on six qubits.
pub fn physical_hamiltonian_2(g1: f64, g2: f64, phi3: f64, phi4: f64) -> ComplexMatrix {
    let a = hop(6, 1, 3).scale(cis(-phi3) * g1);
    let b = hop(6, 1, 4).scale(cis(-phi4) * g2);
    plus_hc(&a + &b)
}

/// [`physical_hamiltonian_2`] written directly on the logical ordering
/// `{|00⟩, |01⟩, |A₁⟩, |10⟩, |11⟩, |A₂⟩}`.
pub fn logical_pair_hamiltonian(g1: f64, g2: f64, phi3: f64, phi4: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(6);
    m[(2, 0)] = cis(-phi3) * g1;
    m[(2, 1)] = cis(-phi4) * g2;
    m[(5, 3)] = cis(phi4) * g2;
    m[(5, 4)] = cis(phi3) * g1;
    plus_hc(m)
}

/// Total excitation number `Σ_j |1⟩⟨1|_j`.
pub fn number_operator(n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let diag: Vec<C64> = (0..dim).map(|i| C64::from(i.count_ones() as f64)).collect();
    ComplexMatrix::diagonal(&diag)
}

/// Collective `Σ_j σ_z,j / 2` with `σ_z = |0⟩⟨0| − |1⟩⟨1|`.
pub fn collective_z(n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let diag: Vec<C64> = (0..dim)
        .map(|i| C64::from((n as f64 - 2.0 * i.count_ones() as f64) / 2.0))
        .collect();
    ComplexMatrix::diagonal(&diag)
}

/// Map from logical labels to physical basis indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalEncoding {
    pub n_physical: usize,
    pub basis: Vec<LogicalState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalState {
    pub label: String,
    pub bits: String,
    pub index: usize,
    pub auxiliary: bool,
}

impl LogicalEncoding {
    fn from_table(n_physical: usize, table: &[(&str, &str)]) -> Self {
        let basis = table
            .iter()
            .map(|&(label, bits)| LogicalState {
                label: label.to_string(),
                bits: bits.to_string(),
                index: usize::from_str_radix(bits, 2).expect("static bit string"),
                auxiliary: label.starts_with('A'),
            })
            .collect();
        Self { n_physical, basis }
    }

    pub fn single() -> Self {
        Self::from_table(3, &[("0", "100"), ("1", "010"), ("A1", "001")])
    }

    pub fn pair() -> Self {
        Self::from_table(
            6,
            &[
                ("00", "100100"),
                ("01", "100010"),
                ("A1", "110000"),
                ("10", "010100"),
                ("11", "010010"),
                ("A2", "000110"),
            ],
        )
    }

    pub fn dim(&self) -> usize {
        1 << self.n_physical
    }

    /// Physical indices of the whole subspace, in logical order.
    pub fn indices(&self) -> Vec<usize> {
        self.basis.iter().map(|s| s.index).collect()
    }

    pub fn computational_indices(&self) -> Vec<usize> {
        self.basis.iter().filter(|s| !s.auxiliary).map(|s| s.index).collect()
    }

    pub fn aux_indices(&self) -> Vec<usize> {
        self.basis.iter().filter(|s| s.auxiliary).map(|s| s.index).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.basis.iter().find(|s| s.label == label).map(|s| s.index)
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> ComplexMatrix {
        let mut p = ComplexMatrix::zeros(self.dim());
        for s in &self.basis {
            p[(s.index, s.index)] = ONE;
        }
        p
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Three-qubit circuit taking `(a|1⟩ + b|0⟩)|0⟩|0⟩` to `a|100⟩ + b|010⟩`:
/// NOT on `q₂`, then CNOT with `q₁` as control and `q₂` as target.
pub fn encoder_unitary() -> ComplexMatrix {
    let cnot = ComplexMatrix::from_fn(8, |i, j| {
        let control = (j >> 2) & 1;
        if i == j ^ (control << 1) {
            ONE
        } else {
            ZERO
        }
    });
    let not2 = qubit_operator(3, 1, &pauli::x());
    &cnot * &not2
}

/// Encodes `a|0⟩_L + b|1⟩_L` as `a|100⟩ + b|010⟩`.
pub fn encode_single(a: C64, b: C64) -> Result<StateVector> {
    let input = StateVector::normalized_checked(vec![b, ZERO, ZERO, ZERO, a, ZERO, ZERO, ZERO])?;
    Ok(encoder_unitary().apply(&input))
}

/// Inverse of [`encode_single`]. Fails if the state has weight outside the
/// logical subspace.
pub fn decode_single(state: &StateVector) -> Result<(C64, C64)> {
    if state.dim() != 8 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            found: state.dim(),
        });
    }
    let back = encoder_unitary().dagger().apply(state);
    let kept = back[0].norm_sqr() + back[4].norm_sqr();
    let total = back.norm().powi(2);
    if total - kept > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "state has weight {:.3e} outside the logical subspace",
            total - kept
        )));
    }
    Ok((back[4], back[0]))
}

/// `1 − min_ψ ‖P U |ψ⟩‖²` over the encoding's basis states.
pub fn leakage(u: &ComplexMatrix, encoding: &LogicalEncoding) -> Result<f64> {
    if u.dim() != encoding.dim() {
        return Err(Error::DimensionMismatch {
            expected: encoding.dim(),
            found: u.dim(),
        });
    }
    let idx = encoding.indices();
    let worst = idx
        .iter()
        .map(|&col| idx.iter().map(|&row| u[(row, col)].norm_sqr()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok((1.0 - worst).max(0.0))
}

/// Spread (max − min) of the closed-system six-state gate fidelity over
/// `deltas` at fixed `epsilon`. The detuning term is the schedule's
/// register projector, so on an encoded register it is the identity on the
/// DFS and only adds a global phase.
pub fn collective_z_immunity(schedule: &Schedule, epsilon: f64, deltas: &[f64]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::param("delta grid is empty"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &delta in deltas {
        let err = ErrorModel::new(epsilon, delta)?;
        let u = propagate_unitary(schedule, &err)?;
        let f = unitary_six_state_fidelity(schedule, &u)?;
        lo = lo.min(f);
        hi = hi.max(f);
    }
    Ok(hi - lo)
}

/// How physical qubits dephase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingModel {
    /// A single channel `Σ_j σ_z,j / 2`, shared by all qubits.
    #[default]
    Collective,
    /// Independent `σ_z,j / 2` on each qubit.
    PerQubit,
}

/// Decay `S_j⁻` on every qubit plus dephasing, all at rate `gamma`.
pub fn physical_noise(n: usize, gamma: f64, dephasing: DephasingModel) -> Result<LindbladSpec> {
    let mut channels = Vec::new();
    for j in 0..n {
        channels.push(LindbladChannel::new(
            format!("decay_q{}", j + 1),
            gamma,
            qubit_operator(n, j, &pauli::lowering()),
        ));
    }
    match dephasing {
        DephasingModel::Collective => {
            channels.push(LindbladChannel::new("dephasing_collective", gamma, collective_z(n)));
        }
        DephasingModel::PerQubit => {
            for j in 0..n {
                channels.push(LindbladChannel::new(
                    format!("dephasing_q{}", j + 1),
                    gamma,
                    qubit_operator(n, j, &pauli::z()).scale_real(0.5),
                ));
            }
        }
    }
    LindbladSpec::new(1 << n, channels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_maps_basis_states() {
        let zero = encode_single(ONE, ZERO).unwrap();
        let one = encode_single(ZERO, ONE).unwrap();
        assert!((zero[0b100] - ONE).norm() < 1e-15);
        assert!((one[0b010] - ONE).norm() < 1e-15);
        let (a, b) = decode_single(&encode_single(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap())
            .unwrap();
        assert!((a - C64::new(0.6, 0.0)).norm() < 1e-15);
        assert!((b - C64::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn decode_rejects_leaked_state() {
        assert!(decode_single(&StateVector::basis(8, 0b001)).is_err());
        assert!(decode_single(&StateVector::basis(4, 0)).is_err());
    }

    #[test]
    fn logical_pair_hamiltonian_is_the_restriction() {
        let enc = LogicalEncoding::pair();
        let full = physical_hamiltonian_2(0.3, 0.7, 0.4, -1.1);
        let small = logical_pair_hamiltonian(0.3, 0.7, 0.4, -1.1);
        assert!(full.restrict(&enc.indices()).max_abs_diff(&small) < 1e-15);
    }

    #[test]
    fn single_hamiltonian_matches_three_level_drive() {
        use crate::model::{drive_hamiltonian, GateSpec};
        let spec = GateSpec::new(1.1, 0.7, 0.5, 0.2).unwrap();
        let phase = 0.9;
        let (s, c) = (spec.theta / 2.0).sin_cos();
        let full = physical_hamiltonian_1(s, c, phase, phase - spec.phi + std::f64::consts::PI);
        let small = drive_hamiltonian(&spec, 1.0, phase);
        let enc = LogicalEncoding::single();
        assert!(full.restrict(&enc.indices()).max_abs_diff(&small) < 1e-15);
    }

    #[test]
    fn hamiltonians_conserve_excitations_and_collective_z() {
        let h1 = physical_hamiltonian_1(0.4, 0.9, 0.1, 2.0);
        let h2 = physical_hamiltonian_2(0.4, 0.9, 0.1, 2.0);
        assert!(h1.commutator(&number_operator(3)).frobenius_norm() < 1e-14);
        assert!(h2.commutator(&number_operator(6)).frobenius_norm() < 1e-14);
        assert!(h2.commutator(&collective_z(6)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn encodings_have_expected_indices() {
        assert_eq!(LogicalEncoding::single().indices(), vec![4, 2, 1]);
        assert_eq!(LogicalEncoding::pair().indices(), vec![36, 34, 48, 20, 18, 6]);
        assert_eq!(LogicalEncoding::pair().computational_indices(), vec![36, 34, 20, 18]);
    }

    #[test]
    fn leakage_of_identity_and_swap_out() {
        let enc = LogicalEncoding::single();
        assert!(leakage(&ComplexMatrix::identity(8), &enc).unwrap() < 1e-15);
        let x = qubit_operator(3, 2, &pauli::x());
        assert!((leakage(&x, &enc).unwrap() - 1.0).abs() < 1e-15);
    }
}
