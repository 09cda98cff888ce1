//! Electron-nuclear spin operators, the donor Hamiltonian and its transitions.
//!
//! All four-level objects use the product basis
//!
//! | index | state   |
//! |-------|---------|
//! | 0     | `|↑⇑⟩`  |
//! | 1     | `|↑⇓⟩`  |
//! | 2     | `|↓⇑⟩`  |
//! | 3     | `|↓⇓⟩`  |
//!
//! with the electron as the left tensor factor. Energies are in frequency
//! units (Hz). Spin operators are `S = σ/2` and `I = σ/2`, so the contact
//! hyperfine term reads `(A/4) σ⊗σ` and the resonance lines sit at
//! `γe·B0 ± A/2` and `A/2 ± γn·B0`.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type ComplexMatrix4 = Matrix4<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Basis indices, fixed for the whole crate.
pub mod basis {
    pub const UP_UP: usize = 0;
    pub const UP_DOWN: usize = 1;
    pub const DOWN_UP: usize = 2;
    pub const DOWN_DOWN: usize = 3;

    pub const LABELS: [&str; 4] = ["up,Up", "up,Down", "down,Up", "down,Down"];

    /// `+1` for electron `↑`, `-1` for `↓`.
    pub const fn electron_sign(index: usize) -> f64 {
        if index < 2 {
            1.0
        } else {
            -1.0
        }
    }

    /// `+1` for nucleus `⇑`, `-1` for `⇓`.
    pub const fn nuclear_sign(index: usize) -> f64 {
        if index % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[inline]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinTarget {
    Electron,
    Nucleus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

/// Physical constants of the donor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DonorParams {
    /// Electron gyromagnetic ratio magnitude, Hz/T.
    pub gamma_e: f64,
    /// Nuclear gyromagnetic ratio magnitude, Hz/T.
    pub gamma_n: f64,
    /// Contact hyperfine coupling, Hz.
    pub hyperfine_a: f64,
    /// Static field, T.
    pub b0: f64,
}

impl Default for DonorParams {
    fn default() -> Self {
        Self {
            gamma_e: 28.0e9,
            gamma_n: 17.2e6,
            hyperfine_a: 97e6,
            b0: 1.55,
        }
    }
}

impl DonorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("hyperfine_a", self.hyperfine_a),
            ("b0", self.b0),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(())
    }

    pub fn electron_zeeman(&self) -> f64 {
        self.gamma_e * self.b0
    }

    pub fn nuclear_zeeman(&self) -> f64 {
        self.gamma_n * self.b0
    }
}

fn pauli2(axis: PauliAxis) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let one = c(1.0);
    let i = Complex64::new(0.0, 1.0);
    match axis {
        PauliAxis::I => [[one, z], [z, one]],
        PauliAxis::X => [[z, one], [one, z]],
        PauliAxis::Y => [[z, -i], [i, z]],
        PauliAxis::Z => [[one, z], [z, -one]],
    }
}

fn kron2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> ComplexMatrix4 {
    ComplexMatrix4::from_fn(|r, col| a[r / 2][col / 2] * b[r % 2][col % 2])
}

/// `σ_axis ⊗ 1` for the electron or `1 ⊗ σ_axis` for the nucleus, in the
/// physical spin basis (`σz|↑⟩ = +|↑⟩`).
pub fn pauli_operator(target: SpinTarget, axis: PauliAxis) -> ComplexMatrix4 {
    let id = pauli2(PauliAxis::I);
    let s = pauli2(axis);
    match target {
        SpinTarget::Electron => kron2(&s, &id),
        SpinTarget::Nucleus => kron2(&id, &s),
    }
}

pub fn hermiticity_deviation(m: &ComplexMatrix4) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for col in 0..4 {
            worst = worst.max((m[(r, col)] - m[(col, r)].conj()).norm());
        }
    }
    worst
}

fn ensure_hermitian(m: &ComplexMatrix4) -> Result<()> {
    let deviation = hermiticity_deviation(m);
    if deviation > HERMITIAN_TOL * (1.0 + m.norm()) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approximation {
    Full,
    #[default]
    Secular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian4 {
    matrix: ComplexMatrix4,
    approximation: Approximation,
}

impl Hamiltonian4 {
    pub fn new(matrix: ComplexMatrix4, approximation: Approximation) -> Result<Self> {
        ensure_hermitian(&matrix)?;
        Ok(Self {
            matrix,
            approximation,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix4 {
        &self.matrix
    }

    pub fn approximation(&self) -> Approximation {
        self.approximation
    }
}

/// Donor Hamiltonian in Hz.
///
/// The nuclear Zeeman term enters with a negative sign relative to the
/// electron term, which places the electron-`↓` NMR line at `A/2 + γn·B0`.
pub fn build_hamiltonian(p: &DonorParams, approx: Approximation) -> Hamiltonian4 {
    let sz = pauli_operator(SpinTarget::Electron, PauliAxis::Z) * c(0.5);
    let iz = pauli_operator(SpinTarget::Nucleus, PauliAxis::Z) * c(0.5);
    let zz = pauli_operator(SpinTarget::Electron, PauliAxis::Z)
        * pauli_operator(SpinTarget::Nucleus, PauliAxis::Z);
    let mut h = sz * c(p.electron_zeeman()) - iz * c(p.nuclear_zeeman()) + zz * c(p.hyperfine_a / 4.0);
    if approx == Approximation::Full {
        let flip_flop = pauli_operator(SpinTarget::Electron, PauliAxis::X)
            * pauli_operator(SpinTarget::Nucleus, PauliAxis::X)
            + pauli_operator(SpinTarget::Electron, PauliAxis::Y)
                * pauli_operator(SpinTarget::Nucleus, PauliAxis::Y);
        h += flip_flop * c(p.hyperfine_a / 4.0);
    }
    Hamiltonian4 {
        matrix: h,
        approximation: approx,
    }
}

#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Ascending, Hz.
    pub values: [f64; 4],
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix4,
}

pub fn eigensystem(h: &Hamiltonian4) -> Eigensystem {
    eigensystem_of(h.matrix()).expect("Hamiltonian4 is Hermitian by construction")
}

/// Eigen-decomposition of an arbitrary Hermitian 4×4 matrix.
pub fn eigensystem_of(m: &ComplexMatrix4) -> Result<Eigensystem> {
    ensure_hermitian(m)?;
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|k| eig.eigenvalues[k]);
    let vectors = ComplexMatrix4::from_fn(|r, col| eig.eigenvectors[(r, order[col])]);
    Ok(Eigensystem { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionFrequencies {
    /// ESR line with the nucleus `⇑`.
    pub nu_mw_up: f64,
    /// ESR line with the nucleus `⇓`.
    pub nu_mw_down: f64,
    /// NMR line with the electron `↓`.
    pub nu_rf_down: f64,
    /// NMR line with the electron `↑`.
    pub nu_rf_up: f64,
}

pub fn transition_frequencies(p: &DonorParams) -> TransitionFrequencies {
    let half_a = p.hyperfine_a / 2.0;
    TransitionFrequencies {
        nu_mw_up: p.electron_zeeman() + half_a,
        nu_mw_down: p.electron_zeeman() - half_a,
        nu_rf_down: half_a + p.nuclear_zeeman(),
        nu_rf_up: half_a - p.nuclear_zeeman(),
    }
}

/// Four-level density matrix in the fixed product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix4 {
    matrix: ComplexMatrix4,
}

impl DensityMatrix4 {
    pub fn new(matrix: ComplexMatrix4) -> Result<Self> {
        let deviation = hermiticity_deviation(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {deviation:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} != 1")));
        }
        let min = SymmetricEigen::new(matrix)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Symmetrises and renormalises a propagated matrix without checks.
    pub(crate) fn from_propagated(matrix: ComplexMatrix4) -> Self {
        let sym = (matrix + matrix.adjoint()) * c(0.5);
        let tr = sym.trace().re;
        Self { matrix: sym / c(tr) }
    }

    pub fn basis_state(index: usize) -> Self {
        assert!(index < 4, "basis index out of range");
        let mut m = ComplexMatrix4::zeros();
        m[(index, index)] = c(1.0);
        Self { matrix: m }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            matrix: ComplexMatrix4::identity() * c(0.25),
        }
    }

    pub fn from_pure(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let scale = norm.sqrt();
        let v = amplitudes.map(|a| a / scale);
        Ok(Self {
            matrix: ComplexMatrix4::from_fn(|r, col| v[r] * v[col].conj()),
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix4 {
        &self.matrix
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// Probability of finding the electron `↑`.
    pub fn electron_up_probability(&self) -> f64 {
        self.population(basis::UP_UP) + self.population(basis::UP_DOWN)
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &ComplexMatrix4) -> Self {
        Self::from_propagated(u * self.matrix * u.adjoint())
    }
}

/// `Tr(ρ·obs)`.
pub fn expectation(rho: &DensityMatrix4, obs: &ComplexMatrix4) -> Result<f64> {
    ensure_hermitian(obs)?;
    let value = (rho.matrix() * obs).trace();
    debug_assert!(value.im.abs() < 1e-10, "imaginary residue {}", value.im);
    Ok(value.re)
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix4) -> f64 {
    (rho.matrix() * rho.matrix()).trace().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(m: &ComplexMatrix4) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| m[(k, k)].re)
    }

    fn is_diagonal(m: &ComplexMatrix4) -> bool {
        (0..4).all(|r| (0..4).all(|col| r == col || m[(r, col)].norm() == 0.0))
    }

    #[test]
    fn pauli_z_follows_basis_ordering() {
        let ez = pauli_operator(SpinTarget::Electron, PauliAxis::Z);
        let nz = pauli_operator(SpinTarget::Nucleus, PauliAxis::Z);
        assert!(is_diagonal(&ez) && is_diagonal(&nz));
        assert_eq!(diag(&ez), [1.0, 1.0, -1.0, -1.0]);
        assert_eq!(diag(&nz), [1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn paulis_are_involutions() {
        for target in [SpinTarget::Electron, SpinTarget::Nucleus] {
            for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
                let p = pauli_operator(target, axis);
                assert!((p * p - ComplexMatrix4::identity()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn secular_hamiltonian_is_diagonal() {
        let h = build_hamiltonian(&DonorParams::default(), Approximation::Secular);
        assert!(is_diagonal(h.matrix()));
    }

    #[test]
    fn full_hamiltonian_couples_flip_flop_pair() {
        let h = build_hamiltonian(&DonorParams::default(), Approximation::Full);
        let element = h.matrix()[(basis::DOWN_UP, basis::UP_DOWN)];
        assert_relative_eq!(element.re, 48.5e6, max_relative = 1e-15);
        assert_eq!(element.im, 0.0);
    }

    #[test]
    fn full_minus_secular_lives_on_flip_flop_block() {
        let p = DonorParams::default();
        let diff = build_hamiltonian(&p, Approximation::Full).matrix()
            - build_hamiltonian(&p, Approximation::Secular).matrix();
        for r in 0..4 {
            for col in 0..4 {
                let inside = [basis::UP_DOWN, basis::DOWN_UP].contains(&r)
                    && [basis::UP_DOWN, basis::DOWN_UP].contains(&col);
                if !inside {
                    assert_eq!(diff[(r, col)].norm(), 0.0, "({r},{col})");
                }
            }
        }
    }

    #[test]
    fn zero_hyperfine_is_pure_zeeman() {
        // Bypasses validation on purpose: A = 0 is a limiting case.
        let p = DonorParams {
            hyperfine_a: 0.0,
            ..DonorParams::default()
        };
        for approx in [Approximation::Full, Approximation::Secular] {
            let h = build_hamiltonian(&p, approx);
            assert!(is_diagonal(h.matrix()));
            let (e, n) = (p.electron_zeeman() / 2.0, p.nuclear_zeeman() / 2.0);
            assert_eq!(diag(h.matrix()), [e - n, e + n, -e - n, -e + n]);
            let eig = eigensystem(&h);
            let mut expected = [e - n, e + n, -e - n, -e + n];
            expected.sort_by(f64::total_cmp);
            for (a, b) in eig.values.iter().zip(expected) {
                assert_relative_eq!(*a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn secular_eigenvectors_are_computational_basis() {
        let eig = eigensystem(&build_hamiltonian(&DonorParams::default(), Approximation::Secular));
        for col in 0..4 {
            let weights: Vec<f64> = (0..4).map(|r| eig.vectors[(r, col)].norm_sqr()).collect();
            let max = weights.iter().copied().fold(0.0, f64::max);
            assert!((max - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_eigenvector_overlap_matches_two_level_oracle() {
        let p = DonorParams::default();
        let eig = eigensystem(&build_hamiltonian(&p, Approximation::Full));
        // Independent 2x2 diagonalisation of the {|↑⇓⟩, |↓⇑⟩} block.
        let e_ud = p.electron_zeeman() / 2.0 + p.nuclear_zeeman() / 2.0 - p.hyperfine_a / 4.0;
        let e_du = -p.electron_zeeman() / 2.0 - p.nuclear_zeeman() / 2.0 - p.hyperfine_a / 4.0;
        let coupling = p.hyperfine_a / 2.0;
        let theta = 0.5 * (2.0 * coupling / (e_ud - e_du)).atan();
        let oracle_overlap = theta.cos().powi(2);
        assert!(oracle_overlap > 0.999);
        // The eigenvector dominated by |↓⇑⟩.
        let best = (0..4)
            .map(|col| eig.vectors[(basis::DOWN_UP, col)].norm_sqr())
            .fold(0.0, f64::max);
        assert_relative_eq!(best, oracle_overlap, max_relative = 1e-9);
    }

    #[test]
    fn eigensystem_reconstructs_and_is_orthonormal() {
        let h = build_hamiltonian(&DonorParams::default(), Approximation::Full);
        let eig = eigensystem(&h);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let v = eig.vectors;
        assert!((v.adjoint() * v - ComplexMatrix4::identity()).norm() < ORTHONORMAL_TOL);
        let d = ComplexMatrix4::from_diagonal(&nalgebra::Vector4::from(eig.values.map(c)));
        let rebuilt = v * d * v.adjoint();
        assert!((rebuilt - h.matrix()).norm() / h.matrix().norm() < 1e-9);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = ComplexMatrix4::identity();
        m[(0, 1)] = c(1.0);
        assert!(matches!(eigensystem_of(&m), Err(Error::NotHermitian { .. })));
        let rho = DensityMatrix4::maximally_mixed();
        assert!(expectation(&rho, &m).is_err());
    }

    #[test]
    fn default_transition_frequencies() {
        let f = transition_frequencies(&DonorParams::default());
        assert_relative_eq!(f.nu_mw_up, 43.4485e9, max_relative = 1e-12);
        assert_relative_eq!(f.nu_mw_down, 43.3515e9, max_relative = 1e-12);
        assert_relative_eq!(f.nu_rf_down, 75.16e6, max_relative = 1e-12);
        assert_relative_eq!(f.nu_rf_up, 21.84e6, max_relative = 1e-12);
    }

    #[test]
    fn transitions_are_secular_energy_gaps() {
        let p = DonorParams::default();
        let h = build_hamiltonian(&p, Approximation::Secular);
        let e = diag(h.matrix());
        let f = transition_frequencies(&p);
        use basis::*;
        assert_relative_eq!(e[UP_UP] - e[DOWN_UP], f.nu_mw_up, max_relative = 1e-12);
        assert_relative_eq!(e[UP_DOWN] - e[DOWN_DOWN], f.nu_mw_down, max_relative = 1e-12);
        assert_relative_eq!(e[DOWN_DOWN] - e[DOWN_UP], f.nu_rf_down, max_relative = 1e-9);
        assert_relative_eq!(e[UP_UP] - e[UP_DOWN], f.nu_rf_up, max_relative = 1e-9);
    }

    #[test]
    fn zero_field_collapses_lines() {
        let p = DonorParams {
            b0: 0.0,
            ..DonorParams::default()
        };
        let f = transition_frequencies(&p);
        assert_eq!(f.nu_mw_up, f.nu_rf_down);
        assert_eq!(f.nu_mw_up, p.hyperfine_a / 2.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn expectation_examples() {
        let ez = pauli_operator(SpinTarget::Electron, PauliAxis::Z);
        let rho = DensityMatrix4::basis_state(basis::DOWN_UP);
        assert_eq!(expectation(&rho, &ez).unwrap(), -1.0);
        let mixed = DensityMatrix4::maximally_mixed();
        for target in [SpinTarget::Electron, SpinTarget::Nucleus] {
            for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
                assert_eq!(expectation(&mixed, &pauli_operator(target, axis)).unwrap(), 0.0);
            }
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus_x = DensityMatrix4::from_pure([c(h), c(0.0), c(h), c(0.0)]).unwrap();
        let ex = pauli_operator(SpinTarget::Electron, PauliAxis::X);
        assert_relative_eq!(expectation(&plus_x, &ex).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn purity_examples() {
        assert_relative_eq!(purity(&DensityMatrix4::basis_state(2)), 1.0);
        assert_relative_eq!(purity(&DensityMatrix4::maximally_mixed()), 0.25);
        let mut m = ComplexMatrix4::zeros();
        m[(0, 0)] = c(0.5);
        m[(3, 3)] = c(0.5);
        assert_relative_eq!(purity(&DensityMatrix4::new(m).unwrap()), 0.5);
    }

    #[test]
    fn density_validation() {
        let mut m = ComplexMatrix4::identity() * c(0.5);
        assert!(DensityMatrix4::new(m).is_err());
        m = ComplexMatrix4::zeros();
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(DensityMatrix4::new(m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unitary_from(angles: [f64; 6]) -> ComplexMatrix4 {
            let gens = [
                pauli_operator(SpinTarget::Electron, PauliAxis::X),
                pauli_operator(SpinTarget::Electron, PauliAxis::Y),
                pauli_operator(SpinTarget::Nucleus, PauliAxis::X),
                pauli_operator(SpinTarget::Nucleus, PauliAxis::Z),
                pauli_operator(SpinTarget::Electron, PauliAxis::X)
                    * pauli_operator(SpinTarget::Nucleus, PauliAxis::Y),
                pauli_operator(SpinTarget::Electron, PauliAxis::Z)
                    * pauli_operator(SpinTarget::Nucleus, PauliAxis::X),
            ];
            let mut h = ComplexMatrix4::zeros();
            for (g, a) in gens.iter().zip(angles) {
                h += g * c(a);
            }
            let eig = eigensystem_of(&h).unwrap();
            let phases = nalgebra::Vector4::from(
                eig.values.map(|e| Complex64::from_polar(1.0, -e)),
            );
            eig.vectors * ComplexMatrix4::from_diagonal(&phases) * eig.vectors.adjoint()
        }

        proptest! {
            #[test]
            fn purity_is_unitarily_invariant(
                angles in prop::array::uniform6(-3.0f64..3.0),
                pops in prop::array::uniform4(0.0f64..1.0),
            ) {
                let total: f64 = pops.iter().sum::<f64>() + 1e-9;
                let d = nalgebra::Vector4::from(pops.map(|p| c(p / total)));
                let mut m = ComplexMatrix4::from_diagonal(&d);
                let tr = m.trace().re;
                m[(0, 0)] += c(1.0 - tr);
                let rho = DensityMatrix4::new(m).unwrap();
                let u = unitary_from(angles);
                prop_assert!((purity(&rho) - purity(&rho.evolve(&u))).abs() < 1e-12);
            }
        }
    }
}
