//! Process matrices in the operator basis `{I, X, iY, Z}`.
//!
//! `ξ(ρ) = Σ χ_mn E_m ρ E_n†`. With `iY` instead of `Y` the χ of a real
//! process stays real. `χ_kk` is the fidelity of the process to `E_k`.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{pauli, ComplexMatrix2, InputState, QubitState};
use crate::spin::c;

use super::mle::{mle_project, MleOptions, MleResult, OutputSigma};

pub type ChiMatrix = Matrix4<Complex64>;

pub const BASIS_LABELS: [&str; 4] = ["I", "X", "iY", "Z"];

/// `[I, X, iY, Z]`.
pub fn operator_basis() -> [ComplexMatrix2; 4] {
    let i = Complex64::new(0.0, 1.0);
    [pauli(0), pauli(1), pauli(2) * i, pauli(3)]
}

pub fn apply_chi(chi: &ChiMatrix, rho: &ComplexMatrix2) -> ComplexMatrix2 {
    let e = operator_basis();
    let mut out = ComplexMatrix2::zeros();
    for m in 0..4 {
        for n in 0..4 {
            if chi[(m, n)] != c(0.0) {
                out += e[m] * rho * e[n].adjoint() * chi[(m, n)];
            }
        }
    }
    out
}

/// `Σ χ_mn E_n† E_m`; the identity for a trace-preserving process.
pub fn tp_matrix(chi: &ChiMatrix) -> ComplexMatrix2 {
    let e = operator_basis();
    let mut out = ComplexMatrix2::zeros();
    for m in 0..4 {
        for n in 0..4 {
            out += e[n].adjoint() * e[m] * chi[(m, n)];
        }
    }
    out
}

/// Frobenius norm of `Σ χ_mn E_n† E_m − 1`.
pub fn tp_residual(chi: &ChiMatrix) -> f64 {
    (tp_matrix(chi) - ComplexMatrix2::identity()).norm()
}

/// Hermiticity, positivity and trace-preservation of a χ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physicality {
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub tp_residual: f64,
}

impl Physicality {
    pub fn of(chi: &ChiMatrix) -> Self {
        let herm = (chi - chi.adjoint()).camax();
        let sym = (chi + chi.adjoint()) * c(0.5);
        let eig = nalgebra::SymmetricEigen::new(sym);
        Self {
            hermiticity: herm,
            min_eigenvalue: eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
            tp_residual: tp_residual(chi),
        }
    }

    pub fn is_physical(&self, herm_tol: f64, eig_tol: f64, tp_tol: f64) -> bool {
        self.hermiticity <= herm_tol && self.min_eigenvalue >= -eig_tol && self.tp_residual <= tp_tol
    }
}

/// χ for a unitary: `c c†` with `c_m = Tr(E_m† U)/2`.
pub fn chi_of_unitary(u: &ComplexMatrix2) -> ChiMatrix {
    let e = operator_basis();
    let coeffs = e.map(|em| (em.adjoint() * u).trace() * 0.5);
    ChiMatrix::from_fn(|m, n| coeffs[m] * coeffs[n].conj())
}

/// χ of an arbitrary linear map, by linear inversion on the standard
/// inputs.
pub fn chi_of_channel(channel: impl Fn(&ComplexMatrix2) -> ComplexMatrix2) -> Result<ChiMatrix> {
    let inputs = standard_inputs();
    let outputs: Vec<ComplexMatrix2> = inputs.iter().map(&channel).collect();
    linear_inversion(&inputs, &outputs)
}

/// Density matrices of `+X, +Y, +Z, −Z` in report order.
pub fn standard_inputs() -> Vec<ComplexMatrix2> {
    InputState::PROCESS_SET
        .iter()
        .map(|s| *QubitState::of(*s).matrix())
        .collect()
}

/// Solves `ξ(ρ_j) = Σ χ_mn E_m ρ_j E_n†` for χ over four inputs.
pub fn linear_inversion(inputs: &[ComplexMatrix2], outputs: &[ComplexMatrix2]) -> Result<ChiMatrix> {
    if inputs.len() != 4 || outputs.len() != 4 {
        return Err(Error::Singular(format!(
            "need 4 input/output pairs, got {}/{}",
            inputs.len(),
            outputs.len()
        )));
    }
    let e = operator_basis();
    let mut a = DMatrix::<Complex64>::zeros(16, 16);
    let mut b = DVector::<Complex64>::zeros(16);
    for (j, (rho, out)) in inputs.iter().zip(outputs).enumerate() {
        for m in 0..4 {
            for n in 0..4 {
                let term = e[m] * rho * e[n].adjoint();
                for r in 0..2 {
                    for col in 0..2 {
                        a[(4 * j + 2 * r + col, 4 * m + n)] = term[(r, col)];
                    }
                }
            }
        }
        for r in 0..2 {
            for col in 0..2 {
                b[4 * j + 2 * r + col] = out[(r, col)];
            }
        }
    }
    let sv = a.clone().svd(false, false).singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
    if !(lo > 1e-10 * hi) {
        return Err(Error::Singular("input states do not span the operator space".into()));
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("linear inversion failed".into()))?;
    Ok(ChiMatrix::from_fn(|m, n| x[4 * m + n]))
}

/// `S = diag(1, 1, i, 1)` maps the `{I, X, iY, Z}` coefficients onto
/// `{I, X, Y, Z}`.
fn basis_change() -> ChiMatrix {
    ChiMatrix::from_diagonal(&nalgebra::Vector4::new(c(1.0), c(1.0), Complex64::new(0.0, 1.0), c(1.0)))
}

/// χ in the conventional `{I, X, Y, Z}` basis.
pub fn to_conventional(chi: &ChiMatrix) -> ChiMatrix {
    let s = basis_change();
    s * chi * s.adjoint()
}

pub fn from_conventional(chi: &ChiMatrix) -> ChiMatrix {
    let s = basis_change();
    s.adjoint() * chi * s
}

/// Raw linear-inversion χ and its physical projection.
#[derive(Debug, Clone)]
pub struct ProcessFit {
    pub raw: ChiMatrix,
    pub chi: ChiMatrix,
    pub mle: MleResult,
}

impl ProcessFit {
    /// `χ_II`.
    pub fn process_fidelity(&self) -> f64 {
        self.chi[(0, 0)].re
    }
}

pub fn process_tomography(
    inputs: &[ComplexMatrix2],
    outputs: &[ComplexMatrix2],
    sigmas: &[OutputSigma],
) -> Result<ProcessFit> {
    let raw = linear_inversion(inputs, outputs)?;
    let mle = mle_project(&raw, inputs, outputs, sigmas, &MleOptions::default())?;
    Ok(ProcessFit {
        raw,
        chi: mle.chi,
        mle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn depolarize(p: f64) -> impl Fn(&ComplexMatrix2) -> ComplexMatrix2 {
        move |rho| rho * c(1.0 - p) + ComplexMatrix2::identity() * c(p / 2.0)
    }

    #[test]
    fn identity_channel_is_e11() {
        let chi = chi_of_channel(|r| *r).unwrap();
        assert_relative_eq!(chi[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert!((chi - ChiMatrix::from_fn(|m, n| c(if m == 0 && n == 0 { 1.0 } else { 0.0 }))).norm() < 1e-12);
    }

    #[test]
    fn x_gate_is_xx() {
        let x = pauli(1);
        let chi = chi_of_channel(|r| x * r * x).unwrap();
        assert_relative_eq!(chi[(1, 1)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn depolarizing_channel_diagonal() {
        // Oracle: apply the channel to each Pauli explicitly; the Kraus form
        // (1 − 3p/4)ρ + (p/4)Σσρσ gives diag(1 − 3p/4, p/4, p/4, p/4).
        let p = 0.2;
        let brute = |rho: &ComplexMatrix2| {
            let mut out = rho * c(1.0 - 3.0 * p / 4.0);
            for k in 1..4 {
                out += pauli(k) * rho * pauli(k) * c(p / 4.0);
            }
            out
        };
        for rho in standard_inputs() {
            assert!((brute(&rho) - depolarize(p)(&rho)).norm() < 1e-15);
        }
        let chi = chi_of_channel(depolarize(p)).unwrap();
        for (k, expected) in [0.85, 0.05, 0.05, 0.05].iter().enumerate() {
            assert_relative_eq!(chi[(k, k)].re, *expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn iy_basis_keeps_real_processes_real() {
        let y = pauli(2);
        let chi = chi_of_channel(|r| y * r * y.adjoint()).unwrap();
        assert!(chi.iter().all(|z| z.im.abs() < 1e-12));
        let conv = to_conventional(&chi);
        assert_relative_eq!(conv[(2, 2)].re, 1.0, epsilon = 1e-12);
        assert!((from_conventional(&conv) - chi).norm() < 1e-14);
    }

    #[test]
    fn apply_reproduces_unitary() {
        let theta = 0.7f64;
        let u = ComplexMatrix2::new(
            c((theta / 2.0).cos()),
            Complex64::new(0.0, -(theta / 2.0).sin()),
            Complex64::new(0.0, -(theta / 2.0).sin()),
            c((theta / 2.0).cos()),
        );
        let chi = chi_of_unitary(&u);
        for rho in standard_inputs() {
            assert!((apply_chi(&chi, &rho) - u * rho * u.adjoint()).norm() < 1e-14);
        }
        assert!(tp_residual(&chi) < 1e-14);
    }

    #[test]
    fn dependent_inputs_are_rejected() {
        let plus = *QubitState::of(InputState::PlusX).matrix();
        let inputs = vec![plus; 4];
        assert!(matches!(linear_inversion(&inputs, &inputs), Err(Error::Singular(_))));
    }
}
