//! Single-qubit objects in the logical frame of a spin transition.
//!
//! For the electron qubit the logical basis is `|0⟩ = |↓⟩`, `|1⟩ = |↑⟩`:
//! the initialised state is `+Z`, and
//! `|+X⟩ = (|↓⟩ + |↑⟩)/√2`, `|+Y⟩ = (|↓⟩ + i|↑⟩)/√2`.
//! The nuclear qubit uses `|0⟩ = |⇑⟩`, `|1⟩ = |⇓⟩` in the same way.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{basis, c, ComplexMatrix4, DensityMatrix4};

pub type ComplexMatrix2 = Matrix2<Complex64>;

pub fn pauli(axis: usize) -> ComplexMatrix2 {
    let z = c(0.0);
    let i = Complex64::new(0.0, 1.0);
    match axis {
        0 => ComplexMatrix2::identity(),
        1 => ComplexMatrix2::new(z, c(1.0), c(1.0), z),
        2 => ComplexMatrix2::new(z, -i, i, z),
        3 => ComplexMatrix2::new(c(1.0), z, z, c(-1.0)),
        _ => panic!("pauli axis {axis} out of range"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bloch {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Bloch {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Named input states of the memory protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InputState {
    PlusX,
    PlusY,
    PlusZ,
    MinusZ,
    /// Polar angle `theta` (rad) from `+Z`, azimuth `phi_deg` from `+X`.
    Custom { theta: f64, phi_deg: f64 },
}

impl InputState {
    /// The four states used for process tomography, in report order.
    pub const PROCESS_SET: [InputState; 4] = [
        InputState::PlusX,
        InputState::PlusY,
        InputState::PlusZ,
        InputState::MinusZ,
    ];

    pub fn label(&self) -> String {
        match self {
            InputState::PlusX => "+X".into(),
            InputState::PlusY => "+Y".into(),
            InputState::PlusZ => "+Z".into(),
            InputState::MinusZ => "-Z".into(),
            InputState::Custom { theta, phi_deg } => format!("theta={theta:.6},phi={phi_deg:.6}"),
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        match label.trim() {
            "+X" | "plusX" | "x" => Some(InputState::PlusX),
            "+Y" | "plusY" | "y" => Some(InputState::PlusY),
            "+Z" | "plusZ" | "z" => Some(InputState::PlusZ),
            "-Z" | "minusZ" => Some(InputState::MinusZ),
            _ => None,
        }
    }

    /// Rotation `(angle rad, phase deg)` that prepares this state from `+Z`.
    pub fn preparation(&self) -> (f64, f64) {
        use std::f64::consts::{FRAC_PI_2, PI};
        match *self {
            InputState::PlusX => (FRAC_PI_2, 0.0),
            InputState::PlusY => (FRAC_PI_2, 90.0),
            InputState::PlusZ => (0.0, 0.0),
            InputState::MinusZ => (PI, 0.0),
            InputState::Custom { theta, phi_deg } => (theta, phi_deg),
        }
    }

    pub fn bloch(&self) -> Bloch {
        let (theta, phi_deg) = self.preparation();
        let phi = phi_deg.to_radians();
        Bloch::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    pub fn ket(&self) -> Vector2<Complex64> {
        let (theta, phi_deg) = self.preparation();
        Vector2::new(
            c((theta / 2.0).cos()),
            Complex64::from_polar((theta / 2.0).sin(), phi_deg.to_radians()),
        )
    }
}

/// 2×2 density matrix of a logical qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    matrix: ComplexMatrix2,
}

impl QubitState {
    pub fn new(matrix: ComplexMatrix2) -> Result<Self> {
        let herm = (matrix - matrix.adjoint()).norm();
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("qubit state not Hermitian ({herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("qubit trace {tr} != 1")));
        }
        let b = Self { matrix }.bloch();
        if b.norm() > 1.0 + 1e-10 {
            return Err(Error::InvalidState(format!("Bloch norm {} > 1", b.norm())));
        }
        Ok(Self { matrix })
    }

    /// `(1 + b·σ)/2` without any physicality check.
    pub fn from_bloch_unchecked(b: Bloch) -> Self {
        let m = (pauli(0) + pauli(1) * c(b.x) + pauli(2) * c(b.y) + pauli(3) * c(b.z)) * c(0.5);
        Self { matrix: m }
    }

    pub fn pure(ket: Vector2<Complex64>) -> Self {
        let n = ket.norm();
        let k = ket / c(n);
        Self {
            matrix: k * k.adjoint(),
        }
    }

    pub fn of(input: InputState) -> Self {
        Self::pure(input.ket())
    }

    pub fn matrix(&self) -> &ComplexMatrix2 {
        &self.matrix
    }

    pub fn bloch(&self) -> Bloch {
        let e = |k: usize| (self.matrix * pauli(k)).trace().re;
        Bloch::new(e(1), e(2), e(3))
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalised `ψ`.
    pub fn fidelity_with(&self, ket: &Vector2<Complex64>) -> f64 {
        let k = ket / c(ket.norm());
        (k.adjoint() * self.matrix * k)[(0, 0)].re
    }

    /// Places this electron state next to a nucleus in `|⇑⟩`.
    pub fn embed_electron(&self) -> DensityMatrix4 {
        let q = &self.matrix;
        let mut m = ComplexMatrix4::zeros();
        // logical |0⟩ = |↓⇑⟩, |1⟩ = |↑⇑⟩
        let map = [basis::DOWN_UP, basis::UP_UP];
        for r in 0..2 {
            for col in 0..2 {
                m[(map[r], map[col])] = q[(r, col)];
            }
        }
        DensityMatrix4::from_propagated(m)
    }
}

/// Electron qubit obtained by tracing out the nucleus.
pub fn electron_qubit(rho: &DensityMatrix4) -> QubitState {
    let m = rho.matrix();
    use basis::*;
    let zero = [DOWN_UP, DOWN_DOWN];
    let one = [UP_UP, UP_DOWN];
    let elem = |a: [usize; 2], b: [usize; 2]| m[(a[0], b[0])] + m[(a[1], b[1])];
    QubitState {
        matrix: ComplexMatrix2::new(elem(zero, zero), elem(zero, one), elem(one, zero), elem(one, one)),
    }
}
