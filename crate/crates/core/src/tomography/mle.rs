//! Maximum-likelihood projection of a process matrix onto physical
//! channels.
//!
//! The weighted squared distance between predicted and measured output
//! density matrices, plus a trace-preservation penalty, is quadratic in χ.
//! It is minimised over the cone `χ ⪰ 0` with a log-barrier Newton method;
//! the barrier parameter bounds the gap to the optimum. A final congruence
//! `K → K M^{-1/2}` on the Kraus operators makes the result exactly trace
//! preserving.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::ComplexMatrix2;
use crate::spin::c;

use super::process::{operator_basis, tp_matrix, ChiMatrix};

/// One-sigma errors of `(ρ00, ρ11, Re ρ01, Im ρ01)` for one output.
pub type OutputSigma = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Weight of the squared trace-preservation residuals relative to the
    /// data terms.
    pub tp_weight: f64,
    /// Stop once the optimality gap is below `gap_tol · max(1, cost)`.
    pub gap_tol: f64,
    pub max_newton_steps: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tp_weight: 1e3,
            gap_tol: 1e-9,
            max_newton_steps: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleResult {
    #[serde(skip)]
    pub chi: ChiMatrix,
    pub converged: bool,
    /// Newton steps taken.
    pub iterations: usize,
    /// Upper bound on `cost − optimum`.
    pub gap: f64,
    /// Weighted squared residual before the trace-preservation polish.
    pub cost: f64,
}

const N_PARAMS: usize = 16;

/// Frobenius-orthonormal basis of Hermitian 4×4 matrices.
fn hermitian_basis() -> [Matrix4<Complex64>; N_PARAMS] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = [Matrix4::zeros(); N_PARAMS];
    for (k, b) in out.iter_mut().enumerate().take(4) {
        b[(k, k)] = c(1.0);
    }
    let mut p = 4;
    for r in 1..4 {
        for col in 0..r {
            out[p][(r, col)] = c(s);
            out[p][(col, r)] = c(s);
            out[p + 1][(r, col)] = Complex64::new(0.0, s);
            out[p + 1][(col, r)] = Complex64::new(0.0, -s);
            p += 2;
        }
    }
    out
}

fn to_coords(basis: &[Matrix4<Complex64>; N_PARAMS], chi: &ChiMatrix) -> DVector<f64> {
    DVector::from_iterator(N_PARAMS, basis.iter().map(|b| (b * chi).trace().re))
}

fn from_coords(basis: &[Matrix4<Complex64>; N_PARAMS], v: &DVector<f64>) -> ChiMatrix {
    basis.iter().zip(v.iter()).fold(Matrix4::zeros(), |acc, (b, x)| acc + b * c(*x))
}

/// Hermitian part of `chi` with negative eigenvalues set to zero.
fn clip_negative(chi: &ChiMatrix) -> ChiMatrix {
    let eig = SymmetricEigen::new((chi + chi.adjoint()) * c(0.5));
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|v| c(v.max(0.0))));
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Cholesky factor of a positive definite χ. The complex factorisation
/// also "succeeds" on indefinite input with imaginary pivots.
fn cholesky(chi: &ChiMatrix) -> Option<Cholesky<Complex64, nalgebra::U4>> {
    let ch = ((chi + chi.adjoint()) * c(0.5)).cholesky()?;
    let l = ch.l_dirty();
    (0..4)
        .all(|k| l[(k, k)].re > 0.0 && l[(k, k)].im.abs() <= 1e-12 * l[(k, k)].re)
        .then_some(ch)
}

struct Problem {
    /// `E_m ρ_j E_n†` for each input `j`.
    terms: Vec<[[ComplexMatrix2; 4]; 4]>,
    /// `E_n† E_m`.
    tp_terms: [[ComplexMatrix2; 4]; 4],
    outputs: Vec<ComplexMatrix2>,
    weights: Vec<[f64; 4]>,
    tp_scale: f64,
}

impl Problem {
    fn new(inputs: &[ComplexMatrix2], outputs: &[ComplexMatrix2], sigmas: &[OutputSigma], tp_weight: f64) -> Self {
        let e = operator_basis();
        let terms = inputs
            .iter()
            .map(|rho| std::array::from_fn(|m| std::array::from_fn(|n| e[m] * rho * e[n].adjoint())))
            .collect();
        let tp_terms = std::array::from_fn(|m| std::array::from_fn(|n| e[n].adjoint() * e[m]));

        let max_sigma = sigmas.iter().flatten().copied().fold(0.0, f64::max);
        let weights: Vec<[f64; 4]> = if max_sigma > 0.0 {
            let floor = 1e-3 * max_sigma;
            sigmas.iter().map(|s| s.map(|v| 1.0 / v.max(floor))).collect()
        } else {
            vec![[1.0; 4]; outputs.len()]
        };
        let mean_weight = weights.iter().flatten().sum::<f64>() / (4 * weights.len()) as f64;
        Self {
            terms,
            tp_terms,
            outputs: outputs.to_vec(),
            weights,
            tp_scale: tp_weight.sqrt() * mean_weight,
        }
    }

    fn n_residuals(&self) -> usize {
        4 * self.outputs.len() + 4
    }

    fn components(m: &ComplexMatrix2) -> [f64; 4] {
        [m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)].re, m[(0, 1)].im]
    }

    fn contract(terms: &[[ComplexMatrix2; 4]; 4], chi: &ChiMatrix) -> ComplexMatrix2 {
        let mut out = ComplexMatrix2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                out += terms[m][n] * chi[(m, n)];
            }
        }
        out
    }

    /// Residual entries of χ (or of a χ derivative when `offset` is false).
    fn fill(&self, chi: &ChiMatrix, offset: bool, out: &mut [f64]) {
        for (j, terms) in self.terms.iter().enumerate() {
            let mut p = Self::contract(terms, chi);
            if offset {
                p -= self.outputs[j];
            }
            let comp = Self::components(&p);
            for k in 0..4 {
                out[4 * j + k] = comp[k] * self.weights[j][k];
            }
        }
        let mut t = Self::contract(&self.tp_terms, chi);
        if offset {
            t -= ComplexMatrix2::identity();
        }
        let comp = Self::components(&t);
        let base = 4 * self.outputs.len();
        for k in 0..4 {
            out[base + k] = comp[k] * self.tp_scale;
        }
    }
}

/// `K_i → K_i M^{-1/2}` with `M = Σ χ_mn E_n† E_m`.
fn enforce_trace_preservation(chi: &ChiMatrix) -> ChiMatrix {
    let m = tp_matrix(chi);
    let m = (m + m.adjoint()) * c(0.5);
    let eig = nalgebra::SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|v| *v <= 1e-12) {
        return *chi;
    }
    let inv_sqrt = Matrix2::from_diagonal(&eig.eigenvalues.map(|v| c(1.0 / v.sqrt())));
    let m_inv_sqrt = eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let e = operator_basis();
    let r = Matrix4::from_fn(|n, mm| (e[n].adjoint() * e[mm] * m_inv_sqrt).trace() * 0.5);
    let out = r * chi * r.adjoint();
    (out + out.adjoint()) * c(0.5)
}

/// `f(v) = |A v + r0|²` over χ coordinates `v`.
struct Quadratic {
    a: DMatrix<f64>,
    r0: DVector<f64>,
    hessian: DMatrix<f64>,
}

impl Quadratic {
    fn new(problem: &Problem, basis: &[Matrix4<Complex64>; N_PARAMS]) -> Self {
        let nr = problem.n_residuals();
        let mut a = DMatrix::zeros(nr, N_PARAMS);
        let mut col = vec![0.0; nr];
        for (k, b) in basis.iter().enumerate() {
            problem.fill(b, false, &mut col);
            a.set_column(k, &DVector::from_column_slice(&col));
        }
        let mut r0 = DVector::zeros(nr);
        problem.fill(&Matrix4::zeros(), true, r0.as_mut_slice());
        let hessian = a.transpose() * &a * 2.0;
        Self { a, r0, hessian }
    }

    fn cost(&self, v: &DVector<f64>) -> f64 {
        (&self.a * v + &self.r0).norm_squared()
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * v + &self.r0) * 2.0
    }
}

/// `−H⁻¹ g`; falls back to an eigen-solve with floored eigenvalues when
/// rounding makes the Cholesky factorisation fail near the boundary.
fn newton_step(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = Cholesky::<f64, Dyn>::new(h.clone()) {
        return ch.solve(&(-g));
    }
    let eig = h.symmetric_eigen();
    let floor = 1e-14 * eig.eigenvalues.amax();
    let coeffs = eig.eigenvectors.transpose() * g;
    let scaled = DVector::from_iterator(g.len(), coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| -c / l.max(floor)));
    eig.eigenvectors * scaled
}

/// `Re Tr(a b)`.
fn trace_product(a: &Matrix4<Complex64>, b: &Matrix4<Complex64>) -> f64 {
    let mut t = 0.0;
    for r in 0..4 {
        for k in 0..4 {
            t += (a[(r, k)] * b[(k, r)]).re;
        }
    }
    t
}

/// `−log det χ`, or `None` outside the open cone.
fn barrier(chi: &ChiMatrix) -> Option<f64> {
    let l = cholesky(chi)?;
    let l = l.l();
    Some(-2.0 * (0..4).map(|k| l[(k, k)].re.ln()).sum::<f64>())
}

struct BarrierOutcome {
    v: DVector<f64>,
    steps: usize,
    gap: f64,
    converged: bool,
}

/// Path-following on `f(v) − μ log det χ(v)`, `μ → 0`. On the central path
/// `f − f* ≤ 4μ`.
fn barrier_newton(q: &Quadratic, basis: &[Matrix4<Complex64>; N_PARAMS], v0: DVector<f64>, opts: &MleOptions) -> BarrierOutcome {
    let mut v = v0;
    let mut mu = (q.cost(&v) / 4.0).max(1e-6);
    let mut steps = 0;
    loop {
        let phi = |v: &DVector<f64>, mu: f64| barrier(&from_coords(basis, v)).map(|b| q.cost(v) + mu * b);
        let mut centred = false;
        while steps < opts.max_newton_steps {
            let chi = from_coords(basis, &v);
            let Some(inv) = cholesky(&chi).map(|ch| ch.inverse()) else {
                break;
            };
            let y: Vec<Matrix4<Complex64>> = basis.iter().map(|b| inv * b).collect();
            let mut g = q.gradient(&v);
            let mut h = q.hessian.clone();
            for i in 0..N_PARAMS {
                g[i] -= mu * y[i].trace().re;
                for j in 0..=i {
                    let t = mu * trace_product(&y[i], &y[j]);
                    h[(i, j)] += t;
                    if i != j {
                        h[(j, i)] += t;
                    }
                }
            }
            let step = newton_step(h, &g);
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-12 * (1.0 + q.cost(&v)) {
                centred = true;
                break;
            }
            let current = phi(&v, mu).unwrap_or(f64::INFINITY);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = &v + &step * t;
                if phi(&trial, mu).is_some_and(|p| p <= current - 0.25 * t * decrement) {
                    v = trial;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            steps += 1;
            if !moved {
                // Rounding limits further progress on this stage.
                centred = decrement / 2.0 <= 1e-8 * (1.0 + q.cost(&v));
                break;
            }
        }
        let gap = 4.0 * mu;
        if !centred || gap <= opts.gap_tol * q.cost(&v).max(1.0) {
            return BarrierOutcome {
                v,
                steps,
                gap,
                converged: centred,
            };
        }
        mu /= 10.0;
    }
}

pub fn mle_project(
    raw: &ChiMatrix,
    inputs: &[ComplexMatrix2],
    outputs: &[ComplexMatrix2],
    sigmas: &[OutputSigma],
    opts: &MleOptions,
) -> Result<MleResult> {
    if inputs.len() != outputs.len() || outputs.len() != sigmas.len() || inputs.is_empty() {
        return Err(Error::Singular("inputs, outputs and sigmas must have equal non-zero length".into()));
    }
    let problem = Problem::new(inputs, outputs, sigmas, opts.tp_weight);
    let basis = hermitian_basis();
    let q = Quadratic::new(&problem, &basis);

    let clipped = clip_negative(raw);
    let shift = 0.05 * (clipped.trace().re / 4.0).max(1e-3);
    let start = to_coords(&basis, &(clipped + Matrix4::identity() * c(shift)));
    let out = barrier_newton(&q, &basis, start, opts);

    // The barrier approaches boundary optima only as √μ; when the clipped
    // raw matrix already does as well, it is the better answer.
    let clipped_v = to_coords(&basis, &clipped);
    let (v, cost) = if q.cost(&clipped_v) <= q.cost(&out.v) {
        let cost = q.cost(&clipped_v);
        (clipped_v, cost)
    } else {
        let cost = q.cost(&out.v);
        (out.v, cost)
    };
    let chi = enforce_trace_preservation(&clip_negative(&from_coords(&basis, &v)));
    Ok(MleResult {
        chi,
        converged: out.converged,
        iterations: out.steps,
        gap: out.gap,
        cost,
    })
}
