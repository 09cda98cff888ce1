//! Fidelity bookkeeping: SPAM deconvolution, average fidelities and the
//! measure-and-prepare bound.

use nalgebra::Vector2;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qubit::{Bloch, ComplexMatrix2, QubitState};
use crate::rng;

/// A value with a one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub value: f64,
    pub err: f64,
}

impl Value {
    pub const fn new(value: f64, err: f64) -> Self {
        Self { value, err }
    }
}

/// `F_m = F_p / F_i` with first-order error propagation.
pub fn memory_fidelity(f_p: Value, f_i: Value) -> Result<Value> {
    if f_i.value == 0.0 || !f_i.value.is_finite() {
        return Err(invalid("f_i", "must be non-zero"));
    }
    let m = f_p.value / f_i.value;
    let rel = |v: Value| if v.value == 0.0 { 0.0 } else { v.err / v.value };
    let err = m.abs() * (rel(f_p).powi(2) + rel(f_i).powi(2)).sqrt();
    Ok(Value::new(m, err))
}

/// Standard deviation of `a_k / b_k` over paired Monte Carlo samples.
pub fn ratio_std(a: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x / y).collect();
    let n = r.len() as f64;
    if r.len() < 2 {
        return 0.0;
    }
    let mean = r.iter().sum::<f64>() / n;
    (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFidelities {
    pub label: String,
    pub sf_init: Value,
    pub sf_process: Value,
    /// First-order error.
    pub sf_memory: Value,
    /// Monte Carlo error of the per-sample ratio, when available.
    pub sf_memory_mc_err: Option<f64>,
}

impl StateFidelities {
    pub fn new(label: impl Into<String>, sf_init: Value, sf_process: Value) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            sf_memory: memory_fidelity(sf_process, sf_init)?,
            sf_init,
            sf_process,
            sf_memory_mc_err: None,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub states: Vec<StateFidelities>,
    pub mean: StateFidelities,
    pub f_p: Value,
    pub f_i: Value,
    pub f_m: Value,
    pub f_m_mc_err: Option<f64>,
}

impl FidelityReport {
    /// Builds the report; the mean row averages values and combines errors
    /// in quadrature divided by the number of states.
    pub fn new(states: Vec<StateFidelities>, f_p: Value, f_i: Value) -> Result<Self> {
        if states.is_empty() {
            return Err(invalid("states", "need at least one state"));
        }
        let n = states.len() as f64;
        let avg = |get: fn(&StateFidelities) -> Value| {
            let v = states.iter().map(|s| get(s).value).sum::<f64>() / n;
            let e = states.iter().map(|s| get(s).err.powi(2)).sum::<f64>().sqrt() / n;
            Value::new(v, e)
        };
        let mean = StateFidelities::new("mean", avg(|s| s.sf_init), avg(|s| s.sf_process))?;
        Ok(Self {
            states,
            mean,
            f_p,
            f_i,
            f_m: memory_fidelity(f_p, f_i)?,
            f_m_mc_err: None,
        })
    }
}

/// Haar-average fidelity of a trace-preserving qubit channel with process
/// fidelity `χ_II`.
pub fn average_fidelity_from_chi_ii(chi_ii: f64) -> f64 {
    (2.0 * chi_ii + 1.0) / 3.0
}

/// Haar-random pure qubit state (a uniform point on the Bloch sphere).
pub fn haar_random_state(s: &mut rng::Stream) -> Vector2<Complex64> {
    let mut g = || -> f64 { StandardNormal.sample(s) };
    let v = Vector2::new(Complex64::new(g(), g()), Complex64::new(g(), g()));
    v / Complex64::new(v.norm(), 0.0)
}

fn ket_from_bloch(b: Bloch) -> Vector2<Complex64> {
    let theta = b.z.clamp(-1.0, 1.0).acos();
    let phi = b.y.atan2(b.x);
    Vector2::new(Complex64::new((theta / 2.0).cos(), 0.0), Complex64::from_polar((theta / 2.0).sin(), phi))
}

fn bloch_of_ket(k: &Vector2<Complex64>) -> [f64; 3] {
    let b = QubitState::pure(*k).bloch();
    [b.x, b.y, b.z]
}

/// The six axis states of the frame spanned by `psi` and a second random
/// state. Any octahedron is a spherical 3-design, so averages of
/// fidelities (quadratic in the Bloch vector) over it are exact.
pub fn octahedron_from(psi: &Vector2<Complex64>, s: &mut rng::Stream) -> [Vector2<Complex64>; 6] {
    let a = bloch_of_ket(psi);
    let r = bloch_of_ket(&haar_random_state(s));
    let dot = a[0] * r[0] + a[1] * r[1] + a[2] * r[2];
    let mut b = [r[0] - dot * a[0], r[1] - dot * a[1], r[2] - dot * a[2]];
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if nb < 1e-8 {
        let t = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = a[0] * t[0] + a[1] * t[1] + a[2] * t[2];
        b = [t[0] - d * a[0], t[1] - d * a[1], t[2] - d * a[2]];
    }
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let b = [b[0] / nb, b[1] / nb, b[2] / nb];
    let cvec = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let state = |v: [f64; 3], sign: f64| ket_from_bloch(Bloch::new(sign * v[0], sign * v[1], sign * v[2]));
    [state(a, 1.0), state(a, -1.0), state(b, 1.0), state(b, -1.0), state(cvec, 1.0), state(cvec, -1.0)]
}

fn fidelity_of(channel: &impl Fn(&ComplexMatrix2) -> ComplexMatrix2, psi: &Vector2<Complex64>) -> f64 {
    let rho = psi * psi.adjoint();
    (psi.adjoint() * channel(&rho) * psi)[(0, 0)].re
}

/// Average of `⟨ψ|ξ(ψ)⟩` over `n` Haar-random inputs.
pub fn sampled_average_fidelity(
    channel: impl Fn(&ComplexMatrix2) -> ComplexMatrix2,
    n: usize,
    seed: u64,
) -> f64 {
    let mut s = rng::stream(seed, &[rng::label("haar")]);
    (0..n).map(|_| fidelity_of(&channel, &haar_random_state(&mut s))).sum::<f64>() / n as f64
}

/// Average over `n` Haar-random inputs, each completed to the octahedron
/// of a random frame. Exact for any channel, whatever `n`.
pub fn design_average_fidelity(
    channel: impl Fn(&ComplexMatrix2) -> ComplexMatrix2,
    n: usize,
    seed: u64,
) -> f64 {
    let mut s = rng::stream(seed, &[rng::label("haar-frame")]);
    let mut total = 0.0;
    for _ in 0..n {
        let psi = haar_random_state(&mut s);
        total += octahedron_from(&psi, &mut s).iter().map(|k| fidelity_of(&channel, k)).sum::<f64>() / 6.0;
    }
    total / n as f64
}

/// Measure along `axis`, then prepare `plus` or `minus` (Bloch vectors).
pub fn measure_and_prepare(axis: Bloch, plus: Bloch, minus: Bloch) -> impl Fn(&ComplexMatrix2) -> ComplexMatrix2 {
    let proj = |sign: f64| *QubitState::from_bloch_unchecked(Bloch::new(sign * axis.x, sign * axis.y, sign * axis.z)).matrix();
    let (p_plus, p_minus) = (proj(1.0), proj(-1.0));
    let (r_plus, r_minus) = (
        *QubitState::from_bloch_unchecked(plus).matrix(),
        *QubitState::from_bloch_unchecked(minus).matrix(),
    );
    move |rho: &ComplexMatrix2| r_plus * (p_plus * rho).trace() + r_minus * (p_minus * rho).trace()
}

/// `n` nearly uniform unit vectors on a Fibonacci lattice.
pub fn fibonacci_sphere(n: usize) -> Vec<Bloch> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            Bloch::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Best Haar-average fidelity found by searching measurement axes and
/// re-prepared states on a Fibonacci grid of `grid` points. Each candidate
/// is scored exactly on the standard octahedron.
pub fn best_measure_and_prepare(grid: usize) -> f64 {
    let pts = fibonacci_sphere(grid);
    let octa = [
        Bloch::new(1.0, 0.0, 0.0),
        Bloch::new(-1.0, 0.0, 0.0),
        Bloch::new(0.0, 1.0, 0.0),
        Bloch::new(0.0, -1.0, 0.0),
        Bloch::new(0.0, 0.0, 1.0),
        Bloch::new(0.0, 0.0, -1.0),
    ]
    .map(ket_from_bloch);
    let mut best = 0.0f64;
    for axis in &pts {
        // The score separates into a `plus` part and a `minus` part, so
        // each re-prepared state is optimised on its own.
        let part = |prep: Bloch, sign: f64| {
            let ch = measure_and_prepare(*axis, prep, prep);
            let proj = *QubitState::from_bloch_unchecked(Bloch::new(sign * axis.x, sign * axis.y, sign * axis.z)).matrix();
            octa.iter()
                .map(|k| {
                    let rho = k * k.adjoint();
                    let p = (proj * rho).trace().re;
                    p * fidelity_of(&ch, k)
                })
                .sum::<f64>()
                / 6.0
        };
        let plus = pts.iter().map(|p| part(*p, 1.0)).fold(f64::MIN, f64::max);
        let minus = pts.iter().map(|p| part(*p, -1.0)).fold(f64::MIN, f64::max);
        best = best.max(plus + minus);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::pauli;
    use crate::spin::c;
    use crate::tomography::process::chi_of_channel;
    use approx::assert_relative_eq;

    #[test]
    fn memory_fidelity_quotient() {
        let m = memory_fidelity(Value::new(0.81, 0.07), Value::new(0.88, 0.06)).unwrap();
        assert_relative_eq!(m.value, 0.81 / 0.88, epsilon = 1e-15);
        let oracle = 0.81 / 0.88 * ((0.07f64 / 0.81).powi(2) + (0.06f64 / 0.88).powi(2)).sqrt();
        assert_relative_eq!(m.err, oracle, epsilon = 1e-15);
        assert_eq!(memory_fidelity(Value::new(0.7, 0.0), Value::new(0.7, 0.0)).unwrap().value, 1.0);
        assert!(memory_fidelity(Value::new(0.7, 0.0), Value::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn design_average_matches_chi_ii() {
        let theta = 0.3f64;
        let u = pauli(0) * c((theta / 2.0).cos()) - pauli(1) * Complex64::new(0.0, (theta / 2.0).sin());
        let channel = move |r: &ComplexMatrix2| (u * r * u.adjoint()) * c(0.8) + pauli(3) * r * pauli(3) * c(0.15) + pauli(2) * r * pauli(2) * c(0.05);
        let chi = chi_of_channel(channel).unwrap();
        let avg = design_average_fidelity(channel, 100, 4);
        assert!((avg - average_fidelity_from_chi_ii(chi[(0, 0)].re)).abs() < 1e-6);
        // Plain sampling agrees within its statistical error.
        let sampled = sampled_average_fidelity(channel, 4000, 4);
        assert!((sampled - avg).abs() < 0.01, "{sampled} {avg}");
    }

    #[test]
    fn classical_strategy_is_bounded() {
        // Analytic optimum: measure and re-prepare along the same axis.
        let z = Bloch::new(0.0, 0.0, 1.0);
        let mz = Bloch::new(0.0, 0.0, -1.0);
        let avg = design_average_fidelity(measure_and_prepare(z, z, mz), 10, 1);
        assert_relative_eq!(avg, 2.0 / 3.0, epsilon = 1e-12);
        let best = best_measure_and_prepare(120);
        assert!(best <= 2.0 / 3.0 + 1e-3 && best > 0.66, "{best}");
    }
}
