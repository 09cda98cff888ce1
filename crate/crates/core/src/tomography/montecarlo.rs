//! Monte Carlo error bars for process tomography.
//!
//! Each sample perturbs the four reconstructed output states, rebuilds
//! them into density matrices and reruns linear inversion plus MLE. Every
//! sample draws from its own stream keyed by `(seed, key…, index)`, so the
//! result is the same for any rayon pool size.

use nalgebra::Vector2;
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::ShotRecord;
use crate::qubit::{Bloch, ComplexMatrix2, InputState};
use crate::rng;

use super::mle::{mle_project, MleOptions, OutputSigma};
use super::process::{linear_inversion, standard_inputs, ChiMatrix, Physicality};
use super::state::{density_from_bloch, reconstruct_state, state_fidelity, xy_from_records, BlochEstimate};

/// How samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Gaussian noise on the Bloch components, scaled by their errors.
    #[default]
    DensityElements,
    /// Redraw every shot record binomially from its observed fraction and
    /// redo the state reconstruction.
    CountsBootstrap,
}

/// Same MLE weights the point estimate uses: `(ρ00, ρ11, Re ρ01, Im ρ01)`
/// errors are `(σz, σz, σx, σy)/2`.
pub fn output_sigma(b: &BlochEstimate) -> OutputSigma {
    [b.z_err / 2.0, b.z_err / 2.0, b.x_err / 2.0, b.y_err / 2.0]
}

/// Per-sample values kept for derived quantities such as `F_p / F_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSample {
    pub chi_ii: f64,
    pub state_fidelities: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummary {
    pub n_samples: usize,
    /// Element-wise standard deviations of Re χ and Im χ.
    pub chi_re_std: [[f64; 4]; 4],
    pub chi_im_std: [[f64; 4]; 4],
    pub chi_ii_std: f64,
    pub state_fidelity_std: [f64; 4],
    /// Largest violations seen over all samples.
    pub worst: Physicality,
    pub unconverged: usize,
    pub samples: Vec<McSample>,
    #[serde(skip)]
    pub chis: Vec<ChiMatrix>,
}

impl McSummary {
    pub fn all_physical(&self, herm_tol: f64, eig_tol: f64, tp_tol: f64) -> bool {
        self.chis
            .iter()
            .all(|chi| Physicality::of(chi).is_physical(herm_tol, eig_tol, tp_tol))
    }
}

fn targets() -> [Vector2<Complex64>; 4] {
    InputState::PROCESS_SET.map(|s| s.ket())
}

fn evaluate(outputs: &[ComplexMatrix2], sigmas: &[OutputSigma], opts: &MleOptions) -> Result<(ChiMatrix, bool, McSample)> {
    let inputs = standard_inputs();
    let raw = linear_inversion(&inputs, outputs)?;
    let mle = mle_project(&raw, &inputs, outputs, sigmas, opts)?;
    let kets = targets();
    let mut sf = [0.0; 4];
    for (k, out) in outputs.iter().enumerate() {
        sf[k] = state_fidelity(&crate::qubit::QubitState::from_bloch_unchecked(bloch_of(out)), &kets[k]);
    }
    Ok((
        mle.chi,
        mle.converged,
        McSample {
            chi_ii: mle.chi[(0, 0)].re,
            state_fidelities: sf,
        },
    ))
}

fn bloch_of(m: &ComplexMatrix2) -> Bloch {
    Bloch::new(2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re)
}

fn perturbed(b: &BlochEstimate, s: &mut rng::Stream) -> ComplexMatrix2 {
    let mut g = || -> f64 { StandardNormal.sample(s) };
    let v = Bloch::new(b.x + b.x_err * g(), b.y + b.y_err * g(), b.z + b.z_err * g());
    *density_from_bloch(v).matrix()
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn summarize(results: Vec<(ChiMatrix, bool, McSample)>) -> McSummary {
    let n = results.len();
    let mut chi_re_std = [[0.0; 4]; 4];
    let mut chi_im_std = [[0.0; 4]; 4];
    for m in 0..4 {
        for k in 0..4 {
            chi_re_std[m][k] = std_dev(results.iter().map(move |r| r.0[(m, k)].re));
            chi_im_std[m][k] = std_dev(results.iter().map(move |r| r.0[(m, k)].im));
        }
    }
    let mut state_fidelity_std = [0.0; 4];
    for (k, s) in state_fidelity_std.iter_mut().enumerate() {
        *s = std_dev(results.iter().map(move |r| r.2.state_fidelities[k]));
    }
    let worst = results.iter().fold(
        Physicality {
            hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
            tp_residual: 0.0,
        },
        |w, r| {
            let p = Physicality::of(&r.0);
            Physicality {
                hermiticity: w.hermiticity.max(p.hermiticity),
                min_eigenvalue: w.min_eigenvalue.min(p.min_eigenvalue),
                tp_residual: w.tp_residual.max(p.tp_residual),
            }
        },
    );
    McSummary {
        n_samples: n,
        chi_re_std,
        chi_im_std,
        chi_ii_std: std_dev(results.iter().map(|r| r.2.chi_ii)),
        state_fidelity_std,
        worst,
        unconverged: results.iter().filter(|r| !r.1).count(),
        samples: results.iter().map(|r| r.2).collect(),
        chis: results.into_iter().map(|r| r.0).collect(),
    }
}

/// Perturbs the four output Bloch estimates (order `+X, +Y, +Z, −Z`).
pub fn monte_carlo_errors(outputs: &[BlochEstimate], n_samples: usize, seed: u64, key: &[u64]) -> Result<McSummary> {
    if outputs.len() != 4 {
        return Err(Error::Singular(format!("need 4 outputs, got {}", outputs.len())));
    }
    if n_samples < 2 {
        return Err(invalid("mc_samples", "need at least 2 samples"));
    }
    let sigmas: Vec<OutputSigma> = outputs.iter().map(output_sigma).collect();
    let opts = MleOptions::default();
    let results = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut path = key.to_vec();
            path.push(i as u64);
            let mut s = rng::stream(seed, &path);
            let dens: Vec<ComplexMatrix2> = outputs.iter().map(|b| perturbed(b, &mut s)).collect();
            evaluate(&dens, &sigmas, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(results))
}

/// Shot-record bootstrap. `records[k]` holds every record of output `k`.
pub fn bootstrap_errors(
    records: &[Vec<ShotRecord>],
    visibility: f64,
    n_samples: usize,
    seed: u64,
    key: &[u64],
) -> Result<McSummary> {
    if records.len() != 4 {
        return Err(Error::Singular(format!("need 4 outputs, got {}", records.len())));
    }
    if n_samples < 2 {
        return Err(invalid("mc_samples", "need at least 2 samples"));
    }
    let mut sigmas = Vec::with_capacity(4);
    for set in records {
        let est = reconstruct_state(&xy_from_records(set)?, visibility)?;
        sigmas.push(output_sigma(&est.bloch));
    }
    let opts = MleOptions::default();
    let results = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut path = key.to_vec();
            path.push(i as u64);
            let mut s = rng::stream(seed, &path);
            let mut dens = Vec::with_capacity(4);
            for set in records {
                let redrawn = set
                    .iter()
                    .map(|r| {
                        let p = r.fraction().clamp(0.0, 1.0);
                        let counts = Binomial::new(r.shots, p).map_err(|e| invalid("counts", e.to_string()))?.sample(&mut s);
                        ShotRecord::new(r.basis, counts, r.shots, r.repetition)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let est = reconstruct_state(&xy_from_records(&redrawn)?, visibility)?;
                dens.push(*density_from_bloch(est.bloch.vector()).matrix());
            }
            evaluate(&dens, &sigmas, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(results))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_outputs(err: f64) -> Vec<BlochEstimate> {
        InputState::PROCESS_SET
            .iter()
            .map(|s| {
                let b = s.bloch();
                BlochEstimate {
                    x_err: err,
                    y_err: err,
                    z_err: err,
                    ..BlochEstimate::exact(b)
                }
            })
            .collect()
    }

    #[test]
    fn zero_uncertainty_gives_zero_spread() {
        let mc = monte_carlo_errors(&identity_outputs(0.0), 8, 1, &[]).unwrap();
        assert!(mc.chi_ii_std.abs() < 1e-12);
        assert!(mc.chi_re_std.iter().flatten().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn doubling_sigma_doubles_spread() {
        // Shrink the states slightly so the radial projection stays inactive.
        let shrink = |err| -> Vec<BlochEstimate> {
            identity_outputs(err)
                .into_iter()
                .map(|b| BlochEstimate {
                    x: 0.8 * b.x,
                    y: 0.8 * b.y,
                    z: 0.8 * b.z,
                    ..b
                })
                .collect()
        };
        let a = monte_carlo_errors(&shrink(0.005), 400, 3, &[1]).unwrap();
        let b = monte_carlo_errors(&shrink(0.010), 400, 3, &[1]).unwrap();
        let ratio = b.chi_ii_std / a.chi_ii_std;
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn independent_of_pool_size() {
        let data = identity_outputs(0.05);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_errors(&data, 40, 9, &[2]).unwrap())
        };
        let (one, many) = (run(1), run(4));
        assert_eq!(one.samples, many.samples);
        assert_eq!(one.chi_ii_std.to_bits(), many.chi_ii_std.to_bits());
    }

    #[test]
    fn perturbed_identity_stays_physical() {
        let mc = monte_carlo_errors(&identity_outputs(0.05), 60, 11, &[]).unwrap();
        assert!(mc.all_physical(1e-8, 1e-8, 1e-6), "{:?}", mc.worst);
    }
}
