//! Weighted nonlinear least squares and the model fits built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Convergence when the largest cosine between the residual vector and a
    /// Jacobian column falls below this.
    pub gtol: f64,
    /// Relative step size below which iteration stops.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gtol: 1e-9,
            xtol: 1e-15,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    /// `Σ r²` at `x`.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `JᵀJ` at `x`.
    pub normal_matrix: DMatrix<f64>,
    /// Largest residual/column cosine at `x`.
    pub gradient_cosine: f64,
}

fn gradient_cosine(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let g = j.transpose() * r;
    (0..j.ncols())
        .map(|k| {
            let cn = j.column(k).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[k].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Levenberg–Marquardt on residuals `r(x)` with Jacobian `J(x)`, both
/// returned by `f`.
pub fn levenberg_marquardt<F>(mut f: F, x0: DVector<f64>, opts: &LmOptions) -> LmOutcome
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut r, mut j) = f(&x);
    let mut cost = r.norm_squared();
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;
    let tiny = f64::MIN_POSITIVE.sqrt();

    while iterations < opts.max_iterations {
        if cost <= tiny || gradient_cosine(&j, &r) <= opts.gtol {
            break;
        }
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        let mut small_step = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &x + &step;
            let (rt, jt) = f(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                small_step = step.norm() <= opts.xtol * (x.norm() + opts.xtol);
                x = trial;
                r = rt;
                j = jt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || small_step {
            break;
        }
    }
    let cosine = gradient_cosine(&j, &r);
    let normal = j.transpose() * &j;
    // At rounding-level residuals the cosine is noise; accept when the
    // Gauss–Newton step is below parameter resolution instead.
    let gn_step = normal
        .clone()
        .pseudo_inverse(1e-14 * normal.amax().max(f64::MIN_POSITIVE))
        .map(|inv| (inv * (j.transpose() * &r)).norm())
        .unwrap_or(f64::INFINITY);
    let resolved = gn_step <= f64::EPSILON.sqrt() * (x.norm() + 1e-10);
    LmOutcome {
        normal_matrix: normal,
        converged: cost <= tiny || cosine <= opts.gtol || resolved,
        x,
        cost,
        iterations,
        gradient_cosine: cosine,
    }
}

/// A scalar model `y = f(x; p)`.
pub trait Model {
    fn n_params(&self) -> usize;

    fn eval(&self, x: f64, p: &[f64]) -> f64;

    /// `∂f/∂p` at `x`; central differences unless overridden.
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        central_difference(|q| self.eval(x, q), p, out);
    }
}

pub(crate) fn central_difference(f: impl Fn(&[f64]) -> f64, p: &[f64], out: &mut [f64]) {
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = f64::EPSILON.cbrt() * p[k].abs().max(1.0);
        q[k] = p[k] + h;
        let up = f(&q);
        q[k] = p[k] - h;
        let down = f(&q);
        q[k] = p[k];
        out[k] = (up - down) / (2.0 * h);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// One-sigma errors from the covariance, with `y_err` taken as absolute.
    pub errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// `Σ((y − f)/σ)²`.
    pub chi2: f64,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn check_data(x: &[f64], y: &[f64], y_err: &[f64], n_params: usize) -> Result<()> {
    if x.len() != y.len() || x.len() != y_err.len() {
        return Err(invalid("x/y/y_err", "lengths differ"));
    }
    if x.len() < n_params {
        return Err(invalid("x", format!("{} points for {n_params} parameters", x.len())));
    }
    if let Some(e) = y_err.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(invalid("y_err", format!("must be > 0, got {e}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("x/y", "non-finite value"));
    }
    Ok(())
}

fn covariance_of(normal: &DMatrix<f64>) -> DMatrix<f64> {
    normal
        .clone()
        .pseudo_inverse(1e-14 * normal.amax().max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::from_element(normal.nrows(), normal.ncols(), f64::NAN))
}

/// Minimises `Σ((y − model(x))/y_err)²` starting from `init`.
pub fn nlls_fit<M: Model>(model: &M, x: &[f64], y: &[f64], y_err: &[f64], init: &[f64]) -> Result<FitResult> {
    let np = model.n_params();
    if init.len() != np {
        return Err(invalid("init", format!("expected {np} values")));
    }
    check_data(x, y, y_err, np)?;
    let outcome = levenberg_marquardt(
        |p| {
            let mut r = DVector::zeros(x.len());
            let mut jac = DMatrix::zeros(x.len(), np);
            let mut g = vec![0.0; np];
            for i in 0..x.len() {
                r[i] = (model.eval(x[i], p.as_slice()) - y[i]) / y_err[i];
                model.gradient(x[i], p.as_slice(), &mut g);
                for k in 0..np {
                    jac[(i, k)] = g[k] / y_err[i];
                }
            }
            (r, jac)
        },
        DVector::from_column_slice(init),
        &LmOptions::default(),
    );
    let cov = covariance_of(&outcome.normal_matrix);
    Ok(FitResult {
        params: outcome.x.as_slice().to_vec(),
        errors: (0..np).map(|k| cov[(k, k)].max(0.0).sqrt()).collect(),
        covariance: (0..np).map(|r| (0..np).map(|c| cov[(r, c)]).collect()).collect(),
        chi2: outcome.cost,
        residual_norm: outcome.cost.sqrt(),
        converged: outcome.converged,
        iterations: outcome.iterations,
    })
}

/// `y0 + K·exp(−(τ/T2)^α)` in the internal parameters
/// `(y0, K, ln T2, v)` with `α = 4/(1 + e^{−v})`.
struct StretchedInternal;

const ALPHA_MAX: f64 = 4.0;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Model for StretchedInternal {
    fn n_params(&self) -> usize {
        4
    }

    fn eval(&self, tau: f64, p: &[f64]) -> f64 {
        let alpha = ALPHA_MAX * sigmoid(p[3]);
        p[0] + p[1] * (-(tau / p[2].exp()).powf(alpha)).exp()
    }

    fn gradient(&self, tau: f64, p: &[f64], out: &mut [f64]) {
        let s = sigmoid(p[3]);
        let alpha = ALPHA_MAX * s;
        let x = tau / p[2].exp();
        let xa = x.powf(alpha);
        let e = (-xa).exp();
        out[0] = 1.0;
        out[1] = e;
        // d(x^α)/d(ln T2) = −α x^α;  d(x^α)/dα = x^α ln x
        out[2] = p[1] * e * alpha * xa;
        out[3] = if x > 0.0 {
            -p[1] * e * xa * x.ln() * ALPHA_MAX * s * (1.0 - s)
        } else {
            0.0
        };
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StretchedExpFit {
    pub y0: f64,
    pub y0_err: f64,
    pub k: f64,
    pub k_err: f64,
    /// s.
    pub t2: f64,
    pub t2_err: f64,
    pub alpha: f64,
    pub alpha_err: f64,
    pub chi2: f64,
    pub converged: bool,
    /// `|K| ≤ σ_K`: no decay is resolved and `T2` is meaningless.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Default starting point: tail mean, head minus tail, half-decay time
/// and `α = 1`.
pub fn stretched_exp_init(tau: &[f64], signal: &[f64]) -> [f64; 4] {
    let mut idx: Vec<usize> = (0..tau.len()).collect();
    idx.sort_by(|&a, &b| tau[a].total_cmp(&tau[b]));
    let t: Vec<f64> = idx.iter().map(|&i| tau[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| signal[i]).collect();
    let n = t.len();
    let tail = (y[n - 1] + y[n - 2]) / 2.0;
    let k = y[0] - tail;
    let half = tail + k / 2.0;
    let mut t2 = (t[0] * t[n - 1]).sqrt();
    for w in 0..n - 1 {
        let (a, b) = (y[w] - half, y[w + 1] - half);
        if a == 0.0 {
            t2 = t[w];
            break;
        }
        if a * b < 0.0 {
            let f = a / (a - b);
            t2 = (t[w].ln() + f * (t[w + 1].ln() - t[w].ln())).exp();
            break;
        }
    }
    [tail, k, t2, 1.0]
}

/// All-zero `signal_err` means exact data: unit weights, with parameter
/// errors scaled by the residual variance.
pub fn stretched_exp_fit(tau: &[f64], signal: &[f64], signal_err: &[f64]) -> Result<StretchedExpFit> {
    if tau.len() < 5 {
        return Err(invalid("tau", "need at least 5 points"));
    }
    let unit = !signal_err.is_empty() && signal_err.iter().all(|e| *e == 0.0);
    let ones = vec![1.0; signal_err.len()];
    let signal_err = if unit { &ones[..] } else { signal_err };
    check_data(tau, signal, signal_err, 4)?;
    if tau.iter().any(|t| *t <= 0.0) {
        return Err(invalid("tau", "times must be > 0"));
    }
    let (lo, hi) = tau.iter().fold((f64::INFINITY, 0.0f64), |(l, h), t| (l.min(*t), h.max(*t)));
    if hi / lo < 10.0 {
        return Err(invalid("tau", "times must span at least one decade"));
    }
    let [y0, k, t2, alpha] = stretched_exp_init(tau, signal);
    let v = (alpha / (ALPHA_MAX - alpha)).ln();
    let fit = nlls_fit(&StretchedInternal, tau, signal, signal_err, &[y0, k, t2.ln(), v])?;
    let p = &fit.params;
    let scale = if unit && tau.len() > 4 {
        (fit.chi2 / (tau.len() - 4) as f64).sqrt()
    } else {
        1.0
    };
    let errors: Vec<f64> = fit.errors.iter().map(|e| e * scale).collect();
    let s = sigmoid(p[3]);
    let t2 = p[2].exp();
    Ok(StretchedExpFit {
        y0: p[0],
        y0_err: errors[0],
        k: p[1],
        k_err: errors[1],
        t2,
        t2_err: t2 * errors[2],
        alpha: ALPHA_MAX * s,
        alpha_err: ALPHA_MAX * s * (1.0 - s) * errors[3],
        chi2: fit.chi2,
        converged: fit.converged,
        degenerate: !(p[1].abs() > errors[1]) || p[1] == 0.0,
        iterations: fit.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub prefactor_err: f64,
    pub exponent: f64,
    pub exponent_err: f64,
}

/// Weighted straight line `ln t2 = ln c + e·ln n`; zero errors mean
/// unit weights.
pub fn power_law_fit(n: &[f64], t2: &[f64], t2_err: &[f64]) -> Result<PowerLawFit> {
    if n.len() != t2.len() || n.len() != t2_err.len() {
        return Err(invalid("n/t2/t2_err", "lengths differ"));
    }
    if n.len() < 3 {
        return Err(invalid("n", "need at least 3 points"));
    }
    if let Some(v) = n.iter().find(|v| !(**v >= 1.0)) {
        return Err(invalid("n", format!("must be >= 1, got {v}")));
    }
    if let Some(v) = t2.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid("t2", format!("must be > 0, got {v}")));
    }
    let x: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = t2.iter().map(|v| v.ln()).collect();
    let weighted = t2_err.iter().all(|e| *e > 0.0);
    let w: Vec<f64> = if weighted {
        t2_err.iter().zip(t2).map(|(e, t)| (t / e).powi(2)).collect()
    } else {
        vec![1.0; n.len()]
    };
    let line = weighted_line(&x, &y, &w)?;
    let c = line.intercept.exp();
    Ok(PowerLawFit {
        prefactor: c,
        prefactor_err: c * line.intercept_err,
        exponent: line.slope,
        exponent_err: line.slope_err,
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Line {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_err: f64,
    pub slope_err: f64,
}

/// Closed-form weighted linear regression with weights `1/σ²`. With unit
/// weights the errors are scaled by the residual variance.
pub(crate) fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<Line> {
    let s: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = s * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return Err(Error::Singular("all abscissae coincide".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let mut var_scale = 1.0;
    if w.iter().all(|v| *v == 1.0) && x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        var_scale = rss / (x.len() as f64 - 2.0);
    }
    Ok(Line {
        intercept,
        slope,
        intercept_err: (var_scale * sxx / det).sqrt(),
        slope_err: (var_scale * s / det).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    struct Linear;
    impl Model for Linear {
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, x: f64, p: &[f64]) -> f64 {
            p[0] + p[1] * x
        }
    }

    struct Sine;
    impl Model for Sine {
        fn n_params(&self) -> usize {
            3
        }
        fn eval(&self, x: f64, p: &[f64]) -> f64 {
            p[0] + p[1] * (x - p[2]).cos()
        }
        fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
            out[1] = (x - p[2]).cos();
            out[2] = p[1] * (x - p[2]).sin();
        }
    }

    #[test]
    fn exact_data_is_fitted_exactly() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|x| 0.4 + 0.3 * (x - 0.7f64).cos()).collect();
        let fit = nlls_fit(&Sine, &x, &y, &vec![0.01; 20], &[0.5, 0.2, 0.5]).unwrap();
        assert!(fit.converged);
        assert!(fit.residual_norm < 1e-9);
        assert_relative_eq!(fit.params[2], 0.7, epsilon = 1e-9);
    }

    #[test]
    fn linear_model_matches_closed_form() {
        let x: Vec<f64> = (0..15).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 + 0.5 * x + 0.3 * (x * 1.7).sin()).collect();
        let err: Vec<f64> = x.iter().map(|x| 0.1 + 0.02 * x).collect();
        let fit = nlls_fit(&Linear, &x, &y, &err, &[0.0, 0.0]).unwrap();
        // independent closed form via the normal equations
        let w: Vec<f64> = err.iter().map(|e| 1.0 / (e * e)).collect();
        let (s, sx, sy, sxx, sxy) = (0..15).fold((0.0, 0.0, 0.0, 0.0, 0.0), |a, i| {
            (a.0 + w[i], a.1 + w[i] * x[i], a.2 + w[i] * y[i], a.3 + w[i] * x[i] * x[i], a.4 + w[i] * x[i] * y[i])
        });
        let d = s * sxx - sx * sx;
        assert_relative_eq!(fit.params[1], (s * sxy - sx * sy) / d, max_relative = 1e-10);
        assert_relative_eq!(fit.params[0], (sxx * sy - sx * sxy) / d, max_relative = 1e-10);
        assert_relative_eq!(fit.errors[1], (s / d).sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn stretched_gradient_matches_finite_differences() {
        let mut rng = stream(5, &[0]);
        for _ in 0..50 {
            use rand::Rng;
            let p = [rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0), rng.random_range(-5.0..-1.0), rng.random_range(-2.0..2.0)];
            let tau = rng.random_range(1e-3..0.5);
            let mut a = [0.0; 4];
            let mut n = [0.0; 4];
            StretchedInternal.gradient(tau, &p, &mut a);
            central_difference(|q| StretchedInternal.eval(tau, q), &p, &mut n);
            for k in 0..4 {
                let scale = a[k].abs().max(1e-3);
                assert!((a[k] - n[k]).abs() / scale < 1e-6, "param {k}: {} vs {}", a[k], n[k]);
            }
        }
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn stretched_exp_recovers_noiseless_parameters() {
        for alpha in [1.0, 2.0, 0.7, 3.2] {
            let tau = log_grid(5e-3, 0.4, 16);
            let y: Vec<f64> = tau.iter().map(|t| 0.5 + 0.5 * (-(t / 80e-3f64).powf(alpha)).exp()).collect();
            let fit = stretched_exp_fit(&tau, &y, &vec![0.01; tau.len()]).unwrap();
            assert!(fit.converged);
            assert_relative_eq!(fit.t2, 80e-3, max_relative = 1e-8);
            assert_relative_eq!(fit.alpha, alpha, max_relative = 1e-8);
            assert_relative_eq!(fit.k, 0.5, max_relative = 1e-8);
        }
    }

    #[test]
    fn stretched_exp_recovers_noisy_parameters_within_three_sigma() {
        let tau = log_grid(8e-3, 0.3, 14);
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut rng = stream(21, &[1]);
        let y: Vec<f64> = tau
            .iter()
            .map(|t| 0.5 + 0.5 * (-(t / 80e-3f64).powi(2)).exp() + normal.sample(&mut rng))
            .collect();
        let fit = stretched_exp_fit(&tau, &y, &vec![0.01; tau.len()]).unwrap();
        assert!((fit.t2 - 80e-3).abs() < 3.0 * fit.t2_err);
        assert!((fit.alpha - 2.0).abs() < 3.0 * fit.alpha_err);
        assert!((fit.y0 - 0.5).abs() < 3.0 * fit.y0_err);
    }

    #[test]
    fn flat_data_is_degenerate() {
        let tau = log_grid(1e-3, 1.0, 10);
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut rng = stream(2, &[2]);
        let y: Vec<f64> = tau.iter().map(|_| 0.5 + normal.sample(&mut rng)).collect();
        let fit = stretched_exp_fit(&tau, &y, &vec![0.01; tau.len()]).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn stretched_exp_validates_inputs() {
        assert!(stretched_exp_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], &[0.1; 4]).is_err());
        assert!(stretched_exp_fit(&[1.0, 1.1, 1.2, 1.3, 1.4], &[1.0; 5], &[0.1; 5]).is_err());
    }

    #[test]
    fn power_law_examples() {
        let n = [1.0f64, 2.0, 4.0, 16.0, 64.0, 256.0];
        let t2: Vec<f64> = n.iter().map(|v| 1e-3 * v.powf(0.75)).collect();
        let fit = power_law_fit(&n, &t2, &[0.0; 6]).unwrap();
        assert!((fit.exponent - 0.75).abs() < 1e-10);
        assert_relative_eq!(fit.prefactor, 1e-3, max_relative = 1e-10);
        let flat = power_law_fit(&n, &[2e-3; 6], &[1e-4; 6]).unwrap();
        assert!(flat.exponent.abs() < 1e-12);
        assert!(power_law_fit(&n, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0], &[0.1; 6]).is_err());
        assert!(power_law_fit(&[1.0, 2.0], &[1.0, 1.0], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn power_law_noisy_recovery() {
        let n = [1.0f64, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut rng = stream(9, &[3]);
        let t2: Vec<f64> = n.iter().map(|v| 10e-3 * v.powf(0.36) * (1.0 + normal.sample(&mut rng))).collect();
        let err: Vec<f64> = t2.iter().map(|t| 0.01 * t).collect();
        let fit = power_law_fit(&n, &t2, &err).unwrap();
        assert!((fit.exponent - 0.36).abs() < 3.0 * fit.exponent_err);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn fit_ignores_point_order(seed in 0u64..1000, rot in 1usize..11) {
                let x: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
                let normal = Normal::new(0.0, 0.05).unwrap();
                let mut rng = stream(seed, &[]);
                let y: Vec<f64> = x.iter().map(|x| 0.2 + 0.6 * (x - 1.0f64).cos() + normal.sample(&mut rng)).collect();
                let e = vec![0.05; 12];
                let a = nlls_fit(&Sine, &x, &y, &e, &[0.0, 0.5, 0.8]).unwrap();
                let mut xr = x.clone(); xr.rotate_left(rot);
                let mut yr = y.clone(); yr.rotate_left(rot);
                let b = nlls_fit(&Sine, &xr, &yr, &e, &[0.0, 0.5, 0.8]).unwrap();
                for k in 0..3 {
                    prop_assert!((a.params[k] - b.params[k]).abs() < 1e-8);
                }
            }

            #[test]
            fn common_scaling_of_linear_model(scale in 0.01f64..100.0) {
                let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
                let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.3 * x + 0.1 * (3.0 * x).sin()).collect();
                let e = vec![0.2; 10];
                let a = nlls_fit(&Linear, &x, &y, &e, &[0.0, 0.0]).unwrap();
                let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
                let es: Vec<f64> = e.iter().map(|v| v * scale).collect();
                let b = nlls_fit(&Linear, &x, &ys, &es, &[0.0, 0.0]).unwrap();
                prop_assert!((b.params[0] - scale * a.params[0]).abs() < 1e-8 * scale.max(1.0));
                prop_assert!((b.params[1] - scale * a.params[1]).abs() < 1e-8 * scale.max(1.0));
                prop_assert!((b.residual_norm - a.residual_norm).abs() < 1e-8);
                let c = nlls_fit(&Linear, &x, &y, &es, &[0.0, 0.0]).unwrap();
                prop_assert!((c.params[0] - a.params[0]).abs() < 1e-9);
                prop_assert!((c.params[1] - a.params[1]).abs() < 1e-9);
                prop_assert!((c.residual_norm * scale - a.residual_norm).abs() < 1e-8 * a.residual_norm);
            }
        }
    }
}
