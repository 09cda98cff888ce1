//! Model fits on curve files.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fitting::{power_law_fit, stretched_exp_fit, PowerLawFit, StretchedExpFit};
use crate::tomography::state::{sinusoid_fit, SinusoidFit};

use super::output::{CurvePoint, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `y0 + K exp(−(x/T2)^α)`.
    StretchedExp,
    /// `c · x^e`.
    PowerLaw,
    /// `offset + amplitude cos(x − phase)`, `x` in degrees.
    Sinusoid,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitOutcome {
    StretchedExp(StretchedExpFit),
    PowerLaw(PowerLawFit),
    Sinusoid(SinusoidFit),
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub n_points: usize,
    /// True when `y_err` was absent or zero and unit weights were used.
    pub unit_weights: bool,
    pub fit: FitOutcome,
}

pub fn run_fit(kind: FitKind, points: &[CurvePoint], out: Option<&mut Output>) -> Result<FitReport> {
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let unit_weights = points.iter().any(|p| !(p.y_err > 0.0));
    let e: Vec<f64> = if unit_weights {
        vec![0.0; points.len()]
    } else {
        points.iter().map(|p| p.y_err).collect()
    };
    let fit = match kind {
        FitKind::StretchedExp => FitOutcome::StretchedExp(stretched_exp_fit(&x, &y, &e)?),
        FitKind::PowerLaw => FitOutcome::PowerLaw(power_law_fit(&x, &y, &e)?),
        FitKind::Sinusoid => FitOutcome::Sinusoid(sinusoid_fit(&x, &y, &e)?),
    };
    let report = FitReport {
        n_points: points.len(),
        unit_weights,
        fit,
    };
    if let Some(out) = out {
        out.json("fit.json", &report)?;
    }
    Ok(report)
}
