//! State and process tomography of the electron qubit.

pub mod fidelity;
pub mod mle;
pub mod montecarlo;
pub mod process;
pub mod state;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Readout settings for XY-plane tomography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyPlan {
    /// Phases of the tomography π/2 pulse, degrees.
    pub phases: Vec<f64>,
    /// Also measure Z directly.
    pub include_z: bool,
}

impl Default for TomographyPlan {
    fn default() -> Self {
        Self {
            phases: (0..24).map(|k| 15.0 * k as f64).collect(),
            include_z: true,
        }
    }
}

impl TomographyPlan {
    pub fn validate(&self) -> Result<()> {
        if self.phases.len() < 4 {
            return Err(invalid("phases", "need at least 4 phases"));
        }
        if let Some(p) = self.phases.iter().find(|p| !(0.0..360.0).contains(*p)) {
            return Err(invalid("phases", format!("{p} outside [0, 360)")));
        }
        if self.phases.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("phases", "must be strictly increasing"));
        }
        Ok(())
    }
}
