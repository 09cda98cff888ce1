pub mod error;
pub mod experiment;
pub mod fitting;
pub mod noise;
pub mod pulse;
pub mod qubit;
pub mod records;
pub mod rng;
pub mod sequence;
pub mod simulate;
pub mod spin;
pub mod tomography;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spin-system.md")]
    mod spin_system {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/noise-readout.md")]
    mod noise_readout {}
    #[doc = include_str!("../../../book/src/state-tomography.md")]
    mod state_tomography {}
    #[doc = include_str!("../../../book/src/process-tomography.md")]
    mod process_tomography {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
