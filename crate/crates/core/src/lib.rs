//! Matching decoders for repetition and surface codes under a phenomenological
//! noise model whose measurement-error rates vary from site to site.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] builds space-time decoding graphs and edge weights,
//! * [`noise`] draws local rates and samples error configurations,
//! * [`syndrome`] turns errors into defects and classifies residuals,
//! * [`matching`] solves minimum-weight perfect matching exactly,
//! * [`decoder`] turns defects into corrections in mean-rate or local-rate mode,
//! * [`analysis`] holds the closed-form and sampled significance measures,
//! * [`harness`] runs seeded, parallel, paired Monte Carlo experiments.

pub mod analysis;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod matching;
pub mod noise;
pub mod syndrome;

pub use error::{Error, Result};
