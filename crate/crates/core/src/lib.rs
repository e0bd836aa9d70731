//! Edge-preserving smoothing of 1-D signals by Perona-Malik diffusion.
//!
//! Each Crank-Nicolson step of the diffusion PDE is solved as a least-squares
//! support vector regression over a shifted Legendre basis, either by
//! collocation at training points or by Galerkin projection, with the
//! endpoint values held as hard constraints. Moving-average and
//! Savitzky-Golay smoothers and an SNR metric are provided for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod diffusion;
pub mod error;
pub mod lssvr;
pub mod metrics;
pub mod orthopoly;
pub mod pipeline;
pub mod scenario;
pub mod signal;

pub use error::{Error, Result};
pub use orthopoly::{BasisSpec, Normalization, QuadratureRule};
pub use signal::{CubicSpline, SampledSignal, SpectralSignal};
