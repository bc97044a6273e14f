//! Multivariate Fast Iterative Filtering.
//!
//! Splits an `n`-channel signal into intrinsic mode functions that share one filter
//! length per mode across channels, plus a trend. The univariate variant, a dense
//! reference operator, spectral diagnostics and synthetic generators are included.

pub mod analysis;
pub mod bench;
pub mod decompose;
pub mod error;
pub mod filter;
pub mod forge;
pub mod io;
pub mod oracle;
pub mod rotation;
pub mod scalar;
pub mod selftest;
pub mod signal;

pub use decompose::{fif_decompose, fif_decompose_channels, inner_loop, mvfif_decompose, InnerLoopOutcome};
pub use error::{MvfifError, Result};
pub use filter::{build_kernel, eigenvalues, EigenvalueVector, FilterKernel, FilterShape};
pub use rotation::{compute_theta, find_extrema, ExtremaSet, FilterLength, ThetaSeries};
pub use scalar::Scalar;
pub use signal::{
    crop, pre_extend, validate, Decomposition, DecompositionConfig, Extension, ImfMeta, Method,
    MultivariateSignal, StopReason, StopRule,
};

pub type Signal64 = MultivariateSignal<f64>;
pub type Signal32 = MultivariateSignal<f32>;
pub type Decomposition64 = Decomposition<f64>;
pub type Decomposition32 = Decomposition<f32>;
pub type Config64 = DecompositionConfig<f64>;
pub type Config32 = DecompositionConfig<f32>;
pub type Kernel64 = FilterKernel<f64>;
