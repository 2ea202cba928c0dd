//! Gaussian-process regression with a truncated Mercer expansion of the
//! squared-exponential kernel.
//!
//! The kernel `exp(-Σ_d ε_d² (x_d - x'_d)²)` is approximated by `Φ Λ Φᵀ`, where
//! `Φ` holds `n^p` tensor-product Hermite eigenfunctions evaluated at the
//! inputs and `Λ` the matching eigenvalues. With the Woodbury identity the
//! posterior only needs an `n^p × n^p` solve, so cost is linear in the number
//! of training samples. An exact `O(N³)` posterior is provided as reference.
//!
//! Linear algebra runs on a [`Backend`](backend::Backend) that is either
//! serial or a fixed-size worker pool; both produce the same bits by default.

pub mod backend;
pub mod datagen;
pub mod error;
pub mod kernel;
pub mod matrix;
pub mod posterior;

pub use backend::{Backend, Mode, Op, Phase, TimingRecord};
pub use datagen::{Dataset, Domain};
pub use error::{Error, Result};
pub use kernel::{ArdKernelParams, EigenSystem, KernelParams1D, MemoryBudget};
pub use matrix::Matrix;
pub use posterior::{exact_posterior, fagp_posterior, GpModel, PosteriorResult, PriorMean, WoodburyPath};
