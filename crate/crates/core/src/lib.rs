//! Permutation two-sample tests built on the quadratic-time MMD U-statistic.
//!
//! The central tests fuse MMD estimates from a bank of kernels into a single
//! weighted soft maximum (`FUSE-N` normalises each MMD by a permutation-invariant
//! scale, `FUSE-1` does not). Kernel bandwidths are picked from the unordered
//! pooled sample, so every statistic is calibrated by the same permutation
//! quantile without splitting the data.
//!
//! ```
//! use mmd_fuse::{run_test, synth, TestConfig};
//!
//! let x = synth::sample_shifted_gaussian(40, 1, 0.0, 1.0, 1);
//! let y = synth::sample_shifted_gaussian(40, 1, 3.0, 1.0, 2);
//! let mut config = TestConfig::default();
//! config.permutation.permutations = 200;
//! let result = run_test(&x, &y, &config).unwrap();
//! assert!(result.reject);
//! ```

pub mod baselines;
pub mod cli;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fuse;
pub mod io;
pub mod kernels;
pub mod mmd;
pub mod permutation;
pub mod quantile;
pub mod seed;
pub mod synth;

pub use error::{DataError, Error, Result};
pub use exec::Execution;
pub use fuse::{FuseConfig, FuseValue, FuseVariant, Lambda};
pub use kernels::{
    BankConfig, DataMatrix, GramMatrix, GramStack, KernelBank, KernelFamily, KernelSpec,
    NormalizerDenominator, PooledSample, SimplexWeights,
};
pub use permutation::{
    run_test, PermutationConfig, PermutationSet, Statistic, TestConfig, TestResult,
};
