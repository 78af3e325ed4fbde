//! One-pass subset selection for `l_p` subspace approximation.
//!
//! Given points `X` in `R^d`, the goal is a small subset `S` of `X` whose span
//! nearly minimizes `err_p(X, V) = sum_x d(x, V)^p` over `k`-dimensional `V`.
//! Adaptive sampling achieves this but needs one pass over `X` per round.
//! This crate reads `X` once: it draws an i.i.d. pool from an easy mixture
//! distribution with weighted reservoirs ([`proposal`]), then simulates every
//! round of adaptive sampling with short independence Metropolis walks over
//! that pool ([`mcmc`]).
//!
//! [`baselines`] and [`oracles`] hold the exact multi-pass sampler and the
//! brute-force references used to check the walks, and [`experiment`] drives
//! best-of-R runs and reports.

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod mcmc;
pub mod oracles;
pub mod proposal;
pub mod rng;
pub mod stream;

pub use error::{Error, Result};
pub use geometry::{dist_to_span, err_p, extend_basis, ErrParams, PointSet, SubsetBasis};
pub use mcmc::{one_pass_adaptive_sample, theorem_params, SamplerConfig};
pub use stream::{open_csv, CsvOptions, DatasetSource, PassCounts, PassPurpose};
