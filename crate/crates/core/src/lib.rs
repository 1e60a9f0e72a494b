//! Grouped whitening-and-coloring style injection.
//!
//! Feature maps are centered per channel, optionally rescaled by one global
//! standard deviation, split into channel groups, whitened with an inverse
//! square root of each group's covariance and recolored by a block-diagonal
//! coloring matrix. The inverse square root comes from a coupled
//! Newton-Schulz iteration; a cyclic Jacobi eigensolver provides the exact
//! reference used by the tests and the benchmark.

pub mod activation;
pub mod error;
pub mod matrix;
pub mod moments;
pub mod newton_schulz;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod style;

pub use activation::ActivationMap;
pub use error::{Error, Result};
pub use matrix::{random_spd, Matrix, SymmetricMatrix};
pub use moments::{center, covariance, covariance_rows, shrink, uniform_normalize, CenteredActivations, CovarianceMatrix};
pub use newton_schulz::{newton_schulz, whitening_residual, NewtonSchulzConfig, WhiteningResult};
pub use rng::Rng;
pub use solver::{EigenSolver, NewtonSchulzSolver, SolverRegistry, WhiteningSolver};
pub use spectral::{analyze_convergence, eigendecompose, oracle_inverse_sqrt, singular_values, EigenDecomposition, SpectralReport};
pub use style::{
    adain, adain_with, adawct, adawct_with, parameter_count, project_style, whiten_grouped, whiten_grouped_with,
    AdaINParams, ChannelStd, GroupLayout, Injection, StyleParams, StyleProjector, StyleVector,
};
