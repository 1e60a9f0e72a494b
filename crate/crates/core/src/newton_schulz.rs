//! Coupled Newton-Schulz iteration for the matrix inverse square root.
//!
//! Given a covariance `Σ`, the engine
//!
//! 1. shrinks it in place, `Σ_ε = Σ + εI`,
//! 2. normalizes `Y_0 = Σ_ε / ‖Σ_ε‖_F`, `Z_0 = I`,
//! 3. iterates `T = 3I - Z_i Y_i`, `Y_{i+1} = Y_i T / 2`, `Z_{i+1} = T Z_i / 2`,
//! 4. returns `W = sym(Z_n) / ‖Σ_ε‖_F^{1/2}`.
//!
//! After the normalization in step 2 every eigenvalue of `Y_0` lies in
//! `(0, 1]`, so `‖I - Y_0‖_2 < 1` and the iteration converges. Step 4 undoes
//! the normalization: `Z_n → (Σ_ε / ‖Σ_ε‖_F)^{-1/2}`.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SymmetricMatrix};
use crate::moments::{shrink, CovarianceMatrix};

pub const DEFAULT_ITERATIONS: usize = 14;
pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSchulzConfig {
    pub iterations: usize,
    /// Shrinkage added to the diagonal before iterating.
    pub epsilon: f64,
    /// Final `‖Z_n Y_n - I‖_F` below which the result counts as converged.
    pub tolerance: f64,
}

impl Default for NewtonSchulzConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            epsilon: DEFAULT_EPSILON,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl NewtonSchulzConfig {
    pub fn new(iterations: usize, epsilon: f64) -> Result<Self> {
        let config = Self {
            iterations,
            epsilon,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ITERATIONS).contains(&self.iterations) {
            return Err(Error::InvalidConfig(format!(
                "iterations must be in 1..={MAX_ITERATIONS}, got {}",
                self.iterations
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningResult {
    /// Estimate of `(Σ + εI)^{-1/2}`.
    pub w: SymmetricMatrix,
    /// `‖Σ + εI‖_F`, used for both compensation steps.
    pub frobenius_norm: f64,
    /// `‖Z_i Y_i - I‖_F` after each iteration `i = 1..=n`.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl WhiteningResult {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

pub fn newton_schulz(sigma: &CovarianceMatrix, config: &NewtonSchulzConfig) -> Result<WhiteningResult> {
    config.validate()?;
    let shrunk = shrink(sigma, config.epsilon)?;
    let sigma_eps = shrunk.matrix();
    let norm = sigma_eps.frobenius_norm();
    assert!(norm > 0.0, "shrinkage with epsilon > 0 yields a nonzero norm");
    if !norm.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }

    let order = sigma_eps.order();
    let identity = Matrix::identity(order);
    let mut y = sigma_eps.as_matrix().scale(1.0 / norm);
    let mut z = Matrix::identity(order);
    let mut zy = y.clone();
    let mut residuals = Vec::with_capacity(config.iterations);

    for iteration in 1..=config.iterations {
        let t = zy.scale(-1.0).add_identity(3.0);
        y = y.matmul(&t).scale(0.5);
        z = t.matmul(&z).scale(0.5);
        zy = z.matmul(&y);
        if !(y.all_finite() && z.all_finite() && zy.all_finite()) {
            return Err(Error::Divergence { iteration });
        }
        residuals.push(zy.sub(&identity).frobenius_norm());
    }

    let w = SymmetricMatrix::symmetrized(z).scale(1.0 / norm.sqrt());
    let converged = residuals.last().is_some_and(|&r| r <= config.tolerance);
    Ok(WhiteningResult {
        w,
        frobenius_norm: norm,
        residuals,
        converged,
    })
}

/// `‖W Σ_ε W - I‖_F`.
pub fn whitening_residual(w: &SymmetricMatrix, sigma_eps: &SymmetricMatrix) -> Result<f64> {
    if w.order() != sigma_eps.order() {
        return Err(Error::DimensionMismatch {
            what: "whitening residual order",
            expected: sigma_eps.order(),
            actual: w.order(),
        });
    }
    let wm = w.as_matrix();
    let product = wm.matmul(sigma_eps.as_matrix()).matmul(wm);
    Ok(product.sub(&Matrix::identity(w.order())).frobenius_norm())
}
