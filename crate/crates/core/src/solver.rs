//! Interchangeable inverse-square-root strategies, registered by name.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::moments::{shrink, CovarianceMatrix};
use crate::newton_schulz::{newton_schulz, whitening_residual, NewtonSchulzConfig, WhiteningResult};
use crate::spectral::oracle_inverse_sqrt;

/// Computes a whitening matrix `(Σ + εI)^{-1/2}` for a covariance.
pub trait WhiteningSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn config(&self) -> &NewtonSchulzConfig;

    fn solve(&self, sigma: &CovarianceMatrix) -> Result<WhiteningResult>;
}

impl fmt::Debug for dyn WhiteningSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WhiteningSolver")
            .field("name", &self.name())
            .field("config", self.config())
            .finish()
    }
}

/// The multiplication-only iteration; the default strategy.
#[derive(Debug, Clone)]
pub struct NewtonSchulzSolver {
    config: NewtonSchulzConfig,
}

impl NewtonSchulzSolver {
    pub const NAME: &'static str = "newton-schulz";

    pub fn new(config: NewtonSchulzConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl WhiteningSolver for NewtonSchulzSolver {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn config(&self) -> &NewtonSchulzConfig {
        &self.config
    }

    fn solve(&self, sigma: &CovarianceMatrix) -> Result<WhiteningResult> {
        newton_schulz(sigma, &self.config)
    }
}

/// Jacobi eigendecomposition. Ignores the iteration count; `residuals`
/// holds the single value `‖W Σ_ε W - I‖_F`.
#[derive(Debug, Clone)]
pub struct EigenSolver {
    config: NewtonSchulzConfig,
}

impl EigenSolver {
    pub const NAME: &'static str = "eigen";

    pub fn new(config: NewtonSchulzConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl WhiteningSolver for EigenSolver {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn config(&self) -> &NewtonSchulzConfig {
        &self.config
    }

    fn solve(&self, sigma: &CovarianceMatrix) -> Result<WhiteningResult> {
        let shrunk = shrink(sigma, self.config.epsilon)?;
        let w = oracle_inverse_sqrt(shrunk.matrix())?;
        let residual = whitening_residual(&w, shrunk.matrix())?;
        Ok(WhiteningResult {
            w,
            frobenius_norm: shrunk.matrix().frobenius_norm(),
            residuals: vec![residual],
            converged: residual <= self.config.tolerance,
        })
    }
}

type Factory = fn(NewtonSchulzConfig) -> Result<Box<dyn WhiteningSolver>>;

/// Name-to-constructor table for [`WhiteningSolver`]s.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `newton-schulz` and `eigen`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register(NewtonSchulzSolver::NAME, |c| {
            Ok(Box::new(NewtonSchulzSolver::new(c)?))
        });
        registry.register(EigenSolver::NAME, |c| Ok(Box::new(EigenSolver::new(c)?)));
        registry
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str, config: NewtonSchulzConfig) -> Result<Box<dyn WhiteningSolver>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))?;
        factory(config)
    }
}

impl fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymmetricMatrix;

    #[test]
    fn builtins_are_registered() {
        let registry = SolverRegistry::with_builtins();
        assert_eq!(registry.names().collect::<Vec<_>>(), vec!["eigen", "newton-schulz"]);
        let solver = registry.create("newton-schulz", NewtonSchulzConfig::default()).unwrap();
        assert_eq!(solver.name(), "newton-schulz");
        assert!(matches!(
            registry.create("svd", NewtonSchulzConfig::default()),
            Err(Error::UnknownSolver(_))
        ));
    }

    #[test]
    fn strategies_agree_on_diagonal() {
        let registry = SolverRegistry::with_builtins();
        let sigma = CovarianceMatrix::from_matrix(SymmetricMatrix::from_diagonal(&[4.0, 1.0, 0.25]), 2);
        let config = NewtonSchulzConfig::default();
        let ns = registry.create("newton-schulz", config).unwrap().solve(&sigma).unwrap();
        let eig = registry.create("eigen", config).unwrap().solve(&sigma).unwrap();
        let diff = ns.w.as_matrix().sub(eig.w.as_matrix()).max_abs();
        assert!(diff < 1e-10, "diff={diff}");
        assert!(eig.converged);
        assert_eq!(eig.residuals.len(), 1);
    }

    #[test]
    fn invalid_config_is_rejected_by_factory() {
        let registry = SolverRegistry::with_builtins();
        let config = NewtonSchulzConfig {
            epsilon: 0.0,
            ..NewtonSchulzConfig::default()
        };
        assert!(registry.create("eigen", config).is_err());
    }
}
