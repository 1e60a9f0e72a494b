//! Style injection: AdaIN, grouped AdaWCT and the seeded style projection.
//!
//! Grouped AdaWCT splits the `C` channels into `n = C / G` contiguous groups,
//! whitens each group with its own `W_j = Σ_j^{-1/2}` and colors it with a
//! `G x G` block `Γ_j`:
//!
//! ```text
//! X̃ = Γ_B W_B (X - μ̂(X) 1^T) + μ 1^T
//! ```
//!
//! `W_B` and `Γ_B` are block diagonal and only ever handled block by block.
//! `G = C` is full whitening and coloring; `G = 1` reduces to AdaIN.

use std::ops::Range;

use rayon::prelude::*;

use crate::activation::ActivationMap;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::moments::{center, covariance_rows, uniform_normalize, CenteredActivations};
use crate::newton_schulz::{NewtonSchulzConfig, WhiteningResult};
use crate::rng::Rng;
use crate::solver::{NewtonSchulzSolver, WhiteningSolver};

/// Default latent style dimension.
pub const DEFAULT_STYLE_DIM: usize = 64;

/// Variance floor added inside the AdaIN standard deviation.
pub const ADAIN_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupLayout {
    channels: usize,
    group_size: usize,
}

impl GroupLayout {
    pub fn new(channels: usize, group_size: usize) -> Result<Self> {
        if channels == 0 || group_size == 0 || group_size > channels || !channels.is_multiple_of(group_size) {
            return Err(Error::InvalidConfig(format!(
                "group size {group_size} must divide channel count {channels}"
            )));
        }
        Ok(Self { channels, group_size })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn group_count(&self) -> usize {
        self.channels / self.group_size
    }

    pub fn group(&self, j: usize) -> Range<usize> {
        j * self.group_size..(j + 1) * self.group_size
    }

    /// Length of the projected style vector, `C + n G²`.
    pub fn projected_len(&self) -> usize {
        self.channels + self.group_count() * self.group_size * self.group_size
    }
}

/// Number of weights in an affine projection from a `style_dim` latent to
/// `(μ, Γ_B)` for the given grouping.
pub fn parameter_count(channels: usize, style_dim: usize, group_size: usize) -> Result<u64> {
    let layout = GroupLayout::new(channels, group_size)?;
    Ok(style_dim as u64 * layout.projected_len() as u64)
}

/// Per-channel shift and block-diagonal coloring. Blocks need not be
/// symmetric or positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleParams {
    pub mu: Vec<f64>,
    pub gamma_blocks: Vec<Matrix>,
}

impl StyleParams {
    pub fn new(mu: Vec<f64>, gamma_blocks: Vec<Matrix>) -> Result<Self> {
        let style = Self { mu, gamma_blocks };
        if let Some(index) = style.mu.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let covered: usize = style.gamma_blocks.iter().map(Matrix::rows).sum();
        if covered != style.mu.len() {
            return Err(Error::DimensionMismatch {
                what: "coloring blocks cover",
                expected: style.mu.len(),
                actual: covered,
            });
        }
        if style.gamma_blocks.iter().any(|b| !b.is_square() || !b.all_finite()) {
            return Err(Error::InvalidShape("coloring blocks must be square and finite".into()));
        }
        Ok(style)
    }

    /// `μ = 0`, `Γ_j = I`.
    pub fn identity(layout: &GroupLayout) -> Self {
        Self {
            mu: vec![0.0; layout.channels()],
            gamma_blocks: vec![Matrix::identity(layout.group_size()); layout.group_count()],
        }
    }

    fn check_layout(&self, layout: &GroupLayout) -> Result<()> {
        if self.mu.len() != layout.channels() {
            return Err(Error::DimensionMismatch {
                what: "style shift length",
                expected: layout.channels(),
                actual: self.mu.len(),
            });
        }
        if self.gamma_blocks.len() != layout.group_count() {
            return Err(Error::DimensionMismatch {
                what: "coloring block count",
                expected: layout.group_count(),
                actual: self.gamma_blocks.len(),
            });
        }
        for block in &self.gamma_blocks {
            if block.rows() != layout.group_size() || block.cols() != layout.group_size() {
                return Err(Error::DimensionMismatch {
                    what: "coloring block order",
                    expected: layout.group_size(),
                    actual: block.rows(),
                });
            }
        }
        Ok(())
    }
}

/// Latent style code `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleVector {
    w: Vec<f64>,
}

impl StyleVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidShape("style vector must not be empty".into()));
        }
        if let Some(index) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { w })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn random(dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(rng.normals(dim))
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// Affine map `v = M w + b` reshaped into `(μ, Γ_B)`, with `+I` added to
/// every coloring block. Weights are standard normals scaled by `1/sqrt(D)`,
/// drawn row by row from a seeded [`Rng`]; the bias starts at zero.
#[derive(Debug, Clone)]
pub struct StyleProjector {
    layout: GroupLayout,
    weights: Matrix,
    bias: Vec<f64>,
}

impl StyleProjector {
    pub fn seeded(layout: GroupLayout, style_dim: usize, seed: u64) -> Result<Self> {
        if style_dim == 0 {
            return Err(Error::InvalidConfig("style dimension must be positive".into()));
        }
        let outputs = layout.projected_len();
        let mut rng = Rng::new(seed);
        let scale = 1.0 / (style_dim as f64).sqrt();
        let data = (0..outputs * style_dim).map(|_| rng.normal() * scale).collect();
        Ok(Self {
            layout,
            weights: Matrix::new(outputs, style_dim, data)?,
            bias: vec![0.0; outputs],
        })
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != self.bias.len() {
            return Err(Error::DimensionMismatch {
                what: "projector bias length",
                expected: self.bias.len(),
                actual: bias.len(),
            });
        }
        if let Some(index) = bias.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn style_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn parameter_count(&self) -> u64 {
        (self.weights.rows() * self.weights.cols()) as u64
    }

    pub fn project(&self, w: &StyleVector) -> Result<StyleParams> {
        if w.dim() != self.style_dim() {
            return Err(Error::DimensionMismatch {
                what: "style vector length",
                expected: self.style_dim(),
                actual: w.dim(),
            });
        }
        let mut projected = self.weights.matmul_slice(w.as_slice(), 1);
        for (v, b) in projected.iter_mut().zip(&self.bias) {
            *v += b;
        }

        let c = self.layout.channels();
        let g = self.layout.group_size();
        let mu = projected[..c].to_vec();
        let gamma_blocks = projected[c..]
            .chunks_exact(g * g)
            .map(|chunk| Matrix::new(g, g, chunk.to_vec()).map(|m| m.add_identity(1.0)))
            .collect::<Result<Vec<_>>>()?;
        StyleParams::new(mu, gamma_blocks)
    }
}

/// Projects `w` with a projector drawn from `projector_seed`.
pub fn project_style(w: &StyleVector, layout: &GroupLayout, projector_seed: u64) -> Result<StyleParams> {
    StyleProjector::seeded(*layout, w.dim(), projector_seed)?.project(w)
}

/// Target statistics for AdaIN.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaINParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl AdaINParams {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                what: "AdaIN sigma length",
                expected: mu.len(),
                actual: sigma.len(),
            });
        }
        if let Some(index) = mu.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("AdaIN sigma must be positive".into()));
        }
        Ok(Self { mu, sigma })
    }

    /// The statistics AdaIN itself measures on `x`, so that injecting them
    /// reproduces `x`.
    pub fn from_statistics(x: &ActivationMap, std: ChannelStd) -> Self {
        let (mu, sigma) = x
            .rows()
            .map(|row| {
                let (m, v) = std.moments(row);
                (m, v.sqrt())
            })
            .unzip();
        Self { mu, sigma }
    }
}

/// How AdaIN measures a channel's standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelStd {
    /// `sqrt(Σ(x - m)² / S + floor)`.
    Population { floor: f64 },
    /// `sqrt(Σ(x - m)² / (S - 1) + epsilon)`; the per-channel quantity that
    /// `G = 1` whitening divides by.
    Shrunk { epsilon: f64 },
}

impl Default for ChannelStd {
    fn default() -> Self {
        ChannelStd::Population {
            floor: ADAIN_VARIANCE_FLOOR,
        }
    }
}

impl ChannelStd {
    /// Mean and the (floored or shrunk) variance of one channel.
    fn moments(&self, row: &[f64]) -> (f64, f64) {
        let n = row.len() as f64;
        let m = row.iter().sum::<f64>() / n;
        let ss = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        match *self {
            ChannelStd::Population { floor } => (m, ss / n + floor),
            ChannelStd::Shrunk { epsilon } => (m, ss / (n - 1.0) + epsilon),
        }
    }
}

/// `diag(σ) diag(1/σ̂(X)) (X - μ̂(X) 1^T) + μ 1^T` with the default
/// population standard deviation.
pub fn adain(x: &ActivationMap, params: &AdaINParams) -> Result<ActivationMap> {
    adain_with(x, params, ChannelStd::default())
}

pub fn adain_with(x: &ActivationMap, params: &AdaINParams, std: ChannelStd) -> Result<ActivationMap> {
    if params.mu.len() != x.channels() {
        return Err(Error::DimensionMismatch {
            what: "AdaIN parameter length",
            expected: x.channels(),
            actual: params.mu.len(),
        });
    }
    let mut data = Vec::with_capacity(x.as_slice().len());
    for (i, row) in x.rows().enumerate() {
        let (m, v) = std.moments(row);
        let gain = params.sigma[i] / v.sqrt();
        data.extend(row.iter().map(|value| gain * (value - m) + params.mu[i]));
    }
    x.with_data(data)
}

/// Output of a grouped transform with the per-group solver diagnostics.
#[derive(Debug, Clone)]
pub struct Injection {
    pub output: ActivationMap,
    /// One entry per group, in group order.
    pub whitening: Vec<WhiteningResult>,
}

/// Grouped AdaWCT with the Newton-Schulz solver.
pub fn adawct(
    x: &ActivationMap,
    style: &StyleParams,
    layout: &GroupLayout,
    ns_config: &NewtonSchulzConfig,
    use_uniform_norm: bool,
) -> Result<ActivationMap> {
    let solver = NewtonSchulzSolver::new(*ns_config)?;
    Ok(adawct_with(&solver, x, style, layout, use_uniform_norm)?.output)
}

/// Grouped whitening `W_B (X - μ̂(X) 1^T)` with the Newton-Schulz solver.
pub fn whiten_grouped(
    x: &ActivationMap,
    layout: &GroupLayout,
    ns_config: &NewtonSchulzConfig,
    use_uniform_norm: bool,
) -> Result<ActivationMap> {
    let solver = NewtonSchulzSolver::new(*ns_config)?;
    Ok(whiten_grouped_with(&solver, x, layout, use_uniform_norm)?.output)
}

pub fn adawct_with(
    solver: &dyn WhiteningSolver,
    x: &ActivationMap,
    style: &StyleParams,
    layout: &GroupLayout,
    use_uniform_norm: bool,
) -> Result<Injection> {
    style.check_layout(layout)?;
    grouped_transform(solver, x, layout, use_uniform_norm, Some(style))
}

pub fn whiten_grouped_with(
    solver: &dyn WhiteningSolver,
    x: &ActivationMap,
    layout: &GroupLayout,
    use_uniform_norm: bool,
) -> Result<Injection> {
    grouped_transform(solver, x, layout, use_uniform_norm, None)
}

fn grouped_transform(
    solver: &dyn WhiteningSolver,
    x: &ActivationMap,
    layout: &GroupLayout,
    use_uniform_norm: bool,
    style: Option<&StyleParams>,
) -> Result<Injection> {
    if layout.channels() != x.channels() {
        return Err(Error::DimensionMismatch {
            what: "layout channels",
            expected: x.channels(),
            actual: layout.channels(),
        });
    }
    let mut xbar = center(x);
    if use_uniform_norm {
        xbar = uniform_normalize(&xbar)?;
    }

    let per_group = (0..layout.group_count())
        .into_par_iter()
        .map(|j| transform_group(solver, &xbar, layout.group(j), style.map(|s| (s, j))))
        .collect::<Result<Vec<_>>>()?;

    let mut data = Vec::with_capacity(x.as_slice().len());
    let mut whitening = Vec::with_capacity(per_group.len());
    for (rows, result) in per_group {
        data.extend(rows);
        whitening.push(result);
    }
    Ok(Injection {
        output: x.with_data(data)?,
        whitening,
    })
}

fn transform_group(
    solver: &dyn WhiteningSolver,
    xbar: &CenteredActivations,
    channels: Range<usize>,
    style: Option<(&StyleParams, usize)>,
) -> Result<(Vec<f64>, WhiteningResult)> {
    let samples = xbar.samples();
    let sigma = covariance_rows(xbar, channels.clone());
    let result = solver.solve(&sigma)?;
    let whitened = result.w.as_matrix().matmul_slice(xbar.rows(channels.clone()), samples);
    let rows = match style {
        None => whitened,
        Some((style, j)) => {
            let mut colored = style.gamma_blocks[j].matmul_slice(&whitened, samples);
            for (row, &shift) in colored.chunks_exact_mut(samples).zip(&style.mu[channels]) {
                row.iter_mut().for_each(|v| *v += shift);
            }
            colored
        }
    };
    Ok((rows, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_divisibility() {
        assert!(GroupLayout::new(32, 5).is_err());
        assert!(GroupLayout::new(32, 0).is_err());
        assert!(GroupLayout::new(4, 8).is_err());
        let l = GroupLayout::new(32, 8).unwrap();
        assert_eq!(l.group_count(), 4);
        assert_eq!(l.group(2), 16..24);
    }

    #[test]
    fn parameter_count_arithmetic() {
        assert_eq!(parameter_count(256, 512, 256).unwrap(), 33_685_504);
        assert_eq!(parameter_count(256, 512, 64).unwrap(), 8_519_680);
        assert_eq!(parameter_count(4, 1, 2).unwrap(), 12);
    }

    #[test]
    fn adain_single_row() {
        let x = ActivationMap::new(1, 1, 2, vec![1.0, 3.0]).unwrap();
        let params = AdaINParams::new(vec![5.0], vec![2.0]).unwrap();
        let y = adain(&x, &params).unwrap();
        // mean 2, population std sqrt(1 + 1e-8)
        let gain = 2.0 / (1.0f64 + 1e-8).sqrt();
        assert_eq!(y.as_slice(), &[5.0 - gain, 5.0 + gain]);
        assert!((y.as_slice()[0] - 3.0).abs() < 1e-7);
        assert!((y.as_slice()[1] - 7.0).abs() < 1e-7);
    }

    #[test]
    fn adain_constant_row_is_centered() {
        let x = ActivationMap::new(1, 1, 2, vec![4.0, 4.0]).unwrap();
        let params = AdaINParams::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(adain(&x, &params).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn adain_rejects_mismatch() {
        let x = ActivationMap::new(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let params = AdaINParams::new(vec![0.0], vec![1.0]).unwrap();
        assert!(adain(&x, &params).is_err());
        assert!(AdaINParams::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn projector_zero_style_is_identity() {
        let layout = GroupLayout::new(4, 2).unwrap();
        let style = project_style(&StyleVector::zeros(8).unwrap(), &layout, 7).unwrap();
        assert_eq!(style, StyleParams::identity(&layout));
    }

    #[test]
    fn projector_shapes_and_determinism() {
        let layout = GroupLayout::new(4, 2).unwrap();
        let projector = StyleProjector::seeded(layout, 3, 7).unwrap();
        assert_eq!(projector.parameter_count(), 36);
        let w = StyleVector::new(vec![0.3, -1.0, 2.0]).unwrap();
        let a = projector.project(&w).unwrap();
        let b = project_style(&w, &layout, 7).unwrap();
        assert_eq!(a.mu.len(), 4);
        assert_eq!(a.gamma_blocks.len(), 2);
        assert!(a.gamma_blocks.iter().all(|g| g.rows() == 2 && g.cols() == 2));
        let bits = |s: &StyleParams| {
            s.mu.iter()
                .chain(s.gamma_blocks.iter().flat_map(|g| g.as_slice()))
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&project_style(&w, &layout, 8).unwrap()));
    }

    #[test]
    fn projector_rejects_wrong_dim() {
        let layout = GroupLayout::new(4, 2).unwrap();
        let projector = StyleProjector::seeded(layout, 3, 7).unwrap();
        assert!(projector.project(&StyleVector::zeros(4).unwrap()).is_err());
    }

    #[test]
    fn style_params_validation() {
        let layout = GroupLayout::new(4, 2).unwrap();
        let x = ActivationMap::new(4, 1, 3, (0..12).map(|v| (v * v % 7) as f64).collect()).unwrap();
        let wrong = StyleParams::identity(&GroupLayout::new(4, 4).unwrap());
        let config = NewtonSchulzConfig::default();
        assert!(adawct(&x, &wrong, &layout, &config, false).is_err());
        assert!(StyleParams::new(vec![0.0; 3], vec![Matrix::identity(2)]).is_err());
    }

    #[test]
    fn degenerate_input_with_uniform_norm_errors() {
        let x = ActivationMap::new(2, 2, 2, vec![3.0; 8]).unwrap();
        let layout = GroupLayout::new(2, 1).unwrap();
        let config = NewtonSchulzConfig::default();
        assert_eq!(
            whiten_grouped(&x, &layout, &config, true).unwrap_err(),
            Error::DegenerateActivations
        );
        // Without the global rescaling the shrinkage keeps it well defined.
        let y = whiten_grouped(&x, &layout, &config, false).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }
}
