//! Centering, covariance, uniform normalization and diagonal shrinkage.
//!
//! Sums run left to right over columns, then rows, so every result here is
//! bit-reproducible.

use std::ops::Range;

use crate::activation::ActivationMap;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, SymmetricMatrix};

/// Row-centered activations `X - mean(X) 1^T`, optionally divided by one
/// global standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredActivations {
    channels: usize,
    samples: usize,
    data: Vec<f64>,
    row_means: Vec<f64>,
    uniform_scale: f64,
}

impl CenteredActivations {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.samples..(channel + 1) * self.samples]
    }

    /// Rows `channels` as one contiguous row-major block.
    pub fn rows(&self, channels: Range<usize>) -> &[f64] {
        &self.data[channels.start * self.samples..channels.end * self.samples]
    }

    /// The per-channel means subtracted by [`center`].
    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    /// Product of all uniform-normalization divisors applied so far.
    pub fn uniform_scale(&self) -> f64 {
        self.uniform_scale
    }

    pub fn scale(&self, factor: f64) -> CenteredActivations {
        CenteredActivations {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// `Σ = X̄ X̄^T / (S - 1)` together with the sample count `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: SymmetricMatrix,
    sample_count: usize,
}

impl CovarianceMatrix {
    /// Wraps an externally supplied matrix, e.g. one read from disk.
    pub fn from_matrix(matrix: SymmetricMatrix, sample_count: usize) -> Self {
        Self { matrix, sample_count }
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SymmetricMatrix {
        self.matrix
    }

    pub fn order(&self) -> usize {
        self.matrix.order()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Subtracts each channel's own mean.
pub fn center(x: &ActivationMap) -> CenteredActivations {
    let samples = x.samples();
    let mut data = Vec::with_capacity(x.as_slice().len());
    let mut row_means = Vec::with_capacity(x.channels());
    for row in x.rows() {
        let m = mean(row);
        row_means.push(m);
        data.extend(row.iter().map(|v| v - m));
    }
    CenteredActivations {
        channels: x.channels(),
        samples,
        data,
        row_means,
        uniform_scale: 1.0,
    }
}

/// Population standard deviation over every entry.
pub fn global_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    (ss / values.len() as f64).sqrt()
}

/// Divides the centered data by its population standard deviation taken
/// across all channels and pixels. The whitened output is unchanged by
/// this rescaling while the covariance norm stays near the channel count.
pub fn uniform_normalize(xbar: &CenteredActivations) -> Result<CenteredActivations> {
    let s = global_std(&xbar.data);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::DegenerateActivations);
    }
    Ok(CenteredActivations {
        data: xbar.data.iter().map(|v| v / s).collect(),
        uniform_scale: xbar.uniform_scale * s,
        ..xbar.clone()
    })
}

/// Covariance of a contiguous block of centered rows.
pub fn covariance_rows(xbar: &CenteredActivations, channels: Range<usize>) -> CovarianceMatrix {
    gram_covariance(xbar.rows(channels.clone()), channels.len(), xbar.samples)
}

pub fn covariance(xbar: &CenteredActivations) -> CovarianceMatrix {
    covariance_rows(xbar, 0..xbar.channels)
}

fn gram_covariance(block: &[f64], rows: usize, samples: usize) -> CovarianceMatrix {
    debug_assert!(samples >= 2);
    let divisor = (samples - 1) as f64;
    let mut out = vec![0.0; rows * rows];
    for i in 0..rows {
        let ri = &block[i * samples..(i + 1) * samples];
        for j in i..rows {
            let rj = &block[j * samples..(j + 1) * samples];
            let dot = ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>() / divisor;
            out[i * rows + j] = dot;
            out[j * rows + i] = dot;
        }
    }
    CovarianceMatrix {
        matrix: SymmetricMatrix::symmetrized(Matrix::from_raw(rows, rows, out)),
        sample_count: samples,
    }
}

/// `Σ + εI`.
pub fn shrink(sigma: &CovarianceMatrix, epsilon: f64) -> Result<CovarianceMatrix> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "shrinkage epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(CovarianceMatrix {
        matrix: sigma.matrix.add_identity(epsilon),
        sample_count: sigma.sample_count,
    })
}
