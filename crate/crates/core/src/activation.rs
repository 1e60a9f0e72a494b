use crate::error::{Error, Result};
use crate::rng::Rng;

/// A `C x (H*W)` feature map stored row-major, one channel per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ActivationMap {
    /// Builds a map from `C*H*W` row-major entries. Requires at least two
    /// spatial samples so the covariance divisor `S - 1` is positive.
    pub fn new(channels: usize, height: usize, width: usize, entries: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidShape(format!(
                "dimensions must be positive, got C={channels} H={height} W={width}"
            )));
        }
        let samples = height * width;
        if samples < 2 {
            return Err(Error::InvalidShape(format!(
                "need at least 2 spatial samples, got H*W={samples}"
            )));
        }
        let expected = channels * samples;
        if entries.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: entries.len(),
            });
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data: entries,
        })
    }

    /// Standard normal entries.
    pub fn random_gaussian(channels: usize, height: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        let entries = rng.normals(channels * height * width);
        Self::new(channels, height, width, entries)
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.channels, self.height, self.width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Spatial sample count `S = H*W`.
    pub fn samples(&self) -> usize {
        self.height * self.width
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        let s = self.samples();
        &self.data[channel * s..(channel + 1) * s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.samples())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|v| v * factor).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn layout_is_channel_major() {
        let x = ActivationMap::new(2, 1, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(x.row(0), &[1.0, 3.0]);
        assert_eq!(x.row(1), &[2.0, 4.0]);
        assert_eq!(x.samples(), 2);
    }

    #[test]
    fn single_sample_rejected() {
        let err = ActivationMap::new(1, 1, 1, vec![5.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidShape(_)));
    }

    #[test]
    fn non_finite_reports_index() {
        let err = ActivationMap::new(2, 1, 2, vec![1.0, f64::NAN, 2.0, 4.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 1 });
        let err = ActivationMap::new(2, 1, 2, vec![1.0, 2.0, 3.0, f64::INFINITY]).unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 3 });
    }

    #[test]
    fn length_mismatch() {
        let err = ActivationMap::new(2, 2, 2, vec![0.0; 7]).unwrap_err();
        assert_eq!(err, Error::LengthMismatch { expected: 8, actual: 7 });
    }

    proptest! {
        #[test]
        fn flatten_round_trip(c in 1usize..5, h in 1usize..5, w in 2usize..5, seed in any::<u64>()) {
            let entries = Rng::new(seed).normals(c * h * w);
            let x = ActivationMap::new(c, h, w, entries.clone()).unwrap();
            prop_assert_eq!(x.into_vec(), entries);
        }
    }
}
