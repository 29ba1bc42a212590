//! Small sample statistics shared by the estimators and evaluators.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// SHA-256 over the little-endian bit patterns of a sample array.
///
/// Used to prove that several fits were computed on the same data.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleHash(String);

impl SampleHash {
    pub fn of(y: &[f64]) -> Self {
        let mut hasher = Sha256::new();
        for v in y {
            hasher.update(v.to_le_bytes());
        }
        SampleHash(format!("{:x}", hasher.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SampleHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A parameter set tagged with the hash of the data it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted<P> {
    pub params: P,
    pub data_hash: SampleHash,
}

impl<P> Fitted<P> {
    pub fn on(y: &[f64], params: P) -> Self {
        Fitted {
            params,
            data_hash: SampleHash::of(y),
        }
    }
}

pub fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// Population (1/N) variance about the mean.
pub fn variance(y: &[f64]) -> f64 {
    let m = mean(y);
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / y.len() as f64
}

/// Lower median: for even N, the smaller of the two central order statistics.
pub fn lower_median(y: &[f64]) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    lower_median_sorted(&sorted)
}

pub fn lower_median_sorted(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

pub fn mean_abs_deviation(y: &[f64], center: f64) -> f64 {
    y.iter().map(|v| (v - center).abs()).sum::<f64>() / y.len() as f64
}

/// True when every sample equals the first.
pub fn has_zero_spread(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}
