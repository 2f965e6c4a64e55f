//! Five-number summary with mean and sample standard deviation.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample (n-1) standard deviation; 0 for a single value.
    pub sample_std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `p * (n - 1)`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(samples: &[f64]) -> Result<SummaryStats> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "cannot summarize an empty sample".into(),
        ));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let n = sorted.len();
    // summing in sorted order keeps the result independent of input order
    let (min, max) = (sorted[0], sorted[n - 1]);
    let mean = if min == max {
        min
    } else {
        sorted.iter().sum::<f64>() / n as f64
    };
    let sample_std = if n == 1 || min == max {
        0.0
    } else {
        let ss: f64 = sorted.iter().map(|x| (x - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(SummaryStats {
        n,
        mean,
        sample_std,
        min,
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max,
    })
}

impl SummaryStats {
    /// `"91.1% +- 0.3%"`: mean and sample std as percentages to one decimal.
    pub fn display_percent(&self) -> String {
        format!(
            "{:.1}% +- {:.1}%",
            self.mean * 100.0,
            self.sample_std * 100.0
        )
    }
}
