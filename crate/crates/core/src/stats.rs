//! Small statistics helpers: batch means, least-squares lines.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mean of a correlated series with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
}

/// Splits `series` into `batches` contiguous batches of equal length (the
/// remainder at the end is dropped from the batches but not from the mean)
/// and returns the overall mean with `sd(batch means) / sqrt(batches)`.
pub fn batch_means(series: &[f64], batches: usize) -> Result<BatchMeans> {
    let batches = batches.max(2);
    if series.len() < batches {
        return Err(Error::InsufficientBatches { available: series.len(), required: batches });
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let per = series.len() / batches;
    let means: Vec<f64> = series
        .chunks_exact(per)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(BatchMeans { mean, stderr: (var / batches as f64).sqrt(), batches })
}

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LineFit { slope, intercept, residual: (ss / n as f64).sqrt() })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample mean and standard error of the mean of independent values.
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    if x.len() < 2 {
        return (m, 0.0);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_of_constant_series() {
        let b = batch_means(&[2.5; 100], 20).unwrap();
        assert_eq!(b.mean, 2.5);
        assert_eq!(b.stderr, 0.0);
        assert_eq!(b.batches, 20);
    }

    #[test]
    fn batch_means_needs_enough_samples() {
        assert!(matches!(
            batch_means(&[1.0; 10], 20),
            Err(Error::InsufficientBatches { available: 10, required: 20 })
        ));
    }

    #[test]
    fn batch_means_of_alternating_blocks() {
        // batches alternate between 0 and 1 → batch sd = sqrt(20/(4·19))
        let series: Vec<f64> = (0..200).map(|i| ((i / 10) % 2) as f64).collect();
        let b = batch_means(&series, 20).unwrap();
        assert!((b.mean - 0.5).abs() < 1e-15);
        let sd = (20.0 * 0.25 / 19.0f64).sqrt();
        assert!((b.stderr - sd / 20f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn line_fit_is_exact_on_lines() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-13 && (f.intercept - 3.0).abs() < 1e-13);
        assert!(f.residual < 1e-13);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..1_000_000 {
            k.add(1e-16);
        }
        k.add(-1.0);
        assert!((k.value() - 1e-10).abs() < 1e-18, "{}", k.value());
    }
}
