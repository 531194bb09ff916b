//! Sample moments, Kolmogorov–Smirnov distances and normality diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_NORMALITY_SAMPLES: usize = 20;

/// `sup_x |F_n(x) - F(x)|` for sorted samples.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub samples: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// KS distance to the normal law with the sample mean and variance.
    pub ks_fitted: f64,
    pub jarque_bera: f64,
}

pub fn normality_report(samples: &[f64]) -> Result<NormalityReport> {
    let n = samples.len();
    if n < MIN_NORMALITY_SAMPLES {
        return Err(Error::DegenerateSample(format!(
            "{n} samples, at least {MIN_NORMALITY_SAMPLES} required"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateSample("non-finite sample".into()));
    }
    let nf = n as f64;
    let mu = mean(samples);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if !(m2 > 0.0) || m2 <= f64::EPSILON * f64::EPSILON * mu * mu {
        return Err(Error::DegenerateSample("zero sample variance".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jarque_bera = nf / 6.0 * (skewness * skewness + 0.25 * excess_kurtosis * excess_kurtosis);
    let sd = (m2 * nf / (nf - 1.0)).sqrt();
    let normal = Normal::new(mu, sd).map_err(|e| Error::DegenerateSample(e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ks_fitted = ks_statistic(&sorted, |x| normal.cdf(x));
    Ok(NormalityReport {
        samples: n,
        skewness,
        excess_kurtosis,
        ks_fitted,
        jarque_bera,
    })
}

/// Sample covariances of complex series (divisor `N - 1`):
/// `plain[i][j] = avg (X_i - mean)(X_j - mean)` and
/// `conj[i][j] = avg (X_i - mean) conj(X_j - mean)`.
pub fn complex_covariances(
    series: &[Vec<Complex64>],
) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let k = series.len();
    let centered: Vec<Vec<Complex64>> = series
        .iter()
        .map(|s| {
            let mu: Complex64 = s.iter().sum::<Complex64>() / s.len() as f64;
            s.iter().map(|x| x - mu).collect()
        })
        .collect();
    let denom = series
        .first()
        .map_or(1.0, |s| (s.len() as f64 - 1.0).max(1.0));
    let mut plain = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    let mut conj = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for i in 0..k {
        for j in 0..k {
            let (mut p, mut c) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (a, b) in centered[i].iter().zip(&centered[j]) {
                p += a * b;
                c += a * b.conj();
            }
            plain[i][j] = p / denom;
            conj[i][j] = c / denom;
        }
    }
    (plain, conj)
}
