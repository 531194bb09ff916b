use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Target, TrialRecord};
use crate::error::Result;
use crate::stats::{
    complex_covariances, normality_report, sample_variance, NormalityReport, MIN_NORMALITY_SAMPLES,
};
use crate::theory::{
    linearized_covariance, process_kernel, process_kernel_plain, product_covariance, CovariancePair,
};

/// Below this many completed trials comparisons are reported but not judged.
pub const MIN_COMPARISON_SAMPLES: usize = 20;

/// Theory values at most this large are compared in absolute mode.
const THEORY_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            relative: 0.25,
            absolute: 0.15,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, s: f64) -> Self {
        Self {
            relative: self.relative * s,
            absolute: self.absolute * s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub label: String,
    /// Empirical mean, used as the centering.
    pub mean: Complex64,
    pub var_re: f64,
    pub var_im: f64,
    pub cov_re_im: f64,
    pub normality_re: Option<NormalityReport>,
    pub normality_im: Option<NormalityReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSingularSummary {
    pub min: f64,
    pub q01: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub completed: usize,
    pub failures: usize,
    pub event_rate: f64,
    pub statistics: Vec<StatisticSummary>,
    /// `avg (X_i - mean)(X_j - mean)`.
    pub covariance_plain: Vec<Vec<Complex64>>,
    /// `avg (X_i - mean) conj(X_j - mean)`; Hermitian positive semidefinite.
    pub covariance_conj: Vec<Vec<Complex64>>,
    /// Largest modulus of the mean of a centered series.
    pub centered_mean_max: f64,
    pub min_singular: Option<MinSingularSummary>,
    pub theory_comparison: Option<ComparisonTable>,
}

fn centered(records: &[TrialRecord], width: usize) -> Vec<Vec<Complex64>> {
    (0..width)
        .map(|i| {
            let n = records.len() as f64;
            let mu = records.iter().map(|r| r.statistics[i]).sum::<Complex64>() / n;
            records.iter().map(|r| r.statistics[i] - mu).collect()
        })
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Moments of the completed trials, centred at their empirical mean.
pub fn summarize(
    config: &ExperimentConfig,
    records: &[TrialRecord],
    failures: usize,
) -> ExperimentSummary {
    let width = config.width();
    let labels = config.labels();
    let series: Vec<Vec<Complex64>> = (0..width)
        .map(|i| records.iter().map(|r| r.statistics[i]).collect())
        .collect();
    let cen = centered(records, width);
    let count = records.len();
    let statistics = series
        .iter()
        .zip(&cen)
        .zip(labels)
        .map(|((s, c), label)| {
            let re: Vec<f64> = s.iter().map(|z| z.re).collect();
            let im: Vec<f64> = s.iter().map(|z| z.im).collect();
            let cov = c.iter().map(|z| z.re * z.im).sum::<f64>() / (count as f64 - 1.0);
            let normal = |xs: &[f64]| {
                (xs.len() >= MIN_NORMALITY_SAMPLES)
                    .then(|| normality_report(xs).ok())
                    .flatten()
            };
            StatisticSummary {
                label,
                mean: s.iter().sum::<Complex64>() / count as f64,
                var_re: sample_variance(&re),
                var_im: sample_variance(&im),
                cov_re_im: cov,
                normality_re: normal(&re),
                normality_im: normal(&im),
            }
        })
        .collect();
    let (covariance_plain, covariance_conj) = complex_covariances(&series);
    let centered_mean_max = cen
        .iter()
        .map(|c| (c.iter().sum::<Complex64>() / count as f64).norm())
        .fold(0.0, f64::max);
    let held = records.iter().filter(|r| r.event_held).count();
    let mut mins: Vec<f64> = records.iter().filter_map(|r| r.min_singular).collect();
    mins.sort_by(f64::total_cmp);
    let min_singular = (!mins.is_empty()).then(|| MinSingularSummary {
        min: mins[0],
        q01: quantile(&mins, 0.01),
        median: quantile(&mins, 0.5),
        max: mins[mins.len() - 1],
    });
    ExperimentSummary {
        trials: config.trials,
        completed: count,
        failures,
        event_rate: held as f64 / count as f64,
        statistics,
        covariance_plain,
        covariance_conj,
        centered_mean_max,
        min_singular,
        theory_comparison: None,
    }
}

/// Limiting covariances for every pair of statistics of `config`.
pub fn theory_values(config: &ExperimentConfig) -> Result<Vec<Vec<CovariancePair>>> {
    let m = config.m;
    match &config.target {
        Target::Product => Ok(config
            .functions
            .iter()
            .map(|f| {
                config
                    .functions
                    .iter()
                    .map(|g| product_covariance(f, g))
                    .collect()
            })
            .collect()),
        Target::Linearized => config
            .functions
            .iter()
            .map(|f| {
                config
                    .functions
                    .iter()
                    .map(|g| linearized_covariance(f, g, m))
                    .collect()
            })
            .collect(),
        Target::XiProcess { points } => points
            .iter()
            .map(|&z| {
                points
                    .iter()
                    .map(|&w| {
                        Ok(CovariancePair {
                            plain: process_kernel_plain(z, w, m)?,
                            conj: process_kernel(z, w, m)?,
                        })
                    })
                    .collect()
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    VarRe,
    VarIm,
    Conj,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMode {
    Relative,
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonStatus {
    Pass,
    Fail,
    InsufficientSamples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub kind: ComparisonKind,
    pub i: usize,
    pub j: usize,
    pub empirical: Complex64,
    pub theory: Complex64,
    pub abs_error: f64,
    /// `None` in absolute mode.
    pub relative_error: Option<f64>,
    /// Monte Carlo standard error of the empirical value.
    pub std_error: f64,
    pub mode: ComparisonMode,
    pub status: ComparisonStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub samples: usize,
    pub tolerances: Tolerances,
    pub entries: Vec<ComparisonEntry>,
    pub status: ComparisonStatus,
}

impl ComparisonTable {
    /// True unless some entry failed; too few samples counts as passing.
    pub fn passed(&self) -> bool {
        self.status != ComparisonStatus::Fail
    }
}

fn std_error(xs: impl Iterator<Item = Complex64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    if n < 2.0 {
        return f64::INFINITY;
    }
    let mu = xs.clone().sum::<Complex64>() / n;
    let var = xs.map(|x| (x - mu).norm_sqr()).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Compares empirical second moments with `theory[i][j]`.
///
/// Entries whose theoretical value vanishes are judged in absolute mode.
pub fn compare_to_theory(
    summary: &ExperimentSummary,
    records: &[TrialRecord],
    theory: &[Vec<CovariancePair>],
    tol: &Tolerances,
) -> ComparisonTable {
    let width = summary.statistics.len();
    let cen = centered(records, width);
    let samples = records.len();
    let judge = samples >= MIN_COMPARISON_SAMPLES;
    let mut entries = Vec::new();
    let mut push = |kind, i, j, empirical: Complex64, th: Complex64, se: f64| {
        let abs_error = (empirical - th).norm();
        let (mode, relative_error, ok) = if th.norm() <= THEORY_ZERO {
            (ComparisonMode::Absolute, None, abs_error < tol.absolute)
        } else {
            let rel = abs_error / th.norm();
            (ComparisonMode::Relative, Some(rel), rel < tol.relative)
        };
        let status = match (judge, ok) {
            (false, _) => ComparisonStatus::InsufficientSamples,
            (true, true) => ComparisonStatus::Pass,
            (true, false) => ComparisonStatus::Fail,
        };
        entries.push(ComparisonEntry {
            kind,
            i,
            j,
            empirical,
            theory: th,
            abs_error,
            relative_error,
            std_error: se,
            mode,
            status,
        });
    };
    let real = |x: f64| Complex64::new(x, 0.0);
    for i in 0..width {
        let parts = theory[i][i].real_parts();
        let s = &summary.statistics[i];
        let ci = &cen[i];
        push(
            ComparisonKind::VarRe,
            i,
            i,
            real(s.var_re),
            real(parts.var_re),
            std_error(ci.iter().map(|z| real(z.re * z.re))),
        );
        push(
            ComparisonKind::VarIm,
            i,
            i,
            real(s.var_im),
            real(parts.var_im),
            std_error(ci.iter().map(|z| real(z.im * z.im))),
        );
        for j in i..width {
            let cj = &cen[j];
            push(
                ComparisonKind::Conj,
                i,
                j,
                summary.covariance_conj[i][j],
                theory[i][j].conj,
                std_error(ci.iter().zip(cj).map(|(a, b)| a * b.conj())),
            );
            push(
                ComparisonKind::Plain,
                i,
                j,
                summary.covariance_plain[i][j],
                theory[i][j].plain,
                std_error(ci.iter().zip(cj).map(|(a, b)| a * b)),
            );
        }
    }
    let status = if !judge {
        ComparisonStatus::InsufficientSamples
    } else if entries.iter().any(|e| e.status == ComparisonStatus::Fail) {
        ComparisonStatus::Fail
    } else {
        ComparisonStatus::Pass
    };
    ComparisonTable {
        samples,
        tolerances: *tol,
        entries,
        status,
    }
}
