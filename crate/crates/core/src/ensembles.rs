//! Atom distributions, iid matrix sampling and entrywise truncation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::rng::rng_from_seed;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Shape of an atom law before scaling to standard deviation `sigma`.
///
/// Every shape is symmetric about zero; `DiscreteSymmetric` places mass
/// `probs[i] / 2` on each of `±values[i]` and is rescaled to unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtomKind {
    Gaussian,
    Rademacher,
    UniformSymmetric,
    DiscreteSymmetric { values: Vec<f64>, probs: Vec<f64> },
}

/// Entry law with mean zero, variance `sigma^2` and a certified finite
/// `4 + tau_witness` moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomDistribution {
    #[serde(flatten)]
    pub kind: AtomKind,
    pub sigma: f64,
    #[serde(default = "default_tau")]
    pub tau_witness: f64,
}

fn default_tau() -> f64 {
    // all built-in kinds have every moment finite
    4.0
}

/// Moments of `xi * 1{|xi| <= T}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedMoments {
    /// `E[xi 1{|xi| <= T}]`.
    pub mean: f64,
    /// `Var(xi 1{|xi| <= T})`.
    pub variance: f64,
    /// `E[xi^2 1{|xi| > T}]`, kept separately so small variance gaps keep full precision.
    pub tail_second: f64,
    /// Central fourth moment of `xi 1{|xi| <= T}`.
    pub central_fourth: f64,
}

impl AtomDistribution {
    pub fn new(kind: AtomKind, sigma: f64) -> Result<Self> {
        let dist = Self {
            kind,
            sigma,
            tau_witness: default_tau(),
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::new(AtomKind::Gaussian, sigma).expect("valid gaussian")
    }

    pub fn rademacher(sigma: f64) -> Self {
        Self::new(AtomKind::Rademacher, sigma).expect("valid rademacher")
    }

    pub fn uniform_symmetric(sigma: f64) -> Self {
        Self::new(AtomKind::UniformSymmetric, sigma).expect("valid uniform")
    }

    pub fn discrete_symmetric(values: Vec<f64>, probs: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::new(AtomKind::DiscreteSymmetric { values, probs }, sigma)
    }

    pub fn with_tau_witness(mut self, tau: f64) -> Result<Self> {
        self.tau_witness = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.tau_witness.is_finite() && self.tau_witness > 0.0) {
            return Err(Error::invalid("tau_witness must be positive"));
        }
        if let AtomKind::DiscreteSymmetric { values, probs } = &self.kind {
            if values.is_empty() || values.len() != probs.len() {
                return Err(Error::invalid(
                    "discrete_symmetric needs equally many values and probs",
                ));
            }
            if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid("discrete_symmetric values must be positive"));
            }
            if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::invalid("discrete_symmetric probs must be positive"));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "discrete_symmetric probs sum to {total}, not 1"
                )));
            }
        }
        Ok(())
    }

    /// Same shape with unit variance.
    pub fn standardized(&self) -> Self {
        Self {
            sigma: 1.0,
            ..self.clone()
        }
    }

    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn fourth_moment(&self) -> f64 {
        let s4 = self.variance().powi(2);
        match &self.kind {
            AtomKind::Gaussian => 3.0 * s4,
            AtomKind::Rademacher => s4,
            AtomKind::UniformSymmetric => 1.8 * s4,
            AtomKind::DiscreteSymmetric { values, probs } => {
                let scale = self.discrete_scale(values, probs);
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v * scale).powi(4))
                    .sum()
            }
        }
    }

    fn discrete_scale(&self, values: &[f64], probs: &[f64]) -> f64 {
        let var: f64 = values.iter().zip(probs).map(|(v, p)| p * v * v).sum();
        self.sigma / var.sqrt()
    }

    /// Half-width of the support of the uniform kind.
    fn uniform_half_width(&self) -> f64 {
        self.sigma * 3f64.sqrt()
    }

    /// Draws one atom.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            AtomKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.sigma * z
            }
            AtomKind::Rademacher => {
                if rng.random::<bool>() {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
            AtomKind::UniformSymmetric => {
                let a = self.uniform_half_width();
                a * (2.0 * rng.random::<f64>() - 1.0)
            }
            AtomKind::DiscreteSymmetric { values, probs } => {
                let scale = self.discrete_scale(values, probs);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = values[values.len() - 1];
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        pick = *v;
                        break;
                    }
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * pick * scale
            }
        }
    }

    /// Closed-form moments of `xi * 1{|xi| <= threshold}`.
    pub fn truncated_moments(&self, threshold: f64) -> TruncatedMoments {
        let var = self.variance();
        // symmetric laws: the truncated variable keeps mean zero
        let (tail_second, fourth) = match &self.kind {
            AtomKind::Gaussian => {
                let t = threshold / self.sigma;
                let phi = INV_SQRT_2PI * (-0.5 * t * t).exp();
                let upper = 0.5 * erfc(t / std::f64::consts::SQRT_2);
                let tail2 = 2.0 * (t * phi + upper);
                let tail4 = 2.0 * ((t * t * t + 3.0 * t) * phi + 3.0 * upper);
                (var * tail2, var * var * (3.0 - tail4))
            }
            AtomKind::Rademacher => {
                if threshold >= self.sigma {
                    (0.0, var * var)
                } else {
                    (var, 0.0)
                }
            }
            AtomKind::UniformSymmetric => {
                let a = self.uniform_half_width();
                if threshold >= a {
                    (0.0, 1.8 * var * var)
                } else {
                    let inside2 = threshold.powi(3) / (3.0 * a);
                    (var - inside2, threshold.powi(5) / (5.0 * a))
                }
            }
            AtomKind::DiscreteSymmetric { values, probs } => {
                let scale = self.discrete_scale(values, probs);
                let mut tail2 = 0.0;
                let mut inside4 = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    let x = v * scale;
                    if x <= threshold {
                        inside4 += p * x.powi(4);
                    } else {
                        tail2 += p * x * x;
                    }
                }
                (tail2, inside4)
            }
        };
        TruncatedMoments {
            mean: 0.0,
            variance: var - tail_second,
            tail_second,
            central_fourth: fourth,
        }
    }
}

/// Truncation level `T = n^{1/2 - epsilon}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub epsilon: f64,
    pub threshold: f64,
}

impl TruncationParams {
    pub const DEFAULT_EPSILON: f64 = 0.1;

    /// Validates `0 < epsilon < 1/2` and `epsilon <= tau / (8 + 2 tau)`.
    pub fn new(epsilon: f64, n: usize, dist: &AtomDistribution) -> Result<Self> {
        validate_epsilon(epsilon, dist)?;
        Ok(Self {
            epsilon,
            threshold: (n as f64).powf(0.5 - epsilon),
        })
    }
}

pub fn validate_epsilon(epsilon: f64, dist: &AtomDistribution) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    let tau = dist.tau_witness;
    let bound = tau / (8.0 + 2.0 * tau);
    if epsilon > bound {
        return Err(Error::invalid(format!(
            "epsilon {epsilon} exceeds tau/(8+2tau) = {bound} for tau = {tau}"
        )));
    }
    Ok(())
}

/// Samples an `n x n` matrix of iid atoms; identical inputs give identical output.
pub fn sample_matrix(dist: &AtomDistribution, n: usize, seed: u64) -> RealMatrix {
    let mut rng = rng_from_seed(seed);
    let data = (0..n * n).map(|_| dist.sample(&mut rng)).collect();
    RealMatrix::from_row_major(n, data).expect("sampled entries are finite")
}

fn require_unit_variance(dist: &AtomDistribution) -> Result<()> {
    if (dist.sigma - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "truncation expects a unit-variance atom, got sigma = {}",
            dist.sigma
        )));
    }
    Ok(())
}

fn truncation_constants(
    dist: &AtomDistribution,
    params: &TruncationParams,
) -> Result<TruncatedMoments> {
    require_unit_variance(dist)?;
    let moments = dist.truncated_moments(params.threshold);
    if !(moments.variance > 0.0) {
        return Err(Error::DegenerateTruncation {
            variance: moments.variance,
        });
    }
    Ok(moments)
}

/// Entrywise `(x 1{|x| <= T} - mu_T) / sqrt(v_T)` with `mu_T`, `v_T` taken from
/// the law, never from the sample.
pub fn truncate_hat(
    m: &RealMatrix,
    dist: &AtomDistribution,
    params: &TruncationParams,
) -> Result<RealMatrix> {
    let moments = truncation_constants(dist, params)?;
    let t = params.threshold;
    let inv_sd = moments.variance.sqrt().recip();
    let data = m
        .as_slice()
        .iter()
        .map(|&x| {
            let clipped = if x.abs() <= t { x } else { 0.0 };
            (clipped - moments.mean) * inv_sd
        })
        .collect();
    RealMatrix::from_row_major(m.n(), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub threshold: f64,
    /// `|1 - v_T|`.
    pub var_gap: f64,
    /// `4 T`, the almost-sure bound on truncated entries.
    pub sup_bound: f64,
    /// `E|xi_hat|^4 / E|xi|^4`.
    pub fourth_ratio: f64,
}

pub fn truncation_report(
    dist: &AtomDistribution,
    n: usize,
    params: &TruncationParams,
) -> Result<TruncationReport> {
    let moments = truncation_constants(dist, params)?;
    let hat_fourth = moments.central_fourth / (moments.variance * moments.variance);
    Ok(TruncationReport {
        threshold: params.threshold,
        var_gap: moments.tail_second + moments.mean * moments.mean,
        sup_bound: 4.0 * (n as f64).powf(0.5 - params.epsilon),
        fourth_ratio: hat_fourth / dist.fourth_moment(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<AtomDistribution> {
        vec![
            AtomDistribution::gaussian(1.0),
            AtomDistribution::gaussian(2.0),
            AtomDistribution::rademacher(1.0),
            AtomDistribution::uniform_symmetric(0.7),
            AtomDistribution::discrete_symmetric(vec![1.0, 3.0], vec![0.8, 0.2], 1.0).unwrap(),
        ]
    }

    #[test]
    fn rademacher_support() {
        let m = sample_matrix(&AtomDistribution::rademacher(1.0), 2, 7);
        assert!(m.as_slice().iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = AtomDistribution::gaussian(1.0);
        assert_eq!(sample_matrix(&d, 64, 1), sample_matrix(&d, 64, 1));
        assert_ne!(sample_matrix(&d, 64, 1), sample_matrix(&d, 64, 2));
    }

    #[test]
    fn gaussian_sigma_two_sample_variance() {
        // SE of the sample variance is 4 * sqrt(2/4096) ~ 0.088, band is +-0.5
        let m = sample_matrix(&AtomDistribution::gaussian(2.0), 64, 3);
        let xs = m.as_slice();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((3.5..=4.5).contains(&var), "{var}");
    }

    #[test]
    fn analytic_moments_match_samples() {
        let n_samples = 1_000_000usize;
        for (i, d) in all_kinds().into_iter().enumerate() {
            let mut rng = rng_from_seed(1000 + i as u64);
            let xs: Vec<f64> = (0..n_samples).map(|_| d.sample(&mut rng)).collect();
            let nf = n_samples as f64;
            let m1 = xs.iter().sum::<f64>() / nf;
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / nf;
            let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / nf;
            let m8 = xs.iter().map(|x| x.powi(8)).sum::<f64>() / nf;
            let se1 = (d.variance() / nf).sqrt();
            let se2 = ((d.fourth_moment() - d.variance().powi(2)) / nf).sqrt();
            let se4 = ((m8 - m4 * m4) / nf).sqrt();
            assert!((m1 - d.mean()).abs() <= 4.0 * se1, "{d:?} mean {m1}");
            // Rademacher has zero variance of x^2; allow rounding only
            assert!(
                (m2 - d.variance()).abs() <= 4.0 * se2 + 1e-12,
                "{d:?} var {m2}"
            );
            assert!(
                (m4 - d.fourth_moment()).abs() <= 4.0 * se4 + 1e-12,
                "{d:?} fourth {m4}"
            );
        }
    }

    #[test]
    fn rademacher_truncation_is_noop() {
        let d = AtomDistribution::rademacher(1.0);
        for n in [2usize, 10, 1000] {
            let p = TruncationParams::new(0.1, n, &d).unwrap();
            assert!(p.threshold >= 1.0);
            let m = sample_matrix(&d, 8, n as u64);
            assert_eq!(truncate_hat(&m, &d, &p).unwrap(), m);
            let r = truncation_report(&d, n, &p).unwrap();
            assert_eq!(r.var_gap, 0.0);
            assert_eq!(r.fourth_ratio, 1.0);
        }
    }

    #[test]
    fn gaussian_truncation_sup_bound() {
        let d = AtomDistribution::gaussian(1.0);
        let p = TruncationParams::new(0.1, 100, &d).unwrap();
        for seed in 0..5 {
            let m = truncate_hat(&sample_matrix(&d, 100, seed), &d, &p).unwrap();
            assert!(m.max_abs() <= 4.0 * 100f64.powf(0.4));
        }
        let r = truncation_report(&d, 100, &p).unwrap();
        assert!(r.fourth_ratio <= 256.0);
    }

    #[test]
    fn gaussian_truncated_variance_matches_brute_force() {
        // 1e7 draws of the clipped law; compare v_T within 3 standard errors
        let d = AtomDistribution::gaussian(1.0);
        let p = TruncationParams::new(0.1, 100, &d).unwrap();
        let t = p.threshold;
        let mut rng = rng_from_seed(99);
        let n_samples = 10_000_000usize;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n_samples {
            let x = d.sample(&mut rng);
            let c = if x.abs() <= t { x } else { 0.0 };
            s1 += c;
            s2 += c * c;
            s4 += c.powi(4);
        }
        let nf = n_samples as f64;
        let mean = s1 / nf;
        let var = s2 / nf - mean * mean;
        let se = ((s4 / nf - (s2 / nf).powi(2)) / nf).sqrt();
        let v_t = d.truncated_moments(t).variance;
        assert!((var - v_t).abs() <= 3.0 * se, "{var} vs {v_t} (se {se})");
    }

    #[test]
    fn gaussian_var_gap_closed_form() {
        // independent route: E[Z^2; |Z| > t] by composite Simpson on [t, t + 40]
        let t = 1e4f64.powf(0.4);
        let h = 1e-4;
        let steps = 400_000;
        let f = |z: f64| z * z * INV_SQRT_2PI * (-0.5 * z * z).exp();
        let mut acc = f(t) + f(t + h * steps as f64);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(t + h * k as f64);
        }
        let oracle = 2.0 * acc * h / 3.0;
        let d = AtomDistribution::gaussian(1.0);
        let p = TruncationParams::new(0.1, 10_000, &d).unwrap();
        let r = truncation_report(&d, 10_000, &p).unwrap();
        assert!(r.var_gap <= 1e-4);
        assert!((r.var_gap - oracle).abs() <= 1e-6 * oracle.max(1e-300) + 1e-300);

        // moderate threshold where the gap is visible
        let t = 1.5;
        let mut acc = f(t) + f(t + h * steps as f64);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(t + h * k as f64);
        }
        let oracle = 2.0 * acc * h / 3.0;
        let m = d.truncated_moments(t);
        assert!(
            (m.tail_second - oracle).abs() < 1e-10,
            "{} {oracle}",
            m.tail_second
        );
    }

    #[test]
    fn truncated_fourth_moment_uniform_and_discrete() {
        let u = AtomDistribution::uniform_symmetric(1.0);
        let a = 3f64.sqrt();
        let m = u.truncated_moments(1.0);
        assert!((m.variance - 1.0 / (3.0 * a)).abs() < 1e-15);
        assert!((m.central_fourth - 1.0 / (5.0 * a)).abs() < 1e-15);
        let d = AtomDistribution::discrete_symmetric(vec![1.0], vec![1.0], 1.0).unwrap();
        assert_eq!(d.fourth_moment(), 1.0);
    }

    #[test]
    fn truncate_hat_output_is_standardized() {
        let d = AtomDistribution::uniform_symmetric(1.0);
        let n = 200;
        let p = TruncationParams {
            epsilon: 0.1,
            threshold: 1.2,
        };
        let m = truncate_hat(&sample_matrix(&d, n, 5), &d, &p).unwrap();
        let xs = m.as_slice();
        let nf = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / nf;
        let tol = 4.0 / nf.sqrt();
        assert!(mean.abs() <= tol, "{mean}");
        assert!((var - 1.0).abs() <= tol * (m4 - 1.0).sqrt(), "{var}");
    }

    #[test]
    fn degenerate_truncation_and_validation() {
        let d = AtomDistribution::rademacher(1.0);
        let p = TruncationParams {
            epsilon: 0.1,
            threshold: 0.5,
        };
        assert!(matches!(
            truncation_report(&d, 4, &p),
            Err(Error::DegenerateTruncation { .. })
        ));
        assert!(TruncationParams::new(0.6, 100, &d).is_err());
        assert!(TruncationParams::new(0.0, 100, &d).is_err());
        let light = d.clone().with_tau_witness(0.5).unwrap();
        // 0.5 / 9 ~ 0.056 < 0.1
        assert!(TruncationParams::new(0.1, 100, &light).is_err());
        assert!(truncate_hat(
            &RealMatrix::zeros(2),
            &AtomDistribution::gaussian(2.0),
            &TruncationParams::new(0.1, 2, &d).unwrap()
        )
        .is_err());
        assert!(AtomDistribution::discrete_symmetric(vec![1.0], vec![0.5], 1.0).is_err());
    }
}
