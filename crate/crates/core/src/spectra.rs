//! Linear eigenvalue statistics, least-singular-value events, resolvent
//! process samples and the radial law of the limiting density.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, least_singular_on_contour_block_cyclic, least_singular_on_contour_schur,
    real_schur, resolvent_trace, BlockCyclic, ComplexSpectrum, ContourMinimum, RealSchur,
};
use crate::linearize::BlockLinearization;
use crate::matrix::RealMatrix;
use crate::stats::ks_statistic;

/// Polynomial `f(z) = sum_p a_p z^p`, treated as analytic on `|z| <= 1 + delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    coefficients: Vec<Complex64>,
    delta: f64,
}

pub const DEFAULT_DELTA: f64 = 0.5;

impl TestFunction {
    pub fn new(coefficients: Vec<Complex64>, delta: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("test function coefficients must be finite"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!(
                "analyticity margin must be positive, got {delta}"
            )));
        }
        let mut coefficients = coefficients;
        if coefficients.is_empty() {
            coefficients.push(Complex64::new(0.0, 0.0));
        }
        Ok(Self {
            coefficients,
            delta,
        })
    }

    pub fn from_real(coefficients: &[f64]) -> Self {
        Self::new(
            coefficients
                .iter()
                .map(|&c| Complex64::new(c, 0.0))
                .collect(),
            DEFAULT_DELTA,
        )
        .expect("finite coefficients")
    }

    /// `z^p`.
    pub fn monomial(p: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); p + 1];
        c[p] = Complex64::new(1.0, 0.0);
        Self::new(c, DEFAULT_DELTA).expect("finite coefficients")
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c], DEFAULT_DELTA).expect("finite coefficient")
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        Self::new(self.coefficients, delta)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Coefficient of `z^p` (zero past the degree).
    pub fn coefficient(&self, p: usize) -> Complex64 {
        self.coefficients.get(p).copied().unwrap_or_default()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Index of the last stored coefficient.
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Coefficientwise conjugate, so that `conj(f)(conj z) = conj(f(z))`.
    pub fn conjugate(&self) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c.conj()).collect(),
            delta: self.delta,
        }
    }

    pub fn has_real_coefficients(&self) -> bool {
        self.coefficients.iter().all(|c| c.im == 0.0)
    }

    /// `alpha * self + beta * other`; the margin is the smaller of the two.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Self {
        let len = self.coefficients.len().max(other.coefficients.len());
        let coefficients = (0..len)
            .map(|p| alpha * self.coefficient(p) + beta * other.coefficient(p))
            .collect();
        Self {
            coefficients,
            delta: self.delta.min(other.delta),
        }
    }
}

/// `sum_i f(lambda_i)`.
pub fn linear_statistic(spec: &ComplexSpectrum, f: &TestFunction) -> Complex64 {
    spec.values().iter().map(|&l| f.eval(l)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub event_held: bool,
    pub min_singular: f64,
    pub threshold_c: f64,
    pub radius: f64,
}

impl EventReport {
    fn from_minimum(min: ContourMinimum, c: f64, radius: f64) -> Self {
        Self {
            event_held: min.min_value >= c,
            min_singular: min.min_value,
            threshold_c: c,
            radius,
        }
    }

    /// Report for a run where the event is not evaluated: treated as holding.
    pub fn not_evaluated(c: f64, radius: f64) -> Self {
        Self {
            event_held: true,
            min_singular: f64::NAN,
            threshold_c: c,
            radius,
        }
    }

    pub fn indicator(&self) -> f64 {
        if self.event_held {
            1.0
        } else {
            0.0
        }
    }
}

pub const DEFAULT_EVENT_C: f64 = 0.05;
pub const DEFAULT_GRIDPOINTS: usize = 64;

/// Contour radius `1 + delta / 2` of the event.
pub fn event_radius(delta: f64) -> f64 {
    1.0 + 0.5 * delta
}

fn check_event_args(delta: f64, c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!(
            "event threshold must be positive, got {c}"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(())
}

/// Whether `inf_{|z| = 1 + delta/2} s_min(M - zI) >= c`, on a grid.
pub fn least_singular_event(
    m: &RealMatrix,
    delta: f64,
    c: f64,
    gridpoints: usize,
) -> Result<EventReport> {
    check_event_args(delta, c)?;
    let schur = real_schur(m)?;
    least_singular_event_schur(&schur, delta, c, gridpoints)
}

/// As [`least_singular_event`], reusing a real Schur form of `M`.
pub fn least_singular_event_schur(
    schur: &RealSchur,
    delta: f64,
    c: f64,
    gridpoints: usize,
) -> Result<EventReport> {
    check_event_args(delta, c)?;
    let radius = event_radius(delta);
    let min = least_singular_on_contour_schur(schur, radius, gridpoints)?;
    Ok(EventReport::from_minimum(min, c, radius))
}

/// As [`least_singular_event`] for a block-cyclic matrix given through its blocks.
pub fn least_singular_event_block_cyclic(
    cyc: &BlockCyclic<'_>,
    delta: f64,
    c: f64,
    gridpoints: usize,
) -> Result<EventReport> {
    check_event_args(delta, c)?;
    let radius = event_radius(delta);
    let min = least_singular_on_contour_block_cyclic(cyc, radius, gridpoints)?;
    Ok(EventReport::from_minimum(min, c, radius))
}

/// `tr (Y - zI)^{-1}` times the event indicator, from a spectrum of `Y`.
pub fn xi_from_spectrum(
    spec: &ComplexSpectrum,
    z: Complex64,
    event: &EventReport,
) -> Result<Complex64> {
    if !event.event_held {
        return Ok(Complex64::new(0.0, 0.0));
    }
    resolvent_trace(spec, z)
}

/// Uncentered resolvent-process sample `tr (Y - zI)^{-1} 1{event}`.
pub fn xi_sample(lin: &BlockLinearization, z: Complex64, event: &EventReport) -> Result<Complex64> {
    if !event.event_held {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let spec = eigenvalues(&lin.matrix)?;
    resolvent_trace(&spec, z)
}

/// Radial distribution function `min(1, (r / sigma)^{2/m})` of the limiting law.
pub fn radial_cdf(r: f64, m: usize, sigma: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r >= sigma {
        1.0
    } else {
        (r / sigma).powf(2.0 / m as f64)
    }
}

/// Kolmogorov–Smirnov distance between the moduli of `spec` and the radial law.
pub fn radial_ks(spec: &ComplexSpectrum, m: usize, sigma: f64) -> Result<f64> {
    if spec.is_empty() {
        return Err(Error::invalid("radial KS needs a nonempty spectrum"));
    }
    if m == 0 || !(sigma > 0.0) {
        return Err(Error::invalid("radial KS needs m >= 1 and sigma > 0"));
    }
    let mut radii: Vec<f64> = spec.values().iter().map(|v| v.norm()).collect();
    radii.sort_by(f64::total_cmp);
    Ok(ks_statistic(&radii, |r| radial_cdf(r, m, sigma)))
}
