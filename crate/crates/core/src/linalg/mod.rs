//! Dense real linear algebra: eigenvalues, singular values, resolvent traces
//! and contour searches for the least singular value.

pub mod contour;
pub mod dense;
pub mod identities;
pub mod schur;
pub mod svd;
pub mod symmetric;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

pub use contour::{
    least_singular_on_contour, least_singular_on_contour_block_cyclic,
    least_singular_on_contour_schur, BlockCyclic, ContourMinimum,
};
pub use identities::{
    identity_selftest, identity_selftest_with, IdentityReport, InjectedFault, SelftestOptions,
};
pub use schur::{eigenvalues, real_schur, real_schur_with_vectors, RealSchur};

/// Distance below which `resolvent_trace` refuses to evaluate.
pub const RESOLVENT_MIN_DISTANCE: f64 = 1e-12;

fn lexicographic(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Eigenvalue multiset, kept sorted by `(re, im)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(mut values: Vec<Complex64>) -> Self {
        values.sort_by(lexicographic);
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.values.iter().product()
    }

    /// Elementwise `k`-th power.
    pub fn powi(&self, k: i32) -> Self {
        Self::new(self.values.iter().map(|v| v.powi(k)).collect())
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.values.iter().map(|v| v.conj()).collect())
    }

    /// All `m`-th roots of every value.
    pub fn roots(&self, m: usize) -> Self {
        let mut out = Vec::with_capacity(self.values.len() * m);
        for v in &self.values {
            let r = v.norm().powf(1.0 / m as f64);
            let theta = v.arg();
            for k in 0..m {
                let phi = (theta + 2.0 * std::f64::consts::PI * k as f64) / m as f64;
                out.push(Complex64::from_polar(r, phi));
            }
        }
        Self::new(out)
    }

    pub fn min_distance_to(&self, z: Complex64) -> f64 {
        self.values
            .iter()
            .map(|v| (v - z).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Singular values in descending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn singular_values(m: &RealMatrix) -> Result<SingularSpectrum> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(SingularSpectrum {
        values: svd::golub_kahan_singular_values(m)?,
    })
}

/// Singular values as square roots of the eigenvalues of `M^T M`; an
/// independent path used to cross-check small instances.
pub fn singular_values_gram(m: &RealMatrix) -> Result<SingularSpectrum> {
    let gram = m.transpose().matmul(m);
    let mut values: Vec<f64> = symmetric::symmetric_eigenvalues(&gram)?
        .into_iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    values.reverse();
    Ok(SingularSpectrum { values })
}

/// `tr (M - zI)^{-1} = sum_i 1 / (lambda_i - z)`.
pub fn resolvent_trace(spec: &ComplexSpectrum, z: Complex64) -> Result<Complex64> {
    let distance = spec.min_distance_to(z);
    if distance <= RESOLVENT_MIN_DISTANCE {
        return Err(Error::NearEigenvalue { z, distance });
    }
    Ok(spec.values.iter().map(|l| (l - z).inv()).sum())
}
