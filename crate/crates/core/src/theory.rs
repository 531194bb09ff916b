//! Limiting covariances, the resolvent-process kernel and the limiting
//! eigenvalue density, with quadrature used to cross-check the closed forms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::TestFunction;

/// `E[F(f) F(g)]` and `E[F(f) conj(F(g))]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariancePair {
    pub plain: Complex64,
    pub conj: Complex64,
}

impl CovariancePair {
    /// Variances of the real and imaginary parts and their covariance, for a
    /// single statistic (`f = g`).
    pub fn real_parts(&self) -> RealParts {
        RealParts {
            var_re: 0.5 * (self.conj.re + self.plain.re),
            var_im: 0.5 * (self.conj.re - self.plain.re),
            cov_re_im: 0.5 * self.plain.im,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealParts {
    pub var_re: f64,
    pub var_im: f64,
    pub cov_re_im: f64,
}

/// Residue expansion of `(zw - 1)^{-2}`: `sum_p p a_p b_p` and `sum_p p a_p conj(b_p)`.
pub fn product_covariance(f: &TestFunction, g: &TestFunction) -> CovariancePair {
    linearized_covariance(f, g, 1).expect("m = 1 is valid")
}

/// Residue expansion of `m^2 (zw)^{m-1} / ((zw)^m - 1)^2`: only powers divisible
/// by `m` contribute, with weight `m p`.
pub fn linearized_covariance(
    g1: &TestFunction,
    g2: &TestFunction,
    m: usize,
) -> Result<CovariancePair> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let top = g1.degree().min(g2.degree());
    let mut plain = Complex64::new(0.0, 0.0);
    let mut conj = Complex64::new(0.0, 0.0);
    for p in (m..=top).step_by(m) {
        let w = (m * p) as f64;
        let a = g1.coefficient(p);
        let b = g2.coefficient(p);
        plain += a * b * w;
        conj += a * b.conj() * w;
    }
    Ok(CovariancePair { plain, conj })
}

/// Distance from the kernel pole below which evaluation is refused.
pub const KERNEL_POLE_TOL: f64 = 1e-8;

fn kernel_at(x: Complex64, m: usize) -> Result<Complex64> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let xm = x.powi(m as i32);
    let d = xm - 1.0;
    if d.norm() <= KERNEL_POLE_TOL {
        return Err(Error::KernelPole { distance: d.norm() });
    }
    Ok(x.powi(m as i32 - 1) * (m * m) as f64 / (d * d))
}

/// `E[Xi(z) conj(Xi(w))] = m^2 (z conj w)^{m-1} / ((z conj w)^m - 1)^2`.
pub fn process_kernel(z: Complex64, w: Complex64, m: usize) -> Result<Complex64> {
    kernel_at(z * w.conj(), m)
}

/// `E[Xi(z) Xi(w)]`, which by `conj(Xi(w)) = Xi(conj w)` is the kernel at `(z, conj w)`.
pub fn process_kernel_plain(z: Complex64, w: Complex64, m: usize) -> Result<Complex64> {
    kernel_at(z * w, m)
}

/// Density value, with the integrable singularity at the origin flagged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub value: f64,
    /// Set when `value` is `+inf` (the origin for `m >= 2`).
    pub singular: bool,
}

/// `(1 / (m pi)) sigma^{-2/m} |z|^{2/m - 2}` on `|z| <= sigma`, zero outside.
pub fn density_mu_m(z: Complex64, m: usize, sigma: f64) -> Result<DensityValue> {
    if m == 0 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("density needs m >= 1 and sigma > 0"));
    }
    let r = z.norm();
    if r > sigma {
        return Ok(DensityValue {
            value: 0.0,
            singular: false,
        });
    }
    let mf = m as f64;
    if r == 0.0 && m >= 2 {
        return Ok(DensityValue {
            value: f64::INFINITY,
            singular: true,
        });
    }
    let value = sigma.powf(-2.0 / mf) * r.powf(2.0 / mf - 2.0) / (mf * PI);
    Ok(DensityValue {
        value,
        singular: false,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence: p1 = P_k(t), p0 = P_{k-1}(t)
            let (mut p0, mut p1) = (0.0, 1.0);
            for j in 1..=k {
                let p2 = p0;
                p0 = p1;
                p1 = ((2 * j - 1) as f64 * t * p0 - (j - 1) as f64 * p2) / j as f64;
            }
            dp = k as f64 * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[k - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[k - 1 - i] = wi;
    }
    (x, w)
}

/// Mass of the disk `|z| <= r` under the density, by quadrature in `u = s^{1/m}`
/// (which removes the singularity at the origin).
pub fn radial_cdf_quadrature(r: f64, m: usize, sigma: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("radius must be non-negative"));
    }
    let upper = r.min(sigma).powf(1.0 / m as f64);
    let (x, w) = gauss_legendre(16);
    let panels = 8;
    let h = upper / panels as f64;
    let mf = m as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let u = a + 0.5 * h * (xi + 1.0);
            let s = u.powi(m as i32);
            let phi = density_mu_m(Complex64::new(s, 0.0), m, sigma)?.value;
            // 2 pi s phi(s) ds with ds = m u^{m-1} du
            total += 0.5 * h * wi * 2.0 * PI * s * phi * mf * u.powi(m as i32 - 1);
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kernel", content = "m")]
pub enum KernelId {
    /// `(zw - 1)^{-2}`.
    Product,
    /// `(z conj(w) - 1)^{-2}` with `d conj(w)`.
    ProductConj,
    Linearized(usize),
    LinearizedConj(usize),
}

impl KernelId {
    fn m(&self) -> usize {
        match *self {
            KernelId::Product | KernelId::ProductConj => 1,
            KernelId::Linearized(m) | KernelId::LinearizedConj(m) => m,
        }
    }

    fn conjugated(&self) -> bool {
        matches!(self, KernelId::ProductConj | KernelId::LinearizedConj(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub nodes: usize,
    /// Series terms of the kernel needed before `radius^{-2k}` drops below `1e-16`.
    pub tail_cutoff: usize,
    pub warning: Option<String>,
}

/// Kernel series terms needed at this radius.
pub fn kernel_tail_cutoff(radius: f64) -> usize {
    (16.0 * std::f64::consts::LN_10 / (2.0 * radius.ln())).ceil() as usize
}

/// Double trapezoid rule over `|z| = |w| = radius` for one kernel. The
/// weighted kernel matrix is built once so many function pairs can reuse it.
#[derive(Clone, Debug)]
pub struct CovarianceQuadrature {
    kernel: KernelId,
    radius: f64,
    nodes: usize,
    points: Vec<Complex64>,
    /// `K(z_j, w_k) z_j w_k / N^2` (with `conj(w_k)` for conjugated kernels).
    weights: Vec<Complex64>,
}

impl CovarianceQuadrature {
    pub fn new(kernel: KernelId, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 1.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "quadrature radius must exceed 1, got {radius}"
            )));
        }
        if nodes < 4 {
            return Err(Error::invalid("at least 4 quadrature nodes are required"));
        }
        let m = kernel.m();
        let points: Vec<Complex64> = (0..nodes)
            .map(|j| Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64))
            .collect();
        let scale = 1.0 / (nodes * nodes) as f64;
        let mut weights = Vec::with_capacity(nodes * nodes);
        for z in &points {
            for w in &points {
                let w = if kernel.conjugated() { w.conj() } else { *w };
                let x = z * w;
                weights.push(kernel_at(x, m)? * x * scale);
            }
        }
        Ok(Self {
            kernel,
            radius,
            nodes,
            points,
            weights,
        })
    }

    pub fn covariance(&self, f: &TestFunction, g: &TestFunction) -> QuadratureResult {
        let fz: Vec<Complex64> = self.points.iter().map(|&z| f.eval(z)).collect();
        let gw: Vec<Complex64> = self
            .points
            .iter()
            .map(|&w| {
                let v = g.eval(w);
                if self.kernel.conjugated() {
                    v.conj()
                } else {
                    v
                }
            })
            .collect();
        let mut value = Complex64::new(0.0, 0.0);
        for (row, fj) in self.weights.chunks_exact(self.nodes).zip(&fz) {
            let inner: Complex64 = row.iter().zip(&gw).map(|(k, g)| k * g).sum();
            value += fj * inner;
        }
        let tail_cutoff = kernel_tail_cutoff(self.radius);
        let needed = 4 * (f.degree() + g.degree() + tail_cutoff);
        let warning = (self.nodes < needed).then(|| {
            format!(
                "{} nodes at radius {} may alias; at least {needed} recommended",
                self.nodes, self.radius
            )
        });
        QuadratureResult {
            value,
            nodes: self.nodes,
            tail_cutoff,
            warning,
        }
    }
}

/// Numerical double contour integral of the chosen covariance kernel.
pub fn contour_quadrature_covariance(
    f: &TestFunction,
    g: &TestFunction,
    kernel: KernelId,
    radius: f64,
    nodes: usize,
) -> Result<QuadratureResult> {
    Ok(CovarianceQuadrature::new(kernel, radius, nodes)?.covariance(f, g))
}
