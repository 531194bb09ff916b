//! Products of iid factors and their block-cyclic linearization.
//!
//! For factors `X_1, ..., X_m` of size `n`, the linearization `Y` is the
//! `mn x mn` matrix whose block `(i, i+1)` is `X_i / sqrt(n)` and whose
//! corner block `(m, 1)` is `X_m / sqrt(n)`. Its `m`-th power is block
//! diagonal with cyclic products on the diagonal, so the `m`-th powers of the
//! eigenvalues of `Y` are the eigenvalues of `P = n^{-m/2} X_1 ... X_m`, each
//! repeated `m` times.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, ComplexSpectrum};
use crate::matrix::RealMatrix;
use crate::spectra::TestFunction;

pub const DEFAULT_CHECK_CAP: usize = 512;
/// Largest `nm` for which multisets are paired by an optimal assignment.
pub const HUNGARIAN_LIMIT: usize = 128;

fn check_factors(factors: &[RealMatrix]) -> Result<usize> {
    let Some(first) = factors.first() else {
        return Err(Error::invalid("at least one factor is required"));
    };
    let n = first.n();
    if n == 0 {
        return Err(Error::invalid("factors must be nonempty"));
    }
    if let Some(bad) = factors.iter().find(|f| f.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.n(),
        });
    }
    Ok(n)
}

#[derive(Clone, Debug)]
pub struct MatrixProduct {
    pub factors: Vec<RealMatrix>,
    /// `n^{-m/2} X_1 ... X_m`.
    pub scaled: RealMatrix,
}

impl MatrixProduct {
    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn n(&self) -> usize {
        self.scaled.n()
    }
}

/// `n^{-1/2} X_k` for every factor.
pub fn scaled_factors(factors: &[RealMatrix]) -> Result<Vec<RealMatrix>> {
    let n = check_factors(factors)?;
    let s = (n as f64).sqrt().recip();
    Ok(factors.iter().map(|f| f.scaled(s)).collect())
}

/// Left-to-right product of the scaled factors.
pub fn scaled_product(factors: &[RealMatrix]) -> Result<RealMatrix> {
    let scaled = scaled_factors(factors)?;
    let mut iter = scaled.into_iter();
    let first = iter.next().expect("checked nonempty");
    Ok(iter.fold(first, |acc, f| acc.matmul(&f)))
}

pub fn product_matrix(factors: Vec<RealMatrix>) -> Result<MatrixProduct> {
    let scaled = scaled_product(&factors)?;
    Ok(MatrixProduct { factors, scaled })
}

#[derive(Clone, Debug)]
pub struct BlockLinearization {
    pub m: usize,
    pub n: usize,
    pub matrix: RealMatrix,
}

pub fn linearization(factors: &[RealMatrix]) -> Result<BlockLinearization> {
    let n = check_factors(factors)?;
    let m = factors.len();
    let s = (n as f64).sqrt().recip();
    let big = m * n;
    let mut y = RealMatrix::zeros(big);
    for (i, x) in factors.iter().enumerate() {
        let j = (i + 1) % m;
        let data = y.as_mut_slice();
        for r in 0..n {
            let dst = &mut data[(i * n + r) * big + j * n..(i * n + r) * big + (j + 1) * n];
            for (d, v) in dst.iter_mut().zip(x.row(r)) {
                *d = v * s;
            }
        }
    }
    Ok(BlockLinearization { m, n, matrix: y })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizationCheck {
    pub matched: bool,
    pub max_pairing_distance: f64,
}

/// Optimal assignment (minimum total cost) for a square cost matrix, by the
/// shortest augmenting path method with potentials. Returns `col_of_row`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[p[j] - 1] = j - 1;
    }
    col_of_row
}

fn greedy_bottleneck(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal sizes");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

/// Largest distance in a pairing of two equal-size multisets.
///
/// Small sets use the optimal assignment; larger ones use greedy nearest
/// neighbours run from both sides, keeping the better of the two pairings.
pub fn pairing_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.len() <= HUNGARIAN_LIMIT {
        let cost: Vec<Vec<f64>> = a
            .iter()
            .map(|x| b.iter().map(|y| (x - y).norm()).collect())
            .collect();
        let assign = hungarian(&cost);
        return Ok(assign
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[i][j])
            .fold(0.0, f64::max));
    }
    Ok(greedy_bottleneck(a, b).min(greedy_bottleneck(b, a)))
}

pub fn check_linearization(factors: &[RealMatrix], tol: f64) -> Result<LinearizationCheck> {
    check_linearization_with_cap(factors, tol, DEFAULT_CHECK_CAP)
}

/// Compares `eig(Y)^m` with `m` copies of `eig(P)`.
pub fn check_linearization_with_cap(
    factors: &[RealMatrix],
    tol: f64,
    cap: usize,
) -> Result<LinearizationCheck> {
    let n = check_factors(factors)?;
    let m = factors.len();
    if n * m > cap {
        return Err(Error::invalid(format!(
            "nm = {} exceeds the dense eigensolver cap {cap}",
            n * m
        )));
    }
    let lin = linearization(factors)?;
    let powered = eigenvalues(&lin.matrix)?.powi(m as i32);
    let product = eigenvalues(&scaled_product(factors)?)?;
    let repeated: Vec<Complex64> = product
        .values()
        .iter()
        .flat_map(|v| std::iter::repeat_n(*v, m))
        .collect();
    let repeated = ComplexSpectrum::new(repeated);
    let d = pairing_distance(powered.values(), repeated.values())?;
    Ok(LinearizationCheck {
        matched: d <= tol,
        max_pairing_distance: d,
    })
}

/// `g(z) = f(z^m) / m`.
pub fn lift_test_function(f: &TestFunction, m: usize) -> Result<TestFunction> {
    if m == 0 {
        return Err(Error::invalid("lift needs m >= 1"));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); f.degree() * m + 1];
    for (p, a) in f.coefficients().iter().enumerate() {
        coeffs[p * m] = a / m as f64;
    }
    TestFunction::new(coeffs, f.delta())
}

/// `tr Y^k` (exact zero is expected when `m` does not divide `k`).
pub fn power_trace(y: &RealMatrix, k: usize) -> f64 {
    let mut acc = RealMatrix::identity(y.n());
    for _ in 0..k {
        acc = acc.matmul(y);
    }
    acc.trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_matrix, AtomDistribution};
    use crate::linalg::dense::det;
    use crate::spectra::linear_statistic;

    fn factors(dist: &AtomDistribution, n: usize, m: usize, seed: u64) -> Vec<RealMatrix> {
        (0..m)
            .map(|k| sample_matrix(dist, n, seed * 31 + k as u64))
            .collect()
    }

    #[test]
    fn single_factor_cases() {
        let x = sample_matrix(&AtomDistribution::gaussian(1.0), 6, 1);
        let p = product_matrix(vec![x.clone()]).unwrap();
        assert!(p.scaled.sub(&x.scaled(1.0 / 6f64.sqrt())).max_abs() < 1e-15);
        let lin = linearization(std::slice::from_ref(&x)).unwrap();
        assert_eq!(lin.matrix, x.scaled(1.0 / 6f64.sqrt()));
    }

    #[test]
    fn identity_factors() {
        let p = product_matrix(vec![RealMatrix::identity(4), RealMatrix::identity(4)]).unwrap();
        assert!(
            p.scaled
                .sub(&RealMatrix::identity(4).scaled(0.25))
                .max_abs()
                < 1e-16
        );
    }

    #[test]
    fn determinant_is_multiplicative() {
        let g = AtomDistribution::gaussian(1.0);
        for (n, m) in [(5usize, 2usize), (8, 3), (16, 2)] {
            let fs = factors(&g, n, m, n as u64);
            let p = product_matrix(fs.clone()).unwrap();
            let lhs = det(&p.scaled);
            let rhs =
                (n as f64).powf(-((m * n) as f64) / 2.0) * fs.iter().map(det).product::<f64>();
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn two_factor_layout() {
        let g = AtomDistribution::rademacher(1.0);
        let fs = factors(&g, 3, 2, 2);
        let lin = linearization(&fs).unwrap();
        let s = 1.0 / 3f64.sqrt();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(lin.matrix[(r, c)], 0.0);
                assert_eq!(lin.matrix[(3 + r, 3 + c)], 0.0);
                assert_eq!(lin.matrix[(r, 3 + c)], fs[0][(r, c)] * s);
                assert_eq!(lin.matrix[(3 + r, c)], fs[1][(r, c)] * s);
            }
        }
        let hs: f64 = fs.iter().map(|f| f.hs_norm_sq()).sum::<f64>() / 3.0;
        assert!((lin.matrix.hs_norm_sq() - hs).abs() <= 1e-12 * hs);
    }

    #[test]
    fn proposition_on_small_instances() {
        let r = check_linearization(&factors(&AtomDistribution::rademacher(1.0), 3, 2, 5), 1e-6)
            .unwrap();
        assert!(r.matched, "{r:?}");
        let r = check_linearization(&factors(&AtomDistribution::gaussian(1.0), 7, 1, 5), 1e-12)
            .unwrap();
        assert!(r.matched, "{r:?}");
    }

    #[test]
    fn diagonal_factors() {
        let d1 = RealMatrix::diag(&[1.0, 2.0, -3.0]);
        let d2 = RealMatrix::diag(&[0.5, -1.0, 2.0]);
        let lin = linearization(&[d1, d2]).unwrap();
        let squared = eigenvalues(&lin.matrix).unwrap().powi(2);
        let expect = ComplexSpectrum::new(
            [0.5, -2.0, -6.0]
                .iter()
                .flat_map(|v| [Complex64::new(v / 3.0, 0.0); 2])
                .collect(),
        );
        assert!(pairing_distance(squared.values(), expect.values()).unwrap() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let fs = factors(&AtomDistribution::gaussian(1.0), 10, 3, 1);
        assert!(check_linearization_with_cap(&fs, 1e-6, 20).is_err());
    }

    #[test]
    fn lift_examples() {
        let g = lift_test_function(&TestFunction::monomial(2), 3).unwrap();
        assert_eq!(g.degree(), 6);
        assert_eq!(g.coefficient(6), Complex64::new(1.0 / 3.0, 0.0));
        assert!((0..6).all(|p| g.coefficient(p) == Complex64::new(0.0, 0.0)));
        let f = TestFunction::new(
            vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)],
            0.5,
        )
        .unwrap();
        assert_eq!(lift_test_function(&f, 1).unwrap(), f);
    }

    #[test]
    fn lift_preserves_statistic() {
        let f = TestFunction::new(
            vec![
                Complex64::new(0.3, 0.0),
                Complex64::new(1.0, -0.5),
                Complex64::new(0.0, 2.0),
                Complex64::new(-1.0, 0.0),
            ],
            0.5,
        )
        .unwrap();
        let n = 8;
        let fs = factors(&AtomDistribution::gaussian(1.0), n, 2, 9);
        let p = eigenvalues(&scaled_product(&fs).unwrap()).unwrap();
        let y = eigenvalues(&linearization(&fs).unwrap().matrix).unwrap();
        let a = linear_statistic(&p, &f);
        let b = linear_statistic(&y, &lift_test_function(&f, 2).unwrap());
        assert!((a - b).norm() <= 1e-8 * n as f64, "{a} vs {b}");
    }

    #[test]
    fn hungarian_small_case() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }
}
