//! Symmetric eigenvalues: Householder tridiagonalization and implicit QL.

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i + 1`), ascending.
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert!(e.len() + 1 >= n);
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().take(n.saturating_sub(1)).collect();
    e.push(0.0);
    let max_iter = 30 * n.max(4);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > max_iter {
                return Err(Error::NoConvergence {
                    routine: "tridiagonal_ql",
                    iterations: iter,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a symmetric matrix (only the lower triangle is read), ascending.
pub fn symmetric_eigenvalues(a: &RealMatrix) -> Result<Vec<f64>> {
    let n = a.n();
    let mut m = RealMatrix::from_fn(n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| m[(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = m[(k + 1, k)];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in 0..n {
            v[i] = if i > k { m[(i, k)] } else { 0.0 };
        }
        v[k + 1] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let tau = 2.0 / vv;
        // A <- H A H with H = I - tau v v^T, via p = tau A v, w = p - (tau/2)(p.v) v
        for i in 0..n {
            p[i] = tau * m.row(i).iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        let pv: f64 = p.iter().zip(&v).map(|(x, y)| x * y).sum();
        let kcoef = 0.5 * tau * pv;
        for i in 0..n {
            p[i] -= kcoef * v[i];
        }
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= v[i] * p[j] + p[i] * v[j];
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let e: Vec<f64> = (0..n.saturating_sub(1)).map(|i| m[(i + 1, i)]).collect();
    tridiagonal_eigenvalues(&d, &e)
}
