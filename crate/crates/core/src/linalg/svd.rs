//! Singular values by Golub–Kahan bidiagonalization and implicit-shift QR.

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Upper bidiagonal form `U^T A V = B`; returns `(diag, superdiag)`.
pub fn bidiagonalize(a: &RealMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut m = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        // left reflector: zero column k below the diagonal
        let norm = (k..n).map(|i| m[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            let x0 = m[k * n + k];
            let alpha = if x0 > 0.0 { -norm } else { norm };
            for i in k..n {
                v[i] = m[i * n + k];
            }
            v[k] -= alpha;
            let vv: f64 = (k..n).map(|i| v[i] * v[i]).sum();
            if vv > 0.0 {
                let tau = 2.0 / vv;
                w[k + 1..n].iter_mut().for_each(|x| *x = 0.0);
                for i in k..n {
                    let vi = v[i];
                    for (wj, mij) in w[k + 1..n].iter_mut().zip(&m[i * n + k + 1..i * n + n]) {
                        *wj += vi * mij;
                    }
                }
                for i in k..n {
                    let f = tau * v[i];
                    for (mij, wj) in m[i * n + k + 1..i * n + n].iter_mut().zip(&w[k + 1..n]) {
                        *mij -= f * wj;
                    }
                }
            }
            d[k] = alpha;
        } else {
            d[k] = 0.0;
        }
        if k + 1 >= n {
            break;
        }
        // right reflector: zero row k beyond the superdiagonal
        let norm = (k + 1..n).map(|j| m[k * n + j].powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 && k + 2 < n {
            let x0 = m[k * n + k + 1];
            let alpha = if x0 > 0.0 { -norm } else { norm };
            for j in k + 1..n {
                v[j] = m[k * n + j];
            }
            v[k + 1] -= alpha;
            let vv: f64 = (k + 1..n).map(|j| v[j] * v[j]).sum();
            if vv > 0.0 {
                let tau = 2.0 / vv;
                for i in k + 1..n {
                    let row = &mut m[i * n + k + 1..i * n + n];
                    let s: f64 = row.iter().zip(&v[k + 1..n]).map(|(x, y)| x * y).sum();
                    let f = tau * s;
                    for (x, y) in row.iter_mut().zip(&v[k + 1..n]) {
                        *x -= f * y;
                    }
                }
            }
            e[k] = alpha;
        } else {
            e[k] = m[k * n + k + 1];
        }
    }
    (d, e)
}

#[inline]
fn rot(f: f64, g: f64) -> (f64, f64, f64) {
    if g == 0.0 {
        (1.0, 0.0, f)
    } else if f == 0.0 {
        (0.0, 1.0, g)
    } else {
        let r = f.hypot(g);
        (f / r, g / r, r)
    }
}

/// Singular values of an upper bidiagonal matrix, descending.
pub fn bidiagonal_singular_values(d: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e = e.to_vec();
    if n == 0 {
        return Ok(d);
    }
    let eps = f64::EPSILON;
    let anorm = (0..n)
        .map(|i| d[i].abs() + if i + 1 < n { e[i].abs() } else { 0.0 })
        .fold(0.0f64, f64::max);
    let abs_tol = eps * anorm;
    let max_steps = 6 * n * n + 50;
    let mut steps = 0usize;
    loop {
        for i in 0..n - 1 {
            if e[i].abs() <= eps * (d[i].abs() + d[i + 1].abs()) || e[i].abs() <= abs_tol {
                e[i] = 0.0;
            }
        }
        let Some(hi) = (1..n).rev().find(|&i| e[i - 1] != 0.0) else {
            break;
        };
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1] != 0.0 {
            lo -= 1;
        }
        steps += 1;
        if steps > max_steps {
            return Err(Error::NoConvergence {
                routine: "bidiagonal_qr",
                iterations: steps,
            });
        }

        // a zero on the diagonal splits the block once its row/column is chased out
        if let Some(k) = (lo..=hi).find(|&k| d[k].abs() <= abs_tol) {
            d[k] = 0.0;
            if k < hi {
                let mut f = e[k];
                e[k] = 0.0;
                for j in k + 1..=hi {
                    let (c, s, r) = rot(d[j], f);
                    d[j] = r;
                    if j < hi {
                        f = -s * e[j];
                        e[j] *= c;
                    }
                }
            } else {
                let mut f = e[hi - 1];
                e[hi - 1] = 0.0;
                let mut j = hi;
                while j > lo {
                    j -= 1;
                    let (c, s, r) = rot(d[j], f);
                    d[j] = r;
                    if j > lo {
                        f = -s * e[j - 1];
                        e[j - 1] *= c;
                    }
                }
            }
            continue;
        }

        // Wilkinson shift from the trailing 2x2 of B^T B
        let dm = d[hi - 1];
        let dn = d[hi];
        let em = e[hi - 1];
        let emm = if hi - 1 > lo { e[hi - 2] } else { 0.0 };
        let t11 = dm * dm + emm * emm;
        let t12 = dm * em;
        let t22 = dn * dn + em * em;
        let delta = 0.5 * (t11 - t22);
        let denom = delta + delta.signum() * delta.hypot(t12);
        let mu = if denom == 0.0 {
            t22
        } else {
            t22 - t12 * t12 / denom
        };

        let mut y = d[lo] * d[lo] - mu;
        let mut z = d[lo] * e[lo];
        for k in lo..hi {
            let (c, s, r) = rot(y, z);
            if k > lo {
                e[k - 1] = r;
            }
            let dk = d[k];
            let ek = e[k];
            d[k] = c * dk + s * ek;
            e[k] = -s * dk + c * ek;
            let bulge = s * d[k + 1];
            d[k + 1] *= c;

            let (c, s, r) = rot(d[k], bulge);
            d[k] = r;
            let ek = e[k];
            let dk1 = d[k + 1];
            e[k] = c * ek + s * dk1;
            d[k + 1] = -s * ek + c * dk1;
            if k + 1 < hi {
                y = e[k];
                z = s * e[k + 1];
                e[k + 1] *= c;
            }
        }
    }
    let mut out: Vec<f64> = d.into_iter().map(f64::abs).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

pub fn golub_kahan_singular_values(a: &RealMatrix) -> Result<Vec<f64>> {
    let (d, e) = bidiagonalize(a);
    bidiagonal_singular_values(&d, &e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bidiagonal_preserves_frobenius() {
        let a = RealMatrix::from_fn(9, |i, j| {
            ((3 * i + 5 * j) % 7) as f64 - 3.0 + 0.1 * i as f64
        });
        let (d, e) = bidiagonalize(&a);
        let fro: f64 = d.iter().chain(&e).map(|x| x * x).sum();
        assert!((fro - a.hs_norm_sq()).abs() < 1e-11 * a.hs_norm_sq());
    }

    #[test]
    fn zero_diagonal_entries_are_chased_out() {
        // B = [[0,1,0],[0,2,1],[0,0,0]]: singular values of the explicit matrix
        let d = [0.0, 2.0, 0.0];
        let e = [1.0, 1.0];
        let sv = bidiagonal_singular_values(&d, &e).unwrap();
        // B^T B = [[0,0,0],[0,5,2],[0,2,1]] -> eigenvalues 0, 3 +- 2 sqrt 2
        let expect = [(3.0 + 8f64.sqrt()).sqrt(), (3.0 - 8f64.sqrt()).sqrt(), 0.0];
        for (a, b) in sv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{sv:?}");
        }
    }
}
