//! Nonsymmetric eigenvalues: diagonal balancing, Householder reduction to
//! upper Hessenberg form and the Francis double-shift QR iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

use super::ComplexSpectrum;

/// QR sweeps allowed per unit of dimension.
pub const SWEEPS_PER_DIM: usize = 30;

/// Deflation unit: `8 * machine epsilon`.
pub const DEFLATION_ULP: f64 = 8.0 * f64::EPSILON;

/// Real Schur form `Q^T M Q = T`.
///
/// `T` is upper quasi-triangular: a nonzero subdiagonal entry `T[i+1][i]`
/// marks a 2x2 diagonal block. `Q` is kept only when requested.
#[derive(Clone, Debug)]
pub struct RealSchur {
    pub t: RealMatrix,
    pub q: Option<RealMatrix>,
    pub eigenvalues: ComplexSpectrum,
}

impl RealSchur {
    /// Start index and size of every diagonal block, top to bottom.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let n = self.t.n();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                out.push((i, 2));
                i += 2;
            } else {
                out.push((i, 1));
                i += 1;
            }
        }
        out
    }
}

/// Scales rows and columns by powers of two so that their off-diagonal norms
/// are comparable. The result is similar to the input (not orthogonally).
pub fn balance(a: &mut RealMatrix) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.n();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Orthogonal reduction to upper Hessenberg form, in place.
pub fn hessenberg(a: &mut RealMatrix) {
    hessenberg_impl(a, None);
}

fn hessenberg_impl(a: &mut RealMatrix, mut q: Option<&mut RealMatrix>) {
    let n = a.n();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| a[(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        // v = x - alpha e1, tau = 2 / (v.v)
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vv: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vv == 0.0 {
            continue;
        }
        let tau = 2.0 / vv;

        // left: rows k+1.., columns k..
        w[k..n].iter_mut().for_each(|x| *x = 0.0);
        for i in k + 1..n {
            let vi = v[i];
            let row = &a.row(i)[k..n];
            for (wj, aij) in w[k..n].iter_mut().zip(row) {
                *wj += vi * aij;
            }
        }
        for i in k + 1..n {
            let f = tau * v[i];
            let row = &mut a.as_mut_slice()[i * n + k..i * n + n];
            for (aij, wj) in row.iter_mut().zip(&w[k..n]) {
                *aij -= f * wj;
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let row = &mut a.as_mut_slice()[i * n + k + 1..i * n + n];
            let s: f64 = row.iter().zip(&v[k + 1..n]).map(|(x, y)| x * y).sum();
            let f = tau * s;
            for (aij, vj) in row.iter_mut().zip(&v[k + 1..n]) {
                *aij -= f * vj;
            }
        }
        if let Some(q) = q.as_deref_mut() {
            reflect_transposed(q, k + 1, &v[k + 1..n], tau);
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Eigenvalues of the 2x2 block `[[a, b], [c, d]]`; complex roots come out as
/// an exact conjugate pair.
pub fn eig2x2(a: f64, b: f64, c: f64, d: f64) -> (Complex64, Complex64) {
    let mid = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let disc = half * half + b * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let l1 = if mid >= 0.0 { mid + sq } else { mid - sq };
        let det = a * d - b * c;
        let l2 = if l1 != 0.0 { det / l1 } else { mid - sq };
        (Complex64::new(l1, 0.0), Complex64::new(l2, 0.0))
    } else {
        let im = (-disc).sqrt();
        (Complex64::new(mid, im), Complex64::new(mid, -im))
    }
}

#[inline]
fn house3(x: f64, y: f64, z: f64) -> Option<([f64; 3], f64)> {
    let norm = (x * x + y * y + z * z).sqrt();
    if norm == 0.0 {
        return None;
    }
    let alpha = if x > 0.0 { -norm } else { norm };
    let v = [x - alpha, y, z];
    let vv = v[0] * v[0] + y * y + z * z;
    if vv == 0.0 {
        return None;
    }
    Some((v, 2.0 / vv))
}

/// Francis double-shift QR on an upper Hessenberg matrix.
///
/// With `want_t` the full matrix is updated so that it ends in real Schur
/// form; otherwise only the active window is touched.
pub fn francis_qr(h: &mut RealMatrix, want_t: bool) -> Result<Vec<Complex64>> {
    francis_impl(h, want_t, None)
}

/// `Q <- Q (I - tau v v^T)` with `v` supported on `r0..r0+len`, applied to the
/// stored transpose `Q^T` so that the touched memory is contiguous rows.
fn reflect_transposed(qt: &mut RealMatrix, r0: usize, v: &[f64], tau: f64) {
    let n = qt.n();
    let data = qt.as_mut_slice();
    let mut acc = vec![0.0; n];
    for (i, vi) in v.iter().enumerate() {
        let row = &data[(r0 + i) * n..(r0 + i + 1) * n];
        for (a, x) in acc.iter_mut().zip(row) {
            *a += vi * x;
        }
    }
    for (i, vi) in v.iter().enumerate() {
        let f = tau * vi;
        let row = &mut data[(r0 + i) * n..(r0 + i + 1) * n];
        for (x, a) in row.iter_mut().zip(&acc) {
            *x -= f * a;
        }
    }
}

fn francis_impl(
    h: &mut RealMatrix,
    want_t: bool,
    mut q: Option<&mut RealMatrix>,
) -> Result<Vec<Complex64>> {
    let n = h.n();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(w);
    }
    let norm = {
        let mut s = 0.0f64;
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                s = s.max(h[(i, j)].abs());
            }
        }
        s
    };
    let budget = SWEEPS_PER_DIM * n.max(1);
    let mut total = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;
    loop {
        // locate the top of the unreduced block ending at `hi`
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() <= DEFLATION_ULP * s {
                h[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        if l == hi {
            w[hi] = Complex64::new(h[(hi, hi)], 0.0);
            its = 0;
            if hi == 0 {
                break;
            }
            hi -= 1;
            continue;
        }
        if l + 1 == hi {
            let (e1, e2) = eig2x2(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            );
            w[hi - 1] = e1;
            w[hi] = e2;
            its = 0;
            if hi < 2 {
                break;
            }
            hi -= 2;
            continue;
        }

        if total >= budget {
            return Err(Error::NoConvergence {
                routine: "francis_qr",
                iterations: total,
            });
        }
        total += 1;
        its += 1;

        let (sum, prod) = if its.is_multiple_of(10) {
            // exceptional shift
            let s = h[(hi, hi - 1)].abs() + h[(hi - 1, hi - 2)].abs();
            let a = 0.75 * s + h[(hi, hi)];
            (2.0 * a, a * a + 0.4375 * s * s)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            (a + d, a * d - b * c)
        };

        let col_end = if want_t { n } else { hi + 1 };
        let row_start = if want_t { 0 } else { l };

        let h00 = h[(l, l)];
        let h10 = h[(l + 1, l)];
        let mut x = h00 * h00 + h[(l, l + 1)] * h10 - sum * h00 + prod;
        let mut y = h10 * (h00 + h[(l + 1, l + 1)] - sum);
        let mut z = h10 * h[(l + 2, l + 1)];

        for k in l..hi - 1 {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
                z = h[(k + 2, k - 1)];
            }
            let Some((v, tau)) = house3(x, y, z) else {
                continue;
            };
            let c0 = if k > l { k - 1 } else { l };
            {
                let data = h.as_mut_slice();
                for j in c0..col_end {
                    let s = v[0] * data[k * n + j]
                        + v[1] * data[(k + 1) * n + j]
                        + v[2] * data[(k + 2) * n + j];
                    let f = tau * s;
                    data[k * n + j] -= f * v[0];
                    data[(k + 1) * n + j] -= f * v[1];
                    data[(k + 2) * n + j] -= f * v[2];
                }
                let r1 = (k + 3).min(hi);
                for i in row_start..=r1 {
                    let base = i * n + k;
                    let s = data[base] * v[0] + data[base + 1] * v[1] + data[base + 2] * v[2];
                    let f = tau * s;
                    data[base] -= f * v[0];
                    data[base + 1] -= f * v[1];
                    data[base + 2] -= f * v[2];
                }
            }
            if let Some(q) = q.as_deref_mut() {
                reflect_transposed(q, k, &v, tau);
            }
            if k > l {
                h[(k + 1, k - 1)] = 0.0;
                h[(k + 2, k - 1)] = 0.0;
            }
        }

        // final 2-vector reflector on rows/columns hi-1, hi
        let k = hi - 1;
        let x = h[(k, k - 1)];
        let y = h[(k + 1, k - 1)];
        let norm2 = (x * x + y * y).sqrt();
        if norm2 != 0.0 {
            let alpha = if x > 0.0 { -norm2 } else { norm2 };
            let v = [x - alpha, y];
            let tau = 2.0 / (v[0] * v[0] + v[1] * v[1]);
            let data = h.as_mut_slice();
            for j in k - 1..col_end {
                let s = v[0] * data[k * n + j] + v[1] * data[(k + 1) * n + j];
                let f = tau * s;
                data[k * n + j] -= f * v[0];
                data[(k + 1) * n + j] -= f * v[1];
            }
            for i in row_start..=hi {
                let base = i * n + k;
                let s = data[base] * v[0] + data[base + 1] * v[1];
                let f = tau * s;
                data[base] -= f * v[0];
                data[base + 1] -= f * v[1];
            }
            if let Some(q) = q.as_deref_mut() {
                reflect_transposed(q, k, &v, tau);
            }
            h[(k + 1, k - 1)] = 0.0;
        }
    }
    Ok(w)
}

/// Eigenvalues of a general real matrix (balanced, then Hessenberg + Francis QR).
pub fn eigenvalues(m: &RealMatrix) -> Result<ComplexSpectrum> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    let mut h = m.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let w = francis_qr(&mut h, false)?;
    Ok(ComplexSpectrum::new(w))
}

/// Real Schur form without balancing, so that `T - zI` and `M - zI` share
/// singular values.
pub fn real_schur(m: &RealMatrix) -> Result<RealSchur> {
    schur_impl(m, false)
}

/// Real Schur form together with the orthogonal factor `Q`.
pub fn real_schur_with_vectors(m: &RealMatrix) -> Result<RealSchur> {
    schur_impl(m, true)
}

fn schur_impl(m: &RealMatrix, want_q: bool) -> Result<RealSchur> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    let mut h = m.clone();
    let mut qt = want_q.then(|| RealMatrix::identity(m.n()));
    hessenberg_impl(&mut h, qt.as_mut());
    let w = francis_impl(&mut h, true, qt.as_mut())?;
    let q = qt.map(|qt| qt.transpose());
    // clear the part below the first subdiagonal left by the reflectors
    let n = h.n();
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
    Ok(RealSchur {
        t: h,
        q,
        eigenvalues: ComplexSpectrum::new(w),
    })
}
