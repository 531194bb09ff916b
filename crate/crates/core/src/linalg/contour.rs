//! Smallest singular value of `M - zI` along a circle, computed from the real
//! Schur form `T` of `M` (orthogonal similarity keeps singular values).
//!
//! For each grid point the largest eigenvalue of `(T - zI)^{-H} (T - zI)^{-1}`
//! is found by Lanczos with full reorthogonalization; each operator
//! application is a pair of quasi-triangular solves.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

use super::dense::Lu;
use super::schur::{real_schur, RealSchur};
use super::symmetric::tridiagonal_eigenvalues;

const LANCZOS_MAX_STEPS: usize = 80;
const LANCZOS_RTOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourMinimum {
    pub min_value: f64,
    pub argmin_z: Complex64,
}

/// `T - zI` with `T` upper quasi-triangular.
struct ShiftedQuasiTriangular<'a> {
    t: &'a RealMatrix,
    blocks: &'a [(usize, usize)],
    z: Complex64,
}

#[inline]
fn solve2(a: [[Complex64; 2]; 2], b: [Complex64; 2]) -> Option<[Complex64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.norm() == 0.0 {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

impl ShiftedQuasiTriangular<'_> {
    /// Whether a diagonal block is exactly singular.
    fn is_singular(&self) -> bool {
        let t = self.t;
        let z = self.z;
        self.blocks.iter().any(|&(i, s)| {
            if s == 1 {
                (Complex64::new(t[(i, i)], 0.0) - z).norm() == 0.0
            } else {
                let a = Complex64::new(t[(i, i)], 0.0) - z;
                let d = Complex64::new(t[(i + 1, i + 1)], 0.0) - z;
                (a * d - t[(i, i + 1)] * t[(i + 1, i)]).norm() == 0.0
            }
        })
    }

    /// Solves `(T - zI) x = b` in place by block back substitution.
    fn solve(&self, x: &mut [Complex64]) -> Option<()> {
        let t = self.t;
        let n = t.n();
        let z = self.z;
        for &(i, s) in self.blocks.iter().rev() {
            let end = i + s;
            for r in i..end {
                let row = &t.row(r)[end..n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, xv) in row.iter().zip(&x[end..n]) {
                    acc += xv * *a;
                }
                x[r] -= acc;
            }
            if s == 1 {
                let p = Complex64::new(t[(i, i)], 0.0) - z;
                if p.norm() == 0.0 {
                    return None;
                }
                x[i] /= p;
            } else {
                let a = [
                    [
                        Complex64::new(t[(i, i)], 0.0) - z,
                        Complex64::new(t[(i, i + 1)], 0.0),
                    ],
                    [
                        Complex64::new(t[(i + 1, i)], 0.0),
                        Complex64::new(t[(i + 1, i + 1)], 0.0) - z,
                    ],
                ];
                let sol = solve2(a, [x[i], x[i + 1]])?;
                x[i] = sol[0];
                x[i + 1] = sol[1];
            }
        }
        Some(())
    }

    /// Solves `(T - zI)^H y = b` in place (forward substitution on `T^T - conj(z) I`).
    fn solve_adjoint(&self, y: &mut [Complex64]) -> Option<()> {
        let t = self.t;
        let n = t.n();
        let zc = self.z.conj();
        for &(i, s) in self.blocks.iter() {
            let end = i + s;
            if s == 1 {
                let p = Complex64::new(t[(i, i)], 0.0) - zc;
                if p.norm() == 0.0 {
                    return None;
                }
                y[i] /= p;
            } else {
                // transpose of the 2x2 block
                let a = [
                    [
                        Complex64::new(t[(i, i)], 0.0) - zc,
                        Complex64::new(t[(i + 1, i)], 0.0),
                    ],
                    [
                        Complex64::new(t[(i, i + 1)], 0.0),
                        Complex64::new(t[(i + 1, i + 1)], 0.0) - zc,
                    ],
                ];
                let sol = solve2(a, [y[i], y[i + 1]])?;
                y[i] = sol[0];
                y[i + 1] = sol[1];
            }
            for r in i..end {
                let yr = y[r];
                let row = &t.row(r)[end..n];
                for (a, yv) in row.iter().zip(y[end..n].iter_mut()) {
                    *yv -= yr * *a;
                }
            }
        }
        Some(())
    }
}

/// `x <- (A - zI)^{-H} (A - zI)^{-1} x`; `None` when `A - zI` is singular.
trait InverseGram {
    fn dim(&self) -> usize;
    fn is_singular(&self) -> bool;
    fn apply(&self, x: &mut [Complex64]) -> Option<()>;
}

impl InverseGram for ShiftedQuasiTriangular<'_> {
    fn dim(&self) -> usize {
        self.t.n()
    }

    fn is_singular(&self) -> bool {
        ShiftedQuasiTriangular::is_singular(self)
    }

    fn apply(&self, x: &mut [Complex64]) -> Option<()> {
        self.solve(x)?;
        self.solve_adjoint(x)
    }
}

fn matvec(a: &RealMatrix, x: &[Complex64], out: &mut [Complex64]) {
    for (o, row) in out.iter_mut().zip(a.as_slice().chunks_exact(a.n())) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (r, v) in row.iter().zip(x) {
            re += r * v.re;
            im += r * v.im;
        }
        *o = Complex64::new(re, im);
    }
}

fn matvec_t(a: &RealMatrix, x: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for (row, v) in a.as_slice().chunks_exact(a.n()).zip(x) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += v * *r;
        }
    }
}

/// Block-cyclic matrix `Y` (block `(i, i+1 mod m)` is `A_i`) prepared for
/// repeated shifted solves.
///
/// With `P = A_0 A_1 ... A_{m-1} = Q T Q^T`, conjugating `Y` by
/// `diag(Q, I, ..., I)` gives a block-cyclic matrix with the same singular
/// values whose cyclic product is `T` itself. A solve with `Y - zI` then costs
/// one quasi-triangular solve with `T - z^m I` and `2(m-1)` matrix-vector
/// products; `Y` is never factored.
pub struct BlockCyclic<'a> {
    factors: Vec<std::borrow::Cow<'a, RealMatrix>>,
    t: &'a RealMatrix,
    blocks: Vec<(usize, usize)>,
}

impl<'a> BlockCyclic<'a> {
    /// `factors` are the blocks `A_i`; `product_schur` must be the Schur form
    /// of their product, computed with vectors.
    pub fn new(factors: &'a [RealMatrix], product_schur: &'a RealSchur) -> Result<Self> {
        use std::borrow::Cow;
        let Some(first) = factors.first() else {
            return Err(Error::invalid(
                "block-cyclic matrix needs at least one factor",
            ));
        };
        let n = first.n();
        if let Some(bad) = factors.iter().find(|f| f.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.n(),
            });
        }
        let Some(q) = product_schur.q.as_ref() else {
            return Err(Error::invalid(
                "block-cyclic solves need the Schur vectors of the product",
            ));
        };
        if q.n() != n || product_schur.t.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.n(),
            });
        }
        let m = factors.len();
        let mut out: Vec<Cow<'a, RealMatrix>> = factors.iter().map(Cow::Borrowed).collect();
        if m == 1 {
            out[0] = Cow::Borrowed(&product_schur.t);
        } else {
            out[0] = Cow::Owned(q.transpose().matmul(&factors[0]));
            out[m - 1] = Cow::Owned(factors[m - 1].matmul(q));
        }
        Ok(Self {
            factors: out,
            t: &product_schur.t,
            blocks: product_schur.blocks(),
        })
    }

    fn shifted(&self, z: Complex64) -> ShiftedBlockCyclic<'_> {
        ShiftedBlockCyclic {
            cyc: self,
            inner: ShiftedQuasiTriangular {
                t: self.t,
                blocks: &self.blocks,
                z: z.powi(self.factors.len() as i32),
            },
            z,
        }
    }
}

struct ShiftedBlockCyclic<'a> {
    cyc: &'a BlockCyclic<'a>,
    inner: ShiftedQuasiTriangular<'a>,
    z: Complex64,
}

impl ShiftedBlockCyclic<'_> {
    fn solve(&self, x: &mut [Complex64]) -> Option<()> {
        let a = &self.cyc.factors;
        let m = a.len();
        let n = a[0].n();
        let z = self.z;
        let mut s = x[(m - 1) * n..].to_vec();
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for k in (0..m - 1).rev() {
            matvec(&a[k], &s, &mut tmp);
            let zk = z.powi((m - 1 - k) as i32);
            for ((si, ti), bi) in s.iter_mut().zip(&tmp).zip(&x[k * n..(k + 1) * n]) {
                *si = zk * bi + ti;
            }
        }
        self.inner.solve(&mut s)?;
        // back out the remaining blocks: x_i = (A_i x_{i+1} - b_i) / z
        x[..n].copy_from_slice(&s);
        for i in (1..m).rev() {
            matvec(&a[i], &s, &mut tmp);
            let blk = &mut x[i * n..(i + 1) * n];
            for (bi, ti) in blk.iter_mut().zip(&tmp) {
                *bi = (ti - *bi) / z;
            }
            s.copy_from_slice(blk);
        }
        Some(())
    }

    fn solve_adjoint(&self, y: &mut [Complex64]) -> Option<()> {
        let a = &self.cyc.factors;
        let m = a.len();
        let n = a[0].n();
        let zc = self.z.conj();
        let mut s = vec![Complex64::new(0.0, 0.0); n];
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for j in 1..m {
            let zj = zc.powi(j as i32 - 1);
            for (si, bi) in s.iter_mut().zip(&y[j * n..(j + 1) * n]) {
                *si += zj * bi;
            }
            matvec_t(&a[j], &s, &mut tmp);
            s.copy_from_slice(&tmp);
        }
        let zm1 = zc.powi(m as i32 - 1);
        for (si, bi) in s.iter_mut().zip(&y[..n]) {
            *si += zm1 * bi;
        }
        self.inner.solve_adjoint(&mut s)?;
        y[..n].copy_from_slice(&s);
        // y_{i+1} = (A_i^T y_i - b_{i+1}) / conj(z)
        for i in 0..m - 1 {
            matvec_t(&a[i], &s, &mut tmp);
            let blk = &mut y[(i + 1) * n..(i + 2) * n];
            for (bi, ti) in blk.iter_mut().zip(&tmp) {
                *bi = (ti - *bi) / zc;
            }
            s.copy_from_slice(blk);
        }
        Some(())
    }
}

impl InverseGram for ShiftedBlockCyclic<'_> {
    fn dim(&self) -> usize {
        self.cyc.factors.len() * self.cyc.factors[0].n()
    }

    fn is_singular(&self) -> bool {
        self.z.norm() == 0.0 || self.inner.is_singular()
    }

    fn apply(&self, x: &mut [Complex64]) -> Option<()> {
        self.solve(x)?;
        self.solve_adjoint(x)
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Fixed, well-spread start vector.
fn start_vector(n: usize) -> Vec<Complex64> {
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let a = next();
            let b = next();
            Complex64::new(a - 0.5, b - 0.5)
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Top eigenvector of the Lanczos tridiagonal by inverse iteration.
fn top_ritz_coefficients(alpha: &[f64], beta: &[f64], theta: f64) -> Option<Vec<f64>> {
    let k = alpha.len();
    let shift = theta * (1.0 + 1e-10) + f64::MIN_POSITIVE;
    let t = RealMatrix::from_fn(k, |i, j| {
        if i == j {
            alpha[i] - shift
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let lu = Lu::factor(&t).ok()?;
    let mut y = vec![1.0; k];
    for _ in 0..2 {
        y = lu.solve(&y);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(ny > 0.0 && ny.is_finite()) {
            return None;
        }
        y.iter_mut().for_each(|v| *v /= ny);
    }
    Some(y)
}

/// `s_min(A - zI)` by Lanczos on `(A - zI)^{-H} (A - zI)^{-1}`, started from
/// `start` (unit norm). Also returns the top Ritz vector for warm starts.
fn smallest_singular_value(
    op: &dyn InverseGram,
    start: Option<&[Complex64]>,
) -> Result<(f64, Option<Vec<Complex64>>)> {
    let n = op.dim();
    if n == 0 {
        return Ok((f64::INFINITY, None));
    }
    if op.is_singular() {
        return Ok((0.0, None));
    }
    let steps = n.min(LANCZOS_MAX_STEPS);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps + 1);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    basis.push(match start {
        Some(s) => s.to_vec(),
        None => start_vector(n),
    });
    let mut prev_top = 0.0f64;
    for j in 0..steps {
        let mut w = basis[j].clone();
        if op.apply(&mut w).is_none() || w.iter().any(|x| !x.is_finite()) {
            return Ok((0.0, None));
        }
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization (twice is enough)
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm(&w);
        let top = *tridiagonal_eigenvalues(&alpha, &beta)?
            .last()
            .expect("nonempty");
        let converged = j >= 2 && (top - prev_top).abs() <= LANCZOS_RTOL * top;
        prev_top = top;
        if converged || j + 1 == steps || b <= 1e-14 * top.max(f64::MIN_POSITIVE) {
            if !(top > 0.0) {
                return Ok((0.0, None));
            }
            let ritz = top_ritz_coefficients(&alpha, &beta, top).map(|y| {
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                for (c, q) in y.iter().zip(&basis) {
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi += qi * *c;
                    }
                }
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                v
            });
            return Ok((
                top.sqrt().recip(),
                ritz.filter(|v| v.iter().all(|x| x.is_finite())),
            ));
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    unreachable!("loop returns on its last step")
}

fn check_contour(radius: f64, gridpoints: usize) -> Result<()> {
    if gridpoints < 8 {
        return Err(Error::invalid(
            "at least 8 contour grid points are required",
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("contour radius must be positive"));
    }
    Ok(())
}

fn contour_search<'a, F>(radius: f64, gridpoints: usize, make: F) -> Result<ContourMinimum>
where
    F: Fn(Complex64) -> Box<dyn InverseGram + 'a>,
{
    check_contour(radius, gridpoints)?;
    let mut best = ContourMinimum {
        min_value: f64::INFINITY,
        argmin_z: Complex64::new(radius, 0.0),
    };
    let mut warm: Option<Vec<Complex64>> = None;
    // s_min(A - conj(z) I) = s_min(A - zI) for real A: the lower half mirrors the upper
    for k in 0..=gridpoints / 2 {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / gridpoints as f64;
        let z = Complex64::from_polar(radius, theta);
        let op = make(z);
        let (s, ritz) = smallest_singular_value(op.as_ref(), warm.as_deref())?;
        warm = ritz;
        if s < best.min_value {
            best = ContourMinimum {
                min_value: s,
                argmin_z: z,
            };
        }
    }
    Ok(best)
}

/// Minimum of `s_min(M - zI)` over `z = radius * exp(2 pi i k / gridpoints)`,
/// given the real Schur form of `M`.
///
/// Off the spectrum `z -> |(M - zI)^{-1}|` is subharmonic, so this boundary
/// search approximates the infimum over `|z| >= radius`.
pub fn least_singular_on_contour_schur(
    schur: &RealSchur,
    radius: f64,
    gridpoints: usize,
) -> Result<ContourMinimum> {
    let blocks = schur.blocks();
    contour_search(radius, gridpoints, |z| {
        Box::new(ShiftedQuasiTriangular {
            t: &schur.t,
            blocks: &blocks,
            z,
        })
    })
}

/// Same search for a block-cyclic matrix.
pub fn least_singular_on_contour_block_cyclic(
    cyc: &BlockCyclic<'_>,
    radius: f64,
    gridpoints: usize,
) -> Result<ContourMinimum> {
    contour_search(radius, gridpoints, |z| Box::new(cyc.shifted(z)))
}

pub fn least_singular_on_contour(
    m: &RealMatrix,
    radius: f64,
    gridpoints: usize,
) -> Result<ContourMinimum> {
    check_contour(radius, gridpoints)?;
    let schur = real_schur(m)?;
    least_singular_on_contour_schur(&schur, radius, gridpoints)
}

/// `s_min(M - zI)` at a single point.
pub fn smallest_singular_value_at(schur: &RealSchur, z: Complex64) -> Result<f64> {
    let blocks = schur.blocks();
    let op = ShiftedQuasiTriangular {
        t: &schur.t,
        blocks: &blocks,
        z,
    };
    Ok(smallest_singular_value(&op, None)?.0)
}

/// `s_min(Y - zI)` at a single point for a block-cyclic `Y`.
pub fn smallest_singular_value_block_cyclic_at(cyc: &BlockCyclic<'_>, z: Complex64) -> Result<f64> {
    Ok(smallest_singular_value(&cyc.shifted(z), None)?.0)
}
