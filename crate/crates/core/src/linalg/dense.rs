//! LU factorizations with partial pivoting, real and complex.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// `P A = L U` for a real square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &RealMatrix) -> Result<Self> {
        let n = a.n();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                return Err(Error::invalid("matrix is singular"));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l != 0.0 {
                    let (top, bottom) = lu.split_at_mut(i * n);
                    let row_k = &top[k * n + k + 1..k * n + n];
                    let row_i = &mut bottom[k + 1..n];
                    for (x, y) in row_i.iter_mut().zip(row_k) {
                        *x -= l * y;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        (0..self.n)
            .map(|i| self.lu[i * self.n + i])
            .product::<f64>()
            * self.sign
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    pub fn inverse(&self) -> RealMatrix {
        let n = self.n;
        let mut inv = RealMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

pub fn det(a: &RealMatrix) -> f64 {
    match Lu::factor(a) {
        Ok(lu) => lu.det(),
        Err(_) => 0.0,
    }
}

pub fn inverse(a: &RealMatrix) -> Result<RealMatrix> {
    Ok(Lu::factor(a)?.inverse())
}

/// Dense square complex matrix, row-major. Only used where complex shifts of a
/// real matrix must be inverted explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// `m - z I`.
    pub fn shifted(m: &RealMatrix, z: Complex64) -> Self {
        let n = m.n();
        let mut data: Vec<Complex64> = m
            .as_slice()
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        for i in 0..n {
            data[i * n + i] -= z;
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Explicit inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            inv[i * n + i] = Complex64::new(1.0, 0.0);
        }
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
                .unwrap();
            if a[p * n + k].norm() == 0.0 {
                return Err(Error::invalid("complex matrix is singular"));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                    inv.swap(k * n + j, p * n + j);
                }
            }
            let piv = a[k * n + k].inv();
            for j in 0..n {
                a[k * n + j] *= piv;
                inv[k * n + j] *= piv;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[i * n + k];
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let akj = a[k * n + j];
                    let ikj = inv[k * n + j];
                    a[i * n + j] -= f * akj;
                    inv[i * n + j] -= f * ikj;
                }
            }
        }
        Ok(ComplexMatrix { n, data: inv })
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Real `2n x 2n` matrix `[[Re, -Im], [Im, Re]]` whose singular values are
    /// those of `self`, each repeated twice.
    pub fn real_embedding(&self) -> RealMatrix {
        let n = self.n;
        RealMatrix::from_fn(2 * n, |i, j| {
            let v = self.get(i % n, j % n);
            match (i < n, j < n) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_inverts() {
        let a =
            RealMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]).unwrap();
        let lu = Lu::factor(&a).unwrap();
        // det by cofactor expansion: 0*(1) - 2*(1-0) + 1*(0-3) = -5
        assert!((lu.det() + 5.0).abs() < 1e-14);
        let inv = lu.inverse();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = RealMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(Lu::factor(&a).is_err());
        assert_eq!(det(&a), 0.0);
    }

    #[test]
    fn complex_inverse_of_shifted_diagonal() {
        let m = RealMatrix::diag(&[1.0, 2.0]);
        let z = Complex64::new(0.5, 1.0);
        let inv = ComplexMatrix::shifted(&m, z).inverse().unwrap();
        let expected = (Complex64::new(1.0, 0.0) - z).inv() + (Complex64::new(2.0, 0.0) - z).inv();
        assert!((inv.trace() - expected).norm() < 1e-14);
    }
}
