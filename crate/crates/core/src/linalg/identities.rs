//! Numerical self-test of the rank-one and low-rank inverse updates, the
//! resolvent identity and Weyl's perturbation bound for singular values.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::RealMatrix;
use crate::rng::{counter_hash, rng_from_seed};

use super::dense::Lu;
use super::singular_values;

/// Deliberate sign error used to check that failures are detected and named.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectedFault {
    Woodbury,
}

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub n: usize,
    /// Columns of the Woodbury update.
    pub rank: usize,
    pub weyl_pairs: usize,
    pub zero_u: bool,
    pub fault: Option<InjectedFault>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            n: 50,
            rank: 3,
            weyl_pairs: 100,
            zero_u: false,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub sherman_morrison_inverse: f64,
    pub sherman_morrison_vector: f64,
    pub woodbury: f64,
    pub resolvent_identity: f64,
    /// Resolvent identity with `A = B`, where the left side is exactly zero.
    pub resolvent_identity_equal: f64,
    pub weyl_holds: bool,
    pub weyl_pairs: usize,
    /// Largest `max_i |s_i(A) - s_i(B)| - ||A - B||` seen (non-positive when Weyl holds).
    pub weyl_worst_slack: f64,
}

impl IdentityReport {
    /// Named residuals in a fixed order.
    pub fn residuals(&self) -> [(&'static str, f64); 5] {
        [
            ("sherman_morrison_inverse", self.sherman_morrison_inverse),
            ("sherman_morrison_vector", self.sherman_morrison_vector),
            ("woodbury", self.woodbury),
            ("resolvent_identity", self.resolvent_identity),
            ("resolvent_identity_equal", self.resolvent_identity_equal),
        ]
    }

    /// First check that fails the given residual threshold.
    pub fn first_failure(&self, threshold: f64) -> Option<&'static str> {
        for (name, r) in self.residuals() {
            if !(r < threshold || (name == "resolvent_identity_equal" && r == 0.0)) {
                return Some(name);
            }
        }
        if !self.weyl_holds {
            return Some("weyl");
        }
        None
    }
}

struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn gaussian(rows: usize, cols: usize, scale: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        Self { rows, cols, data }
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn from_square(m: &RealMatrix) -> Self {
        Self {
            rows: m.n(),
            cols: m.n(),
            data: m.as_slice().to_vec(),
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn mul(&self, other: &Dense) -> Dense {
        assert_eq!(self.cols, other.rows);
        let mut out = Dense::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    fn transpose(&self) -> Dense {
        let mut out = Dense::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    fn to_square(&self) -> RealMatrix {
        assert_eq!(self.rows, self.cols);
        RealMatrix::from_row_major(self.rows, self.data.clone()).expect("finite")
    }

    fn rel_diff(&self, other: &Dense) -> f64 {
        let num: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = other.data.iter().map(|b| b * b).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Well-conditioned test matrix `shift * I + G / sqrt(n)`.
fn well_conditioned(n: usize, shift: f64, seed: u64) -> RealMatrix {
    let g = Dense::gaussian(n, n, 1.0 / (n as f64).sqrt(), seed);
    let mut m = g.to_square();
    for i in 0..n {
        m[(i, i)] += shift;
    }
    m
}

pub fn identity_selftest(seed: u64) -> Result<IdentityReport> {
    identity_selftest_with(seed, &SelftestOptions::default())
}

pub fn identity_selftest_with(seed: u64, opts: &SelftestOptions) -> Result<IdentityReport> {
    let n = opts.n;
    let a = well_conditioned(n, 3.0, counter_hash(&[seed, 1]));
    let a_inv = Dense::from_square(&Lu::factor(&a)?.inverse());
    let scale = 1.0 / (n as f64).sqrt();
    let u = if opts.zero_u {
        Dense::zeros(n, 1)
    } else {
        Dense::gaussian(n, 1, scale, counter_hash(&[seed, 2]))
    };
    let v = Dense::gaussian(n, 1, scale, counter_hash(&[seed, 3]));

    // (A + u v^T)^{-1} both ways
    let a_dense = Dense::from_square(&a);
    let uvt = u.mul(&v.transpose());
    let mut perturbed = a_dense.data.clone();
    for (p, x) in perturbed.iter_mut().zip(&uvt.data) {
        *p += x;
    }
    let perturbed = RealMatrix::from_row_major(n, perturbed)?;
    let direct_inv = Dense::from_square(&Lu::factor(&perturbed)?.inverse());
    let ainv_u = a_inv.mul(&u);
    let vt_ainv = v.transpose().mul(&a_inv);
    let denom = 1.0 + v.transpose().mul(&ainv_u).data[0];
    let outer = ainv_u.mul(&vt_ainv);
    let sm1 = Dense {
        rows: n,
        cols: n,
        data: a_inv
            .data
            .iter()
            .zip(&outer.data)
            .map(|(x, y)| x - y / denom)
            .collect(),
    };
    let sherman_morrison_inverse = direct_inv.rel_diff(&sm1);

    let lhs2 = direct_inv.mul(&u);
    let rhs2 = Dense {
        rows: n,
        cols: 1,
        data: ainv_u.data.iter().map(|x| x / denom).collect(),
    };
    let sherman_morrison_vector = lhs2.rel_diff(&rhs2);

    // (A + U V^T)^{-1} U = A^{-1} U (I + V^T A^{-1} U)^{-1}
    let k = opts.rank;
    let big_u = Dense::gaussian(n, k, scale, counter_hash(&[seed, 4]));
    let big_v = Dense::gaussian(n, k, scale, counter_hash(&[seed, 5]));
    let uvt = big_u.mul(&big_v.transpose());
    let mut pert = a_dense.data.clone();
    for (p, x) in pert.iter_mut().zip(&uvt.data) {
        *p += x;
    }
    let pert = RealMatrix::from_row_major(n, pert)?;
    let lhs = Dense::from_square(&Lu::factor(&pert)?.inverse()).mul(&big_u);
    let ainv_bu = a_inv.mul(&big_u);
    let mut small = big_v.transpose().mul(&ainv_bu);
    let sign = match opts.fault {
        Some(InjectedFault::Woodbury) => -1.0,
        None => 1.0,
    };
    for x in small.data.iter_mut() {
        *x *= sign;
    }
    for i in 0..k {
        small.data[i * k + i] += 1.0;
    }
    let small_inv = Dense::from_square(&Lu::factor(&small.to_square())?.inverse());
    let rhs = ainv_bu.mul(&small_inv);
    let woodbury = lhs.rel_diff(&rhs);

    // A^{-1} - B^{-1} = A^{-1} (B - A) B^{-1}
    let b = well_conditioned(n, 2.5, counter_hash(&[seed, 6]));
    let b_inv = Dense::from_square(&Lu::factor(&b)?.inverse());
    let diff_inv = Dense {
        rows: n,
        cols: n,
        data: a_inv
            .data
            .iter()
            .zip(&b_inv.data)
            .map(|(x, y)| x - y)
            .collect(),
    };
    let b_minus_a = Dense::from_square(&b.sub(&a));
    let rhs = a_inv.mul(&b_minus_a).mul(&b_inv);
    let resolvent_identity = diff_inv.rel_diff(&rhs);

    let same = a_inv.mul(&Dense::zeros(n, n)).mul(&a_inv);
    let lhs_equal: f64 = a_inv
        .data
        .iter()
        .zip(&a_inv.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let resolvent_identity_equal = lhs_equal.max(same.data.iter().fold(0.0, |m, x| m.max(x.abs())));

    // Weyl: max_i |s_i(A) - s_i(B)| <= ||A - B||
    let mut weyl_holds = true;
    let mut worst = f64::NEG_INFINITY;
    for p in 0..opts.weyl_pairs {
        let a = Dense::gaussian(n, n, 1.0, counter_hash(&[seed, 7, p as u64])).to_square();
        let e = Dense::gaussian(n, n, 0.1, counter_hash(&[seed, 8, p as u64])).to_square();
        let b = a.add(&e);
        let sa = singular_values(&a)?;
        let sb = singular_values(&b)?;
        let op = singular_values(&a.sub(&b))?.values[0];
        let gap = sa
            .values
            .iter()
            .zip(&sb.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        // rounding allowance proportional to the norms involved
        let slack = gap - op;
        worst = worst.max(slack);
        if slack > 1e-12 * sa.values[0].max(sb.values[0]) {
            weyl_holds = false;
        }
    }

    Ok(IdentityReport {
        sherman_morrison_inverse,
        sherman_morrison_vector,
        woodbury,
        resolvent_identity,
        resolvent_identity_equal,
        weyl_holds,
        weyl_pairs: opts.weyl_pairs,
        weyl_worst_slack: if opts.weyl_pairs == 0 { 0.0 } else { worst },
    })
}
