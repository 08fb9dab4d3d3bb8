//! Thin dense linear-algebra layer over `faer`.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { one() } else { zero() })
}

pub fn diag(entries: &[Complex64]) -> CMat {
    let n = entries.len();
    Mat::from_fn(n, n, |i, j| if i == j { entries[i] } else { zero() })
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn matvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![zero(); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == zero() {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max(a[(i, j)].norm());
        }
    }
    best
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub struct HpdFactor {
    llt: Llt<Complex64>,
    n: usize,
}

impl HpdFactor {
    pub fn new(a: &CMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        let llt = a
            .llt(Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite(format!("{e:?}")))?;
        Ok(Self { llt, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rhs.len(), self.n);
        let mut b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(b.as_mut());
        (0..self.n).map(|i| b[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, rhs: &CMat) -> CMat {
        self.llt.solve(rhs)
    }

    /// Natural log of the determinant.
    pub fn ln_det(&self) -> f64 {
        let l = self.llt.L();
        (0..self.n).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
    }

    /// `tr(A⁻¹)` from the Cholesky factor.
    pub fn inverse_trace(&self) -> f64 {
        let inv = self.llt.solve(identity(self.n));
        (0..self.n).map(|i| inv[(i, i)].re).sum()
    }
}

/// Natural log of `det(A)` for a Hermitian positive-definite `A`.
pub fn hpd_ln_det(a: &CMat) -> Result<f64> {
    Ok(HpdFactor::new(a)?.ln_det())
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eigenvalue(a: &CMat) -> Result<f64> {
    let eig = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(eig.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_shape_and_entries() {
        let a = Mat::from_fn(2, 2, |i, j| Complex64::new((i * 2 + j) as f64, 0.0));
        let b = identity(3);
        let k = kron(&a, &b);
        assert_eq!((k.nrows(), k.ncols()), (6, 6));
        assert_eq!(k[(4, 1)], a[(1, 0)]);
        assert_eq!(k[(4, 2)], zero());
    }

    #[test]
    fn hpd_solve_and_logdet() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                Complex64::new(4.0, 0.0)
            } else if i < j {
                Complex64::new(0.5, 0.25)
            } else {
                Complex64::new(0.5, -0.25)
            }
        });
        let f = HpdFactor::new(&a).unwrap();
        let x = vec![Complex64::new(1.0, -1.0), one(), Complex64::new(0.0, 2.0)];
        let b = matvec(&a, &x);
        let sol = f.solve(&b);
        for (u, v) in sol.iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
        let d = diag(&[Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)]);
        assert!((hpd_ln_det(&d).unwrap() - 6f64.ln()).abs() < 1e-12);
        assert!((HpdFactor::new(&d).unwrap().inverse_trace() - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
        assert!((hermitian_max_eigenvalue(&d).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let d = diag(&[one(), Complex64::new(-1.0, 0.0)]);
        assert!(HpdFactor::new(&d).is_err());
    }
}
