//! OTFS modulation `x = (F_N^H ⊗ I_M) vec(S)` and its inverse.
//!
//! Every delay row of the grid is carried by an `N`-point unitary DFT across
//! the Doppler axis, so modulation is an isometry and all power accounting can
//! be done on the delay-Doppler grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::types::{vec_inv, DdGrid};

/// Unitary DFT matrix `F_N[k, n] = exp(−j2πkn/N)/√N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DftMatrix {
    order: usize,
}

impl DftMatrix {
    pub fn new(order: usize) -> Self {
        Self { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entry(&self, k: usize, n: usize) -> Complex64 {
        let n_f = self.order as f64;
        let phase = -2.0 * PI * ((k * n) % self.order) as f64 / n_f;
        Complex64::from_polar(1.0 / n_f.sqrt(), phase)
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_fn(self.order, self.order, |k, n| self.entry(k, n))
    }
}

/// Planned transforms for one `(M, N)` grid shape.
#[derive(Clone)]
pub struct Modem {
    m: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Modem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Modem")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl Modem {
    pub fn new(m: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }

    /// Delay-Doppler grid to time-domain samples.
    pub fn modulate(&self, grid: &DdGrid) -> Result<Vec<Complex64>> {
        if grid.rows() != self.m || grid.cols() != self.n {
            return Err(Error::Dimension {
                expected: self.m * self.n,
                actual: grid.rows() * grid.cols(),
            });
        }
        Ok(self.transform_rows(grid.as_slice(), &self.inverse))
    }

    /// Time-domain samples back to the delay-Doppler grid.
    pub fn demodulate(&self, r: &[Complex64]) -> Result<DdGrid> {
        if r.len() != self.m * self.n {
            return Err(Error::Dimension {
                expected: self.m * self.n,
                actual: r.len(),
            });
        }
        vec_inv(&self.transform_rows(r, &self.forward), self.m, self.n)
    }

    // Applies the unitary N-point transform to each of the M interleaved rows
    // of a column-major buffer (row m lives at m, m+M, m+2M, ...).
    fn transform_rows(&self, input: &[Complex64], fft: &Arc<dyn Fft<f64>>) -> Vec<Complex64> {
        let (m, n) = (self.m, self.n);
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); m * n];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for r in 0..m {
            for (j, v) in row.iter_mut().enumerate() {
                *v = input[r + j * m];
            }
            fft.process_with_scratch(&mut row, &mut scratch);
            for (j, v) in row.iter().enumerate() {
                out[r + j * m] = v * scale;
            }
        }
        out
    }
}

pub fn otfs_modulate(grid: &DdGrid) -> Result<Vec<Complex64>> {
    Modem::new(grid.rows(), grid.cols()).modulate(grid)
}

pub fn otfs_demodulate(r: &[Complex64], m: usize, n: usize) -> Result<DdGrid> {
    Modem::new(m, n).demodulate(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, kron, matvec};
    use crate::types::{complex_gaussian, vec, RngStream};

    fn random_grid(m: usize, n: usize, seed: u64) -> DdGrid {
        let mut rng = RngStream::new(seed, 0).rng();
        DdGrid::from_fn(m, n, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn dft_is_unitary() {
        let f = DftMatrix::new(7).to_dense();
        let prod = &f * f.adjoint();
        let err = crate::linalg::max_abs_diff(&prod, &identity(7));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn single_doppler_bin_is_identity() {
        let g = random_grid(5, 1, 1);
        assert_eq!(otfs_modulate(&g).unwrap(), vec(&g));
    }

    #[test]
    fn two_point_idft() {
        let a = Complex64::new(1.0, 2.0);
        let b = Complex64::new(-0.5, 0.25);
        let g = DdGrid::from_rows(&[vec![a, b]]).unwrap();
        let x = otfs_modulate(&g).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((x[0] - (a + b) * s).norm() < 1e-15);
        assert!((x[1] - (a - b) * s).norm() < 1e-15);
    }

    #[test]
    fn matches_dense_kronecker_product() {
        let (m, n) = (6, 3);
        let g = random_grid(m, n, 2);
        let dense = kron(
            &DftMatrix::new(n).to_dense().adjoint().to_owned(),
            &identity(m),
        );
        let expected = matvec(&dense, &vec(&g));
        let got = otfs_modulate(&g).unwrap();
        let err = got
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn round_trip_and_energy() {
        let g = random_grid(6, 3, 3);
        let modem = Modem::new(6, 3);
        let x = modem.modulate(&g).unwrap();
        let energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        assert!((energy - g.frobenius_sq()).abs() < 1e-12);
        let back = modem.demodulate(&x).unwrap();
        let err = vec(&back)
            .iter()
            .zip(g.as_slice())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn zero_in_zero_out() {
        let y = otfs_demodulate(&vec![Complex64::new(0.0, 0.0); 18], 6, 3).unwrap();
        assert!(y.as_slice().iter().all(|v| v.norm() == 0.0));
        assert!(otfs_demodulate(&[Complex64::new(0.0, 0.0); 17], 6, 3).is_err());
    }

    #[test]
    fn single_column_gives_repeated_blocks() {
        // Only Doppler bin n0 occupied: block j equals block 0 times e^{j2π n0 j / N}.
        let (m, n, n0) = (4, 5, 2);
        let mut rng = RngStream::new(9, 0).rng();
        let g = DdGrid::from_fn(m, n, |_, col| {
            if col == n0 {
                complex_gaussian(&mut rng, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let x = otfs_modulate(&g).unwrap();
        for j in 0..n {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * (n0 * j) as f64 / n as f64);
            for r in 0..m {
                assert!((x[r + j * m] - x[r] * phase).norm() < 1e-12);
            }
        }
    }
}
