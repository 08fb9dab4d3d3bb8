//! Shared domain types: grid geometry, delay-Doppler grids, CE-BEM coefficient
//! vectors, power budgets and the seeded random stream used by every Monte
//! Carlo routine.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest frame length for which dense K×K matrices are built.
pub const DENSE_LIMIT: usize = 4096;

/// Geometry of a CE-BEM channel on an `M×N` delay-Doppler grid.
///
/// Taps are indexed by delay `l ∈ 0..=L` and Doppler `q ∈ -Q/2..=Q/2`. The
/// canonical coefficient layout is Doppler-outer, delay-inner:
/// `index = (q + Q/2)·(L+1) + l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    n: usize,
    m: usize,
    l: usize,
    q: usize,
    tap_variances: Vec<f64>,
}

impl ChannelSpec {
    /// Builds a spec, checking `K = N·M`, even `Q`, and one positive variance
    /// per tap in canonical order.
    pub fn new(
        k: usize,
        n: usize,
        m: usize,
        l: usize,
        q: usize,
        tap_variances: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidSpec(format!(
                "N and M must be positive (N = {n}, M = {m})"
            )));
        }
        if k != n * m {
            return Err(Error::InvalidSpec(format!(
                "K = {k} differs from N·M = {n}·{m} = {}",
                n * m
            )));
        }
        if !q.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!("Q = {q} must be even")));
        }
        let taps = (l + 1) * (q + 1);
        if tap_variances.len() != taps {
            return Err(Error::InvalidSpec(format!(
                "expected {taps} tap variances, got {}",
                tap_variances.len()
            )));
        }
        if let Some(bad) = tap_variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidSpec(format!(
                "tap variances must be positive and finite (found {bad})"
            )));
        }
        Ok(Self {
            n,
            m,
            l,
            q,
            tap_variances,
        })
    }

    /// Spec with every tap at variance `1/((Q+1)(L+1))`.
    pub fn uniform(n: usize, m: usize, l: usize, q: usize) -> Result<Self> {
        let taps = (l + 1) * (q + 1);
        Self::new(n * m, n, m, l, q, vec![1.0 / taps as f64; taps])
    }

    pub fn k(&self) -> usize {
        self.n * self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_delay(&self) -> usize {
        self.l
    }

    pub fn doppler_order(&self) -> usize {
        self.q
    }

    pub fn half_doppler(&self) -> i64 {
        (self.q / 2) as i64
    }

    pub fn num_taps(&self) -> usize {
        (self.l + 1) * (self.q + 1)
    }

    pub fn tap_variances(&self) -> &[f64] {
        &self.tap_variances
    }

    /// Canonical position of tap `(l, q)`.
    pub fn tap_index(&self, l: usize, q: i64) -> Result<usize> {
        if l > self.l {
            return Err(Error::OutOfRange {
                what: "l",
                value: l as i64,
                range: format!("[0, {}]", self.l),
            });
        }
        let h = self.half_doppler();
        if q < -h || q > h {
            return Err(Error::OutOfRange {
                what: "q",
                value: q,
                range: format!("[{}, {}]", -h, h),
            });
        }
        Ok((q + h) as usize * (self.l + 1) + l)
    }

    /// `(l, q)` pairs in canonical order.
    pub fn taps(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        let h = self.half_doppler();
        (-h..=h).flat_map(move |q| (0..=self.l).map(move |l| (l, q)))
    }

    /// Same geometry on a different grid, keeping the tap variances.
    pub fn with_grid(&self, n: usize, m: usize) -> Result<Self> {
        Self::new(n * m, n, m, self.l, self.q, self.tap_variances.clone())
    }
}

/// An `M×N` delay-Doppler grid stored column-major, so the backing buffer is
/// exactly `vec(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl DdGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![Complex64::new(0.0, 0.0); m * n],
        }
    }

    /// Builds a grid from row-major nested rows (handy in tests).
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut grid = Self::zeros(m, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                grid[(i, j)] = *v;
            }
        }
        Ok(grid)
    }

    pub fn from_fn(m: usize, n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut grid = Self::zeros(m, n);
        for col in 0..n {
            for row in 0..m {
                grid.data[row + col * m] = f(row, col);
            }
        }
        grid
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn check_dims(&self, spec: &ChannelSpec) -> Result<()> {
        if self.m != spec.m() {
            return Err(Error::Dimension {
                expected: spec.m(),
                actual: self.m,
            });
        }
        if self.n != spec.n() {
            return Err(Error::Dimension {
                expected: spec.n(),
                actual: self.n,
            });
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DdGrid {
    type Output = Complex64;

    fn index(&self, (row, col): (usize, usize)) -> &Complex64 {
        assert!(row < self.m && col < self.n, "grid index out of bounds");
        &self.data[row + col * self.m]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DdGrid {
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut Complex64 {
        assert!(row < self.m && col < self.n, "grid index out of bounds");
        &mut self.data[row + col * self.m]
    }
}

/// Column-stacking vectorization.
pub fn vec(grid: &DdGrid) -> Vec<Complex64> {
    grid.data.clone()
}

/// Inverse of [`vec`]: reshapes a length `M·N` vector into an `M×N` grid.
pub fn vec_inv(v: &[Complex64], m: usize, n: usize) -> Result<DdGrid> {
    if v.len() != m * n {
        return Err(Error::Dimension {
            expected: m * n,
            actual: v.len(),
        });
    }
    Ok(DdGrid {
        m,
        n,
        data: v.to_vec(),
    })
}

/// CE-BEM coefficients `c_{l,q}` in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct BemCoefficients(Vec<Complex64>);

impl BemCoefficients {
    pub fn new(spec: &ChannelSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.num_taps() {
            return Err(Error::Dimension {
                expected: spec.num_taps(),
                actual: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(spec: &ChannelSpec) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); spec.num_taps()])
    }

    /// Single unit tap at `(l, q)`.
    pub fn unit(spec: &ChannelSpec, l: usize, q: i64) -> Result<Self> {
        let mut c = Self::zeros(spec);
        c.0[spec.tap_index(l, q)?] = Complex64::new(1.0, 0.0);
        Ok(c)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, spec: &ChannelSpec, l: usize, q: i64) -> Result<Complex64> {
        Ok(self.0[spec.tap_index(l, q)?])
    }
}

/// Total power `P`, data fraction `α`, and noise variance `σ²_n`.
///
/// Data symbols get `P_c = α·P`, the pilot gets `P_p = (1−α)·P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    total_power: f64,
    alpha: f64,
    noise_variance: f64,
}

impl PowerBudget {
    pub fn new(total_power: f64, alpha: f64, noise_variance: f64) -> Result<Self> {
        if !(total_power > 0.0 && total_power.is_finite()) {
            return Err(Error::InvalidBudget(format!(
                "total power must be positive (got {total_power})"
            )));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidBudget(format!(
                "noise variance must be positive (got {noise_variance})"
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidBudget(format!(
                "alpha must lie in [0, 1] (got {alpha})"
            )));
        }
        Ok(Self {
            total_power,
            alpha,
            noise_variance,
        })
    }

    /// `P = 1` and `σ²_n = P / (K·SNR_tx)`.
    pub fn from_snr_tx_db(snr_tx_db: f64, k: usize, alpha: f64) -> Result<Self> {
        let snr = db_to_linear(snr_tx_db);
        Self::new(1.0, alpha, 1.0 / (k as f64 * snr))
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.total_power, alpha, self.noise_variance)
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn comm_power(&self) -> f64 {
        self.alpha * self.total_power
    }

    pub fn pilot_power(&self) -> f64 {
        (1.0 - self.alpha) * self.total_power
    }

    /// `P / (K σ²_n)` in dB.
    pub fn snr_tx_db(&self, k: usize) -> f64 {
        linear_to_db(self.total_power / (k as f64 * self.noise_variance))
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// One independent, reproducible random stream: `seed` selects the
/// experiment, `stream_id` the Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for trial `index` under the same seed.
    pub fn trial(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(index),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws from `CN(0, variance)`: real and imaginary parts each `N(0, variance/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    variance: f64,
) -> Vec<Complex64> {
    (0..len).map(|_| complex_gaussian(rng, variance)).collect()
}
