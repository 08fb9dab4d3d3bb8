//! CE-BEM linear time-varying channel.
//!
//! The time-domain channel is `H = Σ_q Σ_l c_{l,q} Λ_K^{(q)} P_K^l`, i.e. a
//! time-varying tap `h(k, l) = Σ_q c_{l,q} e^{j2πqk/K}` applied as a circular
//! convolution. Dense matrices are only built for `K ≤ DENSE_LIMIT`; the
//! structured [`LtvChannel`] works at any size.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{one, zero, CMat};
use crate::types::{complex_gaussian, BemCoefficients, ChannelSpec, DENSE_LIMIT};

fn check_dense(k: usize) -> Result<()> {
    if k > DENSE_LIMIT {
        return Err(Error::TooLarge {
            k,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// `P_K^l` with `(P_K^l x)[k] = x[(k − l) mod K]`.
pub fn cyclic_shift_matrix(k: usize, l: usize) -> Result<CMat> {
    if l >= k {
        return Err(Error::OutOfRange {
            what: "l",
            value: l as i64,
            range: format!("[0, {})", k),
        });
    }
    check_dense(k)?;
    Ok(CMat::from_fn(k, k, |i, j| {
        if (j + l) % k == i {
            one()
        } else {
            zero()
        }
    }))
}

/// Splits `P_M^l` into the part that stays inside a length-`M` block (`L`)
/// and the part that wraps into the next block (`U`), so that
/// `P_K^l = I_N ⊗ L + P_N ⊗ U`.
pub fn shift_decomposition(k: usize, n: usize, m: usize, l: usize) -> Result<(CMat, CMat)> {
    if k != n * m {
        return Err(Error::InvalidSpec(format!(
            "K = {k} differs from N·M = {}",
            n * m
        )));
    }
    if l >= m {
        return Err(Error::OutOfRange {
            what: "l",
            value: l as i64,
            range: format!("[0, {})", m),
        });
    }
    let lower = CMat::from_fn(
        m,
        m,
        |i, j| if i >= l && j == i - l { one() } else { zero() },
    );
    let upper = CMat::from_fn(m, m, |i, j| {
        if i < l && j == i + m - l {
            one()
        } else {
            zero()
        }
    });
    Ok((lower, upper))
}

/// Diagonal of `Λ_size^{(q)}`: entries `e^{j2πq·i/size}` for `i = 0..size`.
///
/// `q` may be fractional; `phase_diag(m, q / n)` gives the delay-axis factor in
/// `Λ_K^{(q)} = Λ_N^{(q)} ⊗ Λ_M^{(q/N)}`.
pub fn phase_diag(size: usize, q: f64) -> Vec<Complex64> {
    (0..size)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * q * i as f64 / size as f64))
        .collect()
}

/// Dense `K×K` time-domain channel matrix.
#[derive(Debug, Clone)]
pub struct TimeChannelMatrix(pub CMat);

impl TimeChannelMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

/// Structured time-varying channel: `taps[k·(L+1) + l] = h(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvChannel {
    k: usize,
    max_delay: usize,
    taps: Vec<Complex64>,
}

impl LtvChannel {
    /// Evaluates `h(k, l) = Σ_q c_{l,q} e^{j2πqk/K}` for every sample.
    pub fn from_bem(spec: &ChannelSpec, c: &BemCoefficients) -> Result<Self> {
        check_coeffs(spec, c)?;
        let k = spec.k();
        let lmax = spec.max_delay();
        let mut taps = vec![zero(); k * (lmax + 1)];
        for (idx, (l, q)) in spec.taps().enumerate() {
            let coeff = c.as_slice()[idx];
            if coeff == zero() {
                continue;
            }
            for s in 0..k {
                taps[s * (lmax + 1) + l] += coeff * basis(q, s, k);
            }
        }
        Ok(Self {
            k,
            max_delay: lmax,
            taps,
        })
    }

    /// Sums on-grid delay-Doppler paths directly:
    /// `h(k, τ) += h_p e^{j2πν(k−τ)}` with `ν = q/K`.
    pub fn from_paths(paths: &[DdPath], spec: &ChannelSpec) -> Result<Self> {
        let k = spec.k();
        let lmax = spec.max_delay();
        let mut taps = vec![zero(); k * (lmax + 1)];
        for p in paths {
            p.check(spec)?;
            for s in 0..k {
                let t = (s as i64 - p.delay as i64) as f64;
                let phase = Complex64::from_polar(1.0, 2.0 * PI * p.doppler as f64 * t / k as f64);
                taps[s * (lmax + 1) + p.delay] += p.gain * phase;
            }
        }
        Ok(Self {
            k,
            max_delay: lmax,
            taps,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.k
    }

    pub fn tap(&self, sample: usize, delay: usize) -> Complex64 {
        self.taps[sample * (self.max_delay + 1) + delay]
    }

    /// `r[k] = Σ_l h(k, l) x[(k − l) mod K]`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                actual: x.len(),
            });
        }
        let k = self.k;
        Ok((0..k)
            .map(|s| {
                let row = &self.taps[s * (self.max_delay + 1)..(s + 1) * (self.max_delay + 1)];
                row.iter()
                    .enumerate()
                    .map(|(l, h)| h * x[(s + k - l % k) % k])
                    .sum()
            })
            .collect())
    }

    pub fn to_dense(&self) -> Result<TimeChannelMatrix> {
        check_dense(self.k)?;
        let k = self.k;
        let mut h = CMat::zeros(k, k);
        for s in 0..k {
            for l in 0..=self.max_delay {
                h[(s, (s + k - l % k) % k)] += self.tap(s, l);
            }
        }
        Ok(TimeChannelMatrix(h))
    }
}

fn basis(q: i64, sample: usize, k: usize) -> Complex64 {
    let e = (q.rem_euclid(k as i64) as usize * sample) % k;
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / k as f64)
}

fn check_coeffs(spec: &ChannelSpec, c: &BemCoefficients) -> Result<()> {
    if c.len() != spec.num_taps() {
        return Err(Error::Dimension {
            expected: spec.num_taps(),
            actual: c.len(),
        });
    }
    Ok(())
}

/// Dense `H = Σ_q Σ_l c_{l,q} Λ_K^{(q)} P_K^l`.
pub fn build_time_channel(spec: &ChannelSpec, c: &BemCoefficients) -> Result<TimeChannelMatrix> {
    check_dense(spec.k())?;
    LtvChannel::from_bem(spec, c)?.to_dense()
}

/// Additive noise description for [`apply_channel`].
pub struct Noise<'a, R: Rng + ?Sized> {
    pub variance: f64,
    pub rng: &'a mut R,
}

/// `r = Hx + n` with `n ~ CN(0, σ²_n I)` when noise is given.
pub fn apply_channel<R: Rng + ?Sized>(
    channel: &LtvChannel,
    x: &[Complex64],
    noise: Option<Noise<'_, R>>,
) -> Result<Vec<Complex64>> {
    let mut r = channel.apply(x)?;
    if let Some(noise) = noise {
        for v in r.iter_mut() {
            *v += complex_gaussian(noise.rng, noise.variance);
        }
    }
    Ok(r)
}

/// Independent `CN(0, σ²_{c_{l,q}})` tap draws.
pub fn sample_taps<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> BemCoefficients {
    let values = spec
        .tap_variances()
        .iter()
        .map(|v| complex_gaussian(rng, *v))
        .collect();
    BemCoefficients::new(spec, values).expect("one draw per tap")
}

/// A single narrowband path on the integer delay-Doppler grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdPath {
    pub gain: Complex64,
    /// Delay in samples, `0..=L`.
    pub delay: usize,
    /// Doppler index, `-Q/2..=Q/2` (frequency `q/K` cycles per sample).
    pub doppler: i64,
}

impl DdPath {
    fn check(&self, spec: &ChannelSpec) -> Result<()> {
        let h = spec.half_doppler();
        if self.delay > spec.max_delay() || self.doppler < -h || self.doppler > h {
            return Err(Error::OffGrid(format!(
                "path (delay {}, doppler {}) outside L = {}, Q = {}",
                self.delay,
                self.doppler,
                spec.max_delay(),
                spec.doppler_order()
            )));
        }
        Ok(())
    }
}

/// Off-grid path with real-valued delay and Doppler. Only exists so that
/// fractional inputs can be rejected explicitly.
pub fn snap_path(gain: Complex64, delay: f64, doppler: f64) -> Result<DdPath> {
    let on_grid = |v: f64| (v - v.round()).abs() < 1e-9;
    if !on_grid(delay) || !on_grid(doppler) || delay < 0.0 {
        return Err(Error::OffGrid(format!(
            "delay {delay} / doppler {doppler} are not on the integer grid"
        )));
    }
    Ok(DdPath {
        gain,
        delay: delay.round() as usize,
        doppler: doppler.round() as i64,
    })
}

/// Maps paths onto CE-BEM coefficients: `c_{l,q} += h_p e^{−j2π(q/K)l}` for
/// every path with delay `l` and Doppler `q`.
pub fn paths_to_cebem(paths: &[DdPath], spec: &ChannelSpec) -> Result<BemCoefficients> {
    let k = spec.k() as f64;
    let mut c = BemCoefficients::zeros(spec);
    for p in paths {
        p.check(spec)?;
        let idx = spec.tap_index(p.delay, p.doppler)?;
        let phase = Complex64::from_polar(1.0, -2.0 * PI * p.doppler as f64 * p.delay as f64 / k);
        c.as_mut_slice()[idx] += p.gain * phase;
    }
    Ok(c)
}
