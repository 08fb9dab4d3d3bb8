//! Delay-Doppler input-output relation.
//!
//! In the DD domain each CE-BEM tap `(l, q)` circularly shifts the grid by `l`
//! delay rows and `q` Doppler columns, then multiplies by a unit-modulus mask
//! `W_{l,q}`:
//!
//! ```text
//! Y = Σ_q Σ_l c_{l,q} W_{l,q} ∘ (P_M^l S P_N^{−q})
//! [W_{l,q}]_{m,n} = e^{j2πqm/K}                      m ≥ l
//!                 = e^{j2πqm/K} e^{−j2π(n−q)/N}      m < l
//! ```
//!
//! The second branch is the phase picked up by samples that wrap from one
//! time block into the next.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{zero, CMat};
use crate::types::{BemCoefficients, ChannelSpec, DdGrid, DENSE_LIMIT};

/// Unit-modulus `M×N` mask `W_{l,q}`, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl PhaseMask {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row + col * self.m]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }
}

fn mask_entry(m: usize, n: usize, l: usize, q: i64, row: usize, col: usize) -> Complex64 {
    let k = (m * n) as f64;
    let mut phase = 2.0 * PI * q as f64 * row as f64 / k;
    if row < l {
        phase -= 2.0 * PI * (col as i64 - q) as f64 / n as f64;
    }
    Complex64::from_polar(1.0, phase)
}

pub fn build_phase_mask(l: usize, q: i64, spec: &ChannelSpec) -> Result<PhaseMask> {
    spec.tap_index(l, q)?;
    let (m, n) = (spec.m(), spec.n());
    let mut data = Vec::with_capacity(m * n);
    for col in 0..n {
        for row in 0..m {
            data.push(mask_entry(m, n, l, q, row, col));
        }
    }
    Ok(PhaseMask { m, n, data })
}

/// Where tap `(l, q)` sends grid cell `(m, n)`.
pub fn dd_support(l: usize, q: i64, cell: (usize, usize), spec: &ChannelSpec) -> (usize, usize) {
    let (m, n) = (spec.m(), spec.n());
    (
        (cell.0 + l) % m,
        (cell.1 as i64 + q).rem_euclid(n as i64) as usize,
    )
}

/// Precomputed shifts and masks for every tap of a spec.
///
/// `image(tap, cell)` gives the vec index a transmitted cell lands on and the
/// mask phase applied there; the DD channel matrix has exactly one such entry
/// per (tap, column), which is what makes sparse accumulation cheap.
#[derive(Debug, Clone)]
pub struct DdKernel {
    m: usize,
    n: usize,
    taps: Vec<(usize, i64)>,
    masks: Vec<PhaseMask>,
}

impl DdKernel {
    pub fn new(spec: &ChannelSpec) -> Self {
        let taps: Vec<_> = spec.taps().collect();
        let masks = taps
            .iter()
            .map(|&(l, q)| build_phase_mask(l, q, spec).expect("canonical taps are in range"))
            .collect();
        Self {
            m: spec.m(),
            n: spec.n(),
            taps,
            masks,
        }
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }

    pub fn tap(&self, idx: usize) -> (usize, i64) {
        self.taps[idx]
    }

    #[inline]
    pub fn target(&self, tap: usize, cell: usize) -> usize {
        let (l, q) = self.taps[tap];
        let (row, col) = (cell % self.m, cell / self.m);
        let r = (row + l) % self.m;
        let c = (col as i64 + q).rem_euclid(self.n as i64) as usize;
        r + c * self.m
    }

    #[inline]
    pub fn image(&self, tap: usize, cell: usize) -> (usize, Complex64) {
        let target = self.target(tap, cell);
        (target, self.masks[tap].data[target])
    }

    /// Noiseless DD response for coefficient slice `c` (canonical order).
    pub fn response(&self, s: &DdGrid, c: &[Complex64]) -> Result<DdGrid> {
        if s.rows() != self.m || s.cols() != self.n {
            return Err(Error::Dimension {
                expected: self.m * self.n,
                actual: s.rows() * s.cols(),
            });
        }
        if c.len() != self.taps.len() {
            return Err(Error::Dimension {
                expected: self.taps.len(),
                actual: c.len(),
            });
        }
        let mut y = DdGrid::zeros(self.m, self.n);
        let out = y.as_mut_slice();
        for (cell, sv) in s.as_slice().iter().enumerate() {
            if *sv == zero() {
                continue;
            }
            for (tap, cv) in c.iter().enumerate() {
                let (target, w) = self.image(tap, cell);
                out[target] += cv * w * sv;
            }
        }
        Ok(y)
    }
}

/// `Y = Σ Σ c_{l,q} W_{l,q} ∘ (P_M^l S P_N^{−q})`.
pub fn dd_response(s: &DdGrid, c: &BemCoefficients, spec: &ChannelSpec) -> Result<DdGrid> {
    s.check_dims(spec)?;
    DdKernel::new(spec).response(s, c.as_slice())
}

/// Dense `H_DD = (F_N ⊗ I_M) H (F_N^H ⊗ I_M)`.
#[derive(Debug, Clone)]
pub struct DdChannelMatrix(pub CMat);

impl DdChannelMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

pub fn build_dd_channel(c: &BemCoefficients, spec: &ChannelSpec) -> Result<DdChannelMatrix> {
    build_dd_channel_with(&DdKernel::new(spec), c.as_slice())
}

pub fn build_dd_channel_with(kernel: &DdKernel, c: &[Complex64]) -> Result<DdChannelMatrix> {
    let k = kernel.frame_len();
    if k > DENSE_LIMIT {
        return Err(Error::TooLarge {
            k,
            limit: DENSE_LIMIT,
        });
    }
    if c.len() != kernel.num_taps() {
        return Err(Error::Dimension {
            expected: kernel.num_taps(),
            actual: c.len(),
        });
    }
    let mut h = CMat::zeros(k, k);
    for col in 0..k {
        for (tap, cv) in c.iter().enumerate() {
            let (row, w) = kernel.image(tap, col);
            h[(row, col)] += cv * w;
        }
    }
    Ok(DdChannelMatrix(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_time_channel, sample_taps};
    use crate::linalg::{frobenius, identity, max_abs_diff};
    use crate::modem::Modem;
    use crate::types::{complex_gaussian, vec, vec_inv, RngStream};

    fn spec_18() -> ChannelSpec {
        ChannelSpec::uniform(3, 6, 2, 2).unwrap()
    }

    #[test]
    fn mask_zero_tap_is_all_ones() {
        let w = build_phase_mask(0, 0, &spec_18()).unwrap();
        assert!(w
            .as_slice()
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn mask_without_delay_has_column_pattern() {
        let spec = spec_18();
        let w = build_phase_mask(0, 1, &spec).unwrap();
        for col in 0..3 {
            for row in 0..6 {
                let want = Complex64::from_polar(1.0, 2.0 * PI * row as f64 / 18.0);
                assert!((w.get(row, col) - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mask_wrap_branch() {
        let spec = spec_18();
        let w = build_phase_mask(2, 1, &spec).unwrap();
        for col in 0..3 {
            for row in 0..6 {
                let mut want = Complex64::from_polar(1.0, 2.0 * PI * row as f64 / 18.0);
                if row < 2 {
                    want *= Complex64::from_polar(1.0, -2.0 * PI * (col as f64 - 1.0) / 3.0);
                }
                assert!((w.get(row, col) - want).norm() < 1e-14);
                assert!((w.get(row, col).norm() - 1.0).abs() < 1e-15);
            }
        }
        assert!(build_phase_mask(3, 0, &spec).is_err());
        assert!(build_phase_mask(0, -2, &spec).is_err());
    }

    #[test]
    fn identity_channel_response() {
        let spec = spec_18();
        let mut rng = RngStream::new(1, 0).rng();
        let s = DdGrid::from_fn(6, 3, |_, _| complex_gaussian(&mut rng, 1.0));
        let y = dd_response(&s, &BemCoefficients::unit(&spec, 0, 0).unwrap(), &spec).unwrap();
        assert_eq!(y, s);
    }

    #[test]
    fn impulse_is_shifted() {
        let spec = spec_18();
        for (l, q) in spec.taps().collect::<Vec<_>>() {
            let mut s = DdGrid::zeros(6, 3);
            s[(4, 2)] = Complex64::new(1.0, 0.0);
            let y = dd_response(&s, &BemCoefficients::unit(&spec, l, q).unwrap(), &spec).unwrap();
            let (m2, n2) = dd_support(l, q, (4, 2), &spec);
            for col in 0..3 {
                for row in 0..6 {
                    let v = y[(row, col)];
                    if (row, col) == (m2, n2) {
                        assert!((v.norm() - 1.0).abs() < 1e-14);
                    } else {
                        assert_eq!(v.norm(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn response_matches_time_domain_pipeline() {
        let spec = spec_18();
        let modem = Modem::new(6, 3);
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..20 {
            let c = sample_taps(&spec, &mut rng);
            let s = DdGrid::from_fn(6, 3, |_, _| complex_gaussian(&mut rng, 1.0));
            let h = build_time_channel(&spec, &c).unwrap();
            let x = modem.modulate(&s).unwrap();
            let r = crate::linalg::matvec(h.matrix(), &x);
            let oracle = modem.demodulate(&r).unwrap();
            let y = dd_response(&s, &c, &spec).unwrap();
            let err = vec(&y)
                .iter()
                .zip(oracle.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10 * oracle.frobenius_sq().sqrt(), "{err}");
        }
    }

    #[test]
    fn dense_dd_channel_columns_and_norm() {
        let spec = spec_18();
        let id = build_dd_channel(&BemCoefficients::unit(&spec, 0, 0).unwrap(), &spec).unwrap();
        assert!(max_abs_diff(id.matrix(), &identity(18)) < 1e-15);

        let mut rng = RngStream::new(3, 0).rng();
        let c = sample_taps(&spec, &mut rng);
        let hdd = build_dd_channel(&c, &spec).unwrap();
        for k in 0..18 {
            let mut e = vec![zero(); 18];
            e[k] = Complex64::new(1.0, 0.0);
            let col = dd_response(&vec_inv(&e, 6, 3).unwrap(), &c, &spec).unwrap();
            for (row, v) in col.as_slice().iter().enumerate() {
                assert!((hdd.matrix()[(row, k)] - v).norm() < 1e-14);
            }
        }
        let h = build_time_channel(&spec, &c).unwrap();
        assert!((frobenius(hdd.matrix()) - frobenius(h.matrix())).abs() < 1e-10);
    }

    #[test]
    fn support_wraps_and_footprint_size() {
        let spec = ChannelSpec::uniform(5, 7, 3, 2).unwrap();
        assert_eq!(dd_support(0, 0, (2, 3), &spec), (2, 3));
        assert_eq!(dd_support(1, 0, (6, 0), &spec), (0, 0));
        assert_eq!(dd_support(0, -1, (0, 0), &spec), (0, 4));
        let mut cells: Vec<_> = spec
            .taps()
            .map(|(l, q)| dd_support(l, q, (5, 1), &spec))
            .collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), spec.num_taps());
    }
}
