//! End-to-end uncoded QPSK link: mapping, the full modulate/channel/
//! demodulate chain, pilot-based tap estimation, MMSE equalization and
//! bit error counting.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{CommBlock, CsiMode};
use crate::channel::{sample_taps, LtvChannel};
use crate::dd::DdKernel;
use crate::error::{Error, Result};
use crate::estimation::{build_z_with, LmmseEstimator, TapPrior};
use crate::linalg::{matvec, CMat, HpdFactor};
use crate::modem::Modem;
use crate::pilot::{receiver_footprints, Allocation, ReceiverFootprint};
use crate::stats::wilson_interval;
use crate::types::{complex_gaussian, ChannelSpec, DdGrid, PowerBudget, RngStream};

/// Gray QPSK: the first bit picks the sign of the imaginary part, the second
/// the sign of the real part, so 00, 01, 11, 10 walk the quadrants in order.
pub fn qpsk_map(bits: &[u8], symbol_power: f64) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "QPSK needs an even number of bits (got {})",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidArgument(format!(
            "bit values must be 0 or 1 (got {b})"
        )));
    }
    let a = (symbol_power / 2.0).sqrt();
    let sign = |b: u8| if b == 0 { a } else { -a };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex64::new(sign(p[1]), sign(p[0])))
        .collect())
}

/// Hard decisions for [`qpsk_map`].
pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.im < 0.0), u8::from(s.re < 0.0)])
        .collect()
}

/// `ŝ_c = (Ĥ_c^H Ĥ_c + (σ²_n/E_s) I)⁻¹ Ĥ_c^H y_c`.
pub fn mmse_equalize(
    y_c: &[Complex64],
    h_c: &CMat,
    noise_variance: f64,
    symbol_power: f64,
) -> Result<Vec<Complex64>> {
    if y_c.len() != h_c.nrows() {
        return Err(Error::Dimension {
            expected: h_c.nrows(),
            actual: y_c.len(),
        });
    }
    if symbol_power <= 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); h_c.ncols()]);
    }
    let hh = h_c.adjoint().to_owned();
    let mut a = &hh * h_c;
    let reg = Complex64::new(noise_variance / symbol_power, 0.0);
    for i in 0..a.nrows() {
        a[(i, i)] += reg;
    }
    Ok(HpdFactor::new(&a)?.solve(&matvec(&hh, y_c)))
}

/// Bit error count with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerEstimate {
    pub fn from_counts(errors: u64, bits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, bits, 1.96);
        Self {
            errors,
            bits,
            ber: if bits == 0 {
                f64::NAN
            } else {
                errors as f64 / bits as f64
            },
            ci_low,
            ci_high,
        }
    }

    /// Wilson interval at `z` standard deviations.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.errors, self.bits, z)
    }
}

/// Reusable transmitter/receiver for one allocation and power budget.
pub struct LinkSimulator {
    spec: ChannelSpec,
    alloc: Allocation,
    footprint: ReceiverFootprint,
    modem: Modem,
    estimator: LmmseEstimator,
    block: CommBlock,
    budget: PowerBudget,
}

impl LinkSimulator {
    pub fn new(spec: &ChannelSpec, alloc: &Allocation, budget: &PowerBudget) -> Result<Self> {
        let alloc = alloc.clone().with_pilot_power(budget.pilot_power());
        let footprint = receiver_footprints(&alloc, spec)?;
        let kernel = DdKernel::new(spec);
        let z = build_z_with(&kernel, &alloc, &footprint)?;
        let estimator =
            LmmseEstimator::new(&z, &TapPrior::from_spec(spec, budget.noise_variance())?)?;
        Ok(Self {
            spec: spec.clone(),
            block: CommBlock::new(spec, &alloc, &footprint),
            modem: Modem::new(spec.m(), spec.n()),
            alloc,
            footprint,
            estimator,
            budget: *budget,
        })
    }

    pub fn symbol_power(&self) -> f64 {
        let kc = self.alloc.k_c();
        if kc == 0 {
            0.0
        } else {
            self.budget.comm_power() / kc as f64
        }
    }

    pub fn bits_per_frame(&self) -> usize {
        2 * self.alloc.k_c()
    }

    /// Frame grid with data in the data cells (vec order) and the pilot.
    pub fn frame(&self, symbols: &[Complex64]) -> Result<DdGrid> {
        if symbols.len() != self.alloc.k_c() {
            return Err(Error::Dimension {
                expected: self.alloc.k_c(),
                actual: symbols.len(),
            });
        }
        let mut grid = self.alloc.pilot_grid();
        let data = grid.as_mut_slice();
        for (&cell, &s) in self.alloc.comm_cells().iter().zip(symbols) {
            data[cell] = s;
        }
        Ok(grid)
    }

    /// One frame through the full chain; returns `(bit errors, bits)`.
    pub fn trial(&self, stream: RngStream, csi: CsiMode) -> Result<(u64, u64)> {
        let mut rng = stream.rng();
        let c = sample_taps(&self.spec, &mut rng).into_inner();
        let bits: Vec<u8> = (0..self.bits_per_frame())
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let es = self.symbol_power();
        let s_c = qpsk_map(&bits, es)?;

        let x = self.modem.modulate(&self.frame(&s_c)?)?;
        let channel = LtvChannel::from_bem(
            &self.spec,
            &crate::types::BemCoefficients::new(&self.spec, c.clone())?,
        )?;
        let mut r = channel.apply(&x)?;
        let sn = self.budget.noise_variance().sqrt();
        for v in r.iter_mut() {
            *v += complex_gaussian(&mut rng, 1.0) * sn;
        }
        let y = self.modem.demodulate(&r)?;
        let y = y.as_slice();

        let taps = match csi {
            CsiMode::Estimated => {
                let y_p: Vec<Complex64> = self.footprint.pilot_obs.iter().map(|&i| y[i]).collect();
                self.estimator.estimate(&y_p)?
            }
            CsiMode::Perfect => c,
        };
        let y_c: Vec<Complex64> = self.footprint.comm_obs.iter().map(|&i| y[i]).collect();
        let s_hat = mmse_equalize(
            &y_c,
            &self.block.dense(&taps),
            self.budget.noise_variance(),
            es,
        )?;
        let errors = qpsk_demap(&s_hat)
            .iter()
            .zip(&bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok((errors, bits.len() as u64))
    }

    pub fn run(&self, trials: usize, stream: RngStream, csi: CsiMode) -> Result<BerEstimate> {
        let counts = (0..trials)
            .into_par_iter()
            .map(|t| self.trial(stream.trial(t as u64), csi))
            .collect::<Result<Vec<_>>>()?;
        let (errors, bits) = counts
            .iter()
            .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
        Ok(BerEstimate::from_counts(errors, bits))
    }
}

/// Monte Carlo BER of the full link.
pub fn ber_run(
    spec: &ChannelSpec,
    alloc: &Allocation,
    budget: &PowerBudget,
    trials: usize,
    stream: RngStream,
    csi: CsiMode,
) -> Result<BerEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    LinkSimulator::new(spec, alloc, budget)?.run(trials, stream, csi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilot::{make_allocation, AllocationKind};

    #[test]
    fn gray_constellation() {
        let s = qpsk_map(&[0, 0, 0, 1, 1, 1, 1, 0], 2.0).unwrap();
        let want = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        for (got, (re, im)) in s.iter().zip(want) {
            assert!((got - Complex64::new(re, im)).norm() < 1e-15);
        }
        // Neighboring quadrants differ in one bit.
        let bits = qpsk_demap(&s);
        for k in 0..4 {
            let a = &bits[2 * k..2 * k + 2];
            let b = &bits[2 * ((k + 1) % 4)..2 * ((k + 1) % 4) + 2];
            assert_eq!(a.iter().zip(b).filter(|(x, y)| x != y).count(), 1);
        }
        assert!(qpsk_map(&[0, 1, 1], 1.0).is_err());
        assert!(qpsk_map(&[0, 2], 1.0).is_err());
    }

    #[test]
    fn qpsk_round_trip_and_perturbation() {
        let mut rng = RngStream::new(1, 0).rng();
        let bits: Vec<u8> = (0..10_000)
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let p = 0.37;
        let s = qpsk_map(&bits, p).unwrap();
        assert!(s.iter().all(|v| (v.norm_sqr() - p).abs() < 1e-12));
        assert_eq!(qpsk_demap(&s), bits);
        let half = (p / 2.0).sqrt() * 0.99;
        let noisy: Vec<Complex64> = s
            .iter()
            .map(|v| {
                v + Complex64::from_polar(
                    half * rng.random::<f64>(),
                    rng.random::<f64>() * std::f64::consts::TAU,
                )
            })
            .collect();
        assert_eq!(qpsk_demap(&noisy), bits);
    }

    #[test]
    fn equalizer_limits() {
        let mut rng = RngStream::new(2, 0).rng();
        let h = CMat::from_fn(6, 6, |i, j| {
            complex_gaussian(&mut rng, 1.0)
                + if i == j {
                    Complex64::new(3.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
        });
        let s: Vec<Complex64> = (0..6).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y = matvec(&h, &s);
        let s_hat = mmse_equalize(&y, &h, 1e-14, 1.0).unwrap();
        for (a, b) in s.iter().zip(&s_hat) {
            assert!((a - b).norm() < 1e-6);
        }
        let zero = mmse_equalize(&[Complex64::new(0.0, 0.0); 6], &h, 0.1, 1.0).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn noiseless_link_is_error_free() {
        let spec = ChannelSpec::uniform(21, 21, 2, 2).unwrap();
        let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, None).unwrap();
        let budget = PowerBudget::new(1.0, 0.7, 1e-12).unwrap();
        let est = ber_run(
            &spec,
            &alloc,
            &budget,
            5,
            RngStream::new(3, 0),
            CsiMode::Estimated,
        )
        .unwrap();
        assert_eq!(est.errors, 0, "{est:?}");
    }

    #[test]
    fn perfect_csi_beats_estimated() {
        let spec = ChannelSpec::uniform(21, 21, 6, 6).unwrap();
        let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, None).unwrap();
        let budget = PowerBudget::from_snr_tx_db(15.0, spec.k(), 0.97).unwrap();
        let s = RngStream::new(4, 0);
        let est = ber_run(&spec, &alloc, &budget, 60, s, CsiMode::Estimated).unwrap();
        let genie = ber_run(&spec, &alloc, &budget, 60, s, CsiMode::Perfect).unwrap();
        assert!(genie.ber < est.ber, "{genie:?} vs {est:?}");
    }

    #[test]
    fn trials_are_deterministic() {
        let spec = ChannelSpec::uniform(9, 7, 2, 2).unwrap();
        let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, None).unwrap();
        let budget = PowerBudget::from_snr_tx_db(10.0, spec.k(), 0.6).unwrap();
        let sim = LinkSimulator::new(&spec, &alloc, &budget).unwrap();
        let s = RngStream::new(11, 4);
        assert_eq!(
            sim.trial(s, CsiMode::Estimated).unwrap(),
            sim.trial(s, CsiMode::Estimated).unwrap()
        );
    }
}
