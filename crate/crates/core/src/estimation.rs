//! Pilot observation matrix, LMMSE tap estimation and channel MSE.
//!
//! With pilot grid `S_p`, the observations at the pilot footprint are
//! `y_p = Z c + w_p`, where column `(l, q)` of `Z` is
//! `vec(W_{l,q} ∘ (P_M^l S_p P_N^{−q}))` restricted to `Ψ_p`. A single nonzero
//! pilot behind adequate guards gives `Z^H Z = P_p I`, for which the LMMSE
//! error decouples per tap.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{sample_taps, LtvChannel};
use crate::dd::DdKernel;
use crate::error::{Error, Result};
use crate::linalg::{CMat, HpdFactor};
use crate::modem::Modem;
use crate::pilot::{Allocation, ReceiverFootprint};
use crate::stats::MeanEstimate;
use crate::types::{complex_gaussian, BemCoefficients, ChannelSpec, RngStream};

/// `Z ∈ C^{R_p × (L+1)(Q+1)}` with the row order of `Ψ_p`.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    z: CMat,
    rows: Vec<usize>,
}

impl ObservationMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.z
    }

    /// Vec indices of the observed cells.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        crate::linalg::matvec(&self.z, c)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            z: &self.z * faer::Scale(Complex64::new(factor, 0.0)),
            rows: self.rows.clone(),
        }
    }
}

fn check_alloc(alloc: &Allocation, spec: &ChannelSpec) -> Result<()> {
    if alloc.grid_dims() != (spec.m(), spec.n()) {
        return Err(Error::Dimension {
            expected: spec.k(),
            actual: alloc.grid_dims().0 * alloc.grid_dims().1,
        });
    }
    Ok(())
}

/// `Z` from shifted and masked pilot grids.
pub fn build_z(
    alloc: &Allocation,
    footprint: &ReceiverFootprint,
    spec: &ChannelSpec,
) -> Result<ObservationMatrix> {
    check_alloc(alloc, spec)?;
    let kernel = DdKernel::new(spec);
    build_z_with(&kernel, alloc, footprint)
}

pub(crate) fn build_z_with(
    kernel: &DdKernel,
    alloc: &Allocation,
    footprint: &ReceiverFootprint,
) -> Result<ObservationMatrix> {
    let rows = footprint.pilot_obs.clone();
    let taps = kernel.num_taps();
    let mut z = CMat::zeros(rows.len(), taps);
    for tap in 0..taps {
        for &(cell, v) in alloc.pilot_cells() {
            let (target, w) = kernel.image(tap, cell);
            if let Ok(r) = rows.binary_search(&target) {
                z[(r, tap)] += v * w;
            }
        }
    }
    debug_assert_eq!(z.ncols(), taps, "one Z column per (l, q) with l in 0..=L");
    Ok(ObservationMatrix { z, rows })
}

/// `Z` through the time domain: modulate `S_p`, apply `Λ_K^{(q)} P_K^l`,
/// demodulate, keep the `Ψ_p` rows.
pub fn build_z_matrix_chain(
    alloc: &Allocation,
    footprint: &ReceiverFootprint,
    spec: &ChannelSpec,
) -> Result<ObservationMatrix> {
    check_alloc(alloc, spec)?;
    let modem = Modem::new(spec.m(), spec.n());
    let x = modem.modulate(&alloc.pilot_grid())?;
    let rows = footprint.pilot_obs.clone();
    let mut z = CMat::zeros(rows.len(), spec.num_taps());
    for (tap, (l, q)) in spec.taps().enumerate() {
        let unit = BemCoefficients::unit(spec, l, q)?;
        let r = LtvChannel::from_bem(spec, &unit)?.apply(&x)?;
        let y = modem.demodulate(&r)?;
        for (i, &row) in rows.iter().enumerate() {
            z[(i, tap)] = y.as_slice()[row];
        }
    }
    Ok(ObservationMatrix { z, rows })
}

/// Diagonal and largest off-diagonal magnitude of `Z^H Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramDiagnostics {
    pub diagonal: Vec<f64>,
    pub max_offdiag: f64,
}

impl GramDiagnostics {
    /// True when `Z^H Z = p I` within `tol`.
    pub fn is_scaled_identity(&self, p: f64, tol: f64) -> bool {
        self.max_offdiag < tol && self.diagonal.iter().all(|d| (d - p).abs() < tol)
    }
}

pub fn gram_offdiag(z: &ObservationMatrix) -> GramDiagnostics {
    let g = z.z.adjoint() * &z.z;
    let t = g.nrows();
    let mut max_offdiag = 0.0f64;
    for j in 0..t {
        for i in 0..t {
            if i != j {
                max_offdiag = max_offdiag.max(g[(i, j)].norm());
            }
        }
    }
    GramDiagnostics {
        diagonal: (0..t).map(|i| g[(i, i)].re).collect(),
        max_offdiag,
    }
}

/// Gaussian prior on the taps, `c ~ CN(0, diag(σ²_c))`, and white noise `σ²_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TapPrior {
    variances: Vec<f64>,
    noise_variance: f64,
}

impl TapPrior {
    pub fn new(variances: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if variances
            .iter()
            .any(|v| v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidArgument(
                "prior variances must be positive".into(),
            ));
        }
        if noise_variance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidArgument(
                "noise variance must be positive".into(),
            ));
        }
        Ok(Self {
            variances,
            noise_variance,
        })
    }

    pub fn from_spec(spec: &ChannelSpec, noise_variance: f64) -> Result<Self> {
        Self::new(spec.tap_variances().to_vec(), noise_variance)
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

/// Factored LMMSE estimator `ĉ = (σ²_n R_c⁻¹ + Z^H Z)⁻¹ Z^H y_p`, reusable
/// across trials.
pub struct LmmseEstimator {
    factor: HpdFactor,
    zh: CMat,
}

impl LmmseEstimator {
    pub fn new(z: &ObservationMatrix, prior: &TapPrior) -> Result<Self> {
        let t = z.z.ncols();
        if prior.variances.len() != t {
            return Err(Error::Dimension {
                expected: t,
                actual: prior.variances.len(),
            });
        }
        let zh = z.z.adjoint().to_owned();
        let mut a = &zh * &z.z;
        for (i, v) in prior.variances.iter().enumerate() {
            a[(i, i)] += Complex64::new(prior.noise_variance / v, 0.0);
        }
        let factor = HpdFactor::new(&a)?;
        Ok(Self { factor, zh })
    }

    pub fn estimate(&self, y_p: &[Complex64]) -> Result<Vec<Complex64>> {
        if y_p.len() != self.zh.ncols() {
            return Err(Error::Dimension {
                expected: self.zh.ncols(),
                actual: y_p.len(),
            });
        }
        let rhs = crate::linalg::matvec(&self.zh, y_p);
        Ok(self.factor.solve(&rhs))
    }
}

pub fn lmmse_estimate(
    y_p: &[Complex64],
    z: &ObservationMatrix,
    prior: &TapPrior,
    spec: &ChannelSpec,
) -> Result<BemCoefficients> {
    let est = LmmseEstimator::new(z, prior)?.estimate(y_p)?;
    BemCoefficients::new(spec, est)
}

/// Channel MSE for a diagonal Gram `Z^H Z = P_p I`:
/// `Σ σ²_c σ²_n / (σ²_n + σ²_c P_p)`.
pub fn mse_closed_form(prior: &TapPrior, pilot_power: f64) -> f64 {
    let s2n = prior.noise_variance;
    prior
        .variances
        .iter()
        .map(|s2c| s2c * s2n / (s2n + s2c * pilot_power))
        .sum()
}

/// `tr((R_c⁻¹ + Z^H Z / σ²_n)⁻¹)` for any `Z`.
pub fn mse_general(z: &ObservationMatrix, prior: &TapPrior) -> Result<f64> {
    let t = z.z.ncols();
    if prior.variances.len() != t {
        return Err(Error::Dimension {
            expected: t,
            actual: prior.variances.len(),
        });
    }
    let mut a = z.z.adjoint() * &z.z * faer::Scale(Complex64::new(1.0 / prior.noise_variance, 0.0));
    for (i, v) in prior.variances.iter().enumerate() {
        a[(i, i)] += Complex64::new(1.0 / v, 0.0);
    }
    Ok(HpdFactor::new(&a)?.inverse_trace())
}

/// Monte Carlo LMMSE error `E‖c − ĉ‖²` with observations `y_p = Zc + w_p`.
pub fn empirical_mse(
    alloc: &Allocation,
    footprint: &ReceiverFootprint,
    spec: &ChannelSpec,
    noise_variance: f64,
    trials: usize,
    stream: RngStream,
) -> Result<MeanEstimate> {
    let z = build_z(alloc, footprint, spec)?;
    let prior = TapPrior::from_spec(spec, noise_variance)?;
    let est = LmmseEstimator::new(&z, &prior)?;
    let samples = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.trial(t as u64).rng();
            let c = sample_taps(spec, &mut rng);
            let mut y = z.apply(c.as_slice());
            for v in y.iter_mut() {
                *v += complex_gaussian(&mut rng, noise_variance);
            }
            let c_hat = est.estimate(&y)?;
            Ok(c.as_slice()
                .iter()
                .zip(&c_hat)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeanEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::zero;
    use crate::pilot::{make_allocation, receiver_footprints, AllocationKind};

    fn zeros(len: usize) -> Vec<Complex64> {
        vec![zero(); len]
    }

    fn setup(
        kind: AllocationKind,
        n: usize,
        m: usize,
        l: usize,
        q: usize,
        p_p: f64,
    ) -> (ChannelSpec, Allocation, ReceiverFootprint) {
        let spec = ChannelSpec::uniform(n, m, l, q).unwrap();
        let alloc = make_allocation(kind, &spec, p_p, None).unwrap();
        let fp = receiver_footprints(&alloc, &spec).unwrap();
        (spec, alloc, fp)
    }

    #[test]
    fn single_tap_z_has_pilot_energy() {
        let (spec, alloc, fp) = setup(AllocationKind::Island, 4, 5, 0, 0, 2.5);
        let z = build_z(&alloc, &fp, &spec).unwrap();
        assert_eq!((z.matrix().nrows(), z.matrix().ncols()), (1, 1));
        assert!((z.matrix()[(0, 0)].norm_sqr() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn island_gram_is_pilot_power_identity() {
        let (spec, alloc, fp) = setup(AllocationKind::Island, 21, 21, 2, 2, 0.7);
        let z = build_z(&alloc, &fp, &spec).unwrap();
        let g = gram_offdiag(&z);
        assert_eq!(g.diagonal.len(), 9);
        assert!(g.is_scaled_identity(0.7, 1e-10), "{g:?}");
    }

    #[test]
    fn fast_path_matches_matrix_chain() {
        for (kind, n, m) in [
            (AllocationKind::Island, 21, 21),
            (AllocationKind::DopplerSlab, 3, 147),
            (AllocationKind::DelaySlab, 147, 3),
        ] {
            let (spec, alloc, fp) = setup(kind, n, m, 2, 2, 1.3);
            let alloc = alloc.with_pilot_phase(0.4);
            let fast = build_z(&alloc, &fp, &spec).unwrap();
            let chain = build_z_matrix_chain(&alloc, &fp, &spec).unwrap();
            let err = crate::linalg::max_abs_diff(fast.matrix(), chain.matrix());
            assert!(err < 1e-12, "{kind}: {err}");
        }
    }

    #[test]
    fn two_pilots_break_diagonality() {
        let spec = ChannelSpec::uniform(21, 21, 2, 2).unwrap();
        // Second pilot one delay bin below the first inside the same guard box.
        let region: Vec<(usize, usize)> = (6..=14)
            .flat_map(|m| (6..=14).map(move |n| (m, n)))
            .collect();
        let v = Complex64::new(0.5f64.sqrt(), 0.0);
        let alloc = Allocation::custom(&spec, &region, &[((10, 10), v), ((11, 10), v)]).unwrap();
        let fp = receiver_footprints(&alloc, &spec).unwrap();
        let z = build_z(&alloc, &fp, &spec).unwrap();
        let g = gram_offdiag(&z);
        assert!(g.max_offdiag > 0.1, "{g:?}");

        let prior = TapPrior::from_spec(&spec, 0.01).unwrap();
        let general = mse_general(&z, &prior).unwrap();
        assert!(general > mse_closed_form(&prior, 1.0));
    }

    #[test]
    fn gram_of_zero_and_scaling() {
        let (spec, alloc, fp) = setup(AllocationKind::Island, 21, 21, 2, 2, 1.0);
        let z = build_z(&alloc, &fp, &spec).unwrap();
        let zero_z = z.scaled(0.0);
        let g0 = gram_offdiag(&zero_z);
        assert!(g0.diagonal.iter().all(|d| *d == 0.0) && g0.max_offdiag == 0.0);
        let g1 = gram_offdiag(&z);
        let g2 = gram_offdiag(&z.scaled(2f64.sqrt()));
        for (a, b) in g1.diagonal.iter().zip(&g2.diagonal) {
            assert!((b / a - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lmmse_limits() {
        let (spec, alloc, fp) = setup(AllocationKind::Island, 21, 21, 2, 2, 1.0);
        let z = build_z(&alloc, &fp, &spec).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let c = sample_taps(&spec, &mut rng);
        let prior = TapPrior::from_spec(&spec, 1e-12).unwrap();
        let c_hat = lmmse_estimate(&z.apply(c.as_slice()), &z, &prior, &spec).unwrap();
        for (a, b) in c.as_slice().iter().zip(c_hat.as_slice()) {
            assert!((a - b).norm() < 1e-6);
        }
        let prior = TapPrior::from_spec(&spec, 0.1).unwrap();
        let zero_est = lmmse_estimate(&zeros(z.rows().len()), &z, &prior, &spec).unwrap();
        assert!(zero_est.as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn closed_form_values_and_limits() {
        let prior = TapPrior::new(vec![1.0; 9], 1.0).unwrap();
        assert!((mse_closed_form(&prior, 1.0) - 4.5).abs() < 1e-15);
        assert!(mse_closed_form(&prior, 1e15) < 1e-12);
        assert!((mse_closed_form(&prior, 0.0) - 9.0).abs() < 1e-15);
        let prior = TapPrior::new(vec![0.5, 0.25, 2.0], 0.3).unwrap();
        let mut last = f64::INFINITY;
        for p in [0.0, 0.1, 1.0, 10.0] {
            let v = mse_closed_form(&prior, p);
            assert!(v < last);
            last = v;
        }
        assert!(TapPrior::new(vec![1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn general_equals_closed_form_for_compliant_allocations() {
        let (spec, alloc, fp) = setup(AllocationKind::DopplerSlab, 3, 147, 2, 2, 0.8);
        let z = build_z(&alloc, &fp, &spec).unwrap();
        let prior = TapPrior::from_spec(&spec, 0.05).unwrap();
        let a = mse_general(&z, &prior).unwrap();
        let b = mse_closed_form(&prior, 0.8);
        assert!((a - b).abs() < 1e-10);
        let zero_z = z.scaled(0.0);
        let total: f64 = spec.tap_variances().iter().sum();
        assert!((mse_general(&zero_z, &prior).unwrap() - total).abs() < 1e-12);
    }

    #[test]
    fn empirical_mse_tracks_closed_form() {
        let (spec, alloc, fp) = setup(AllocationKind::Island, 21, 21, 2, 2, 0.5);
        let s2n = 0.02;
        let est = empirical_mse(&alloc, &fp, &spec, s2n, 2000, RngStream::new(8, 0)).unwrap();
        let prior = TapPrior::from_spec(&spec, s2n).unwrap();
        let cf = mse_closed_form(&prior, 0.5);
        assert!((est.mean / cf - 1.0).abs() < 0.05, "{} vs {cf}", est.mean);
    }
}
