//! Capacity lower bound with imperfect CSI and the pilot/data power split.
//!
//! With LMMSE taps `ĉ`, the data block sees `y_c = Ĥ_c s_c + v`, where the
//! estimation error is folded into the noise `v`. Bounding `R_v` by a scaled
//! identity gives
//!
//! ```text
//! C̲ = (1/K) E[log det(I + ρ Ĥ'_c Ĥ'_c^H)],
//! ρ = (P_c R_c / K_c) [(P_c/K_c)·MSE + σ²_n]⁻¹ Σ σ²_ĉ,
//! ```
//!
//! with `Ĥ'_c = Ĥ_c / √(R_c Σ σ²_ĉ)`. Only `ρ` depends on the split `α`, so
//! `α* = argmax ρ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::sample_taps;
use crate::dd::DdKernel;
use crate::error::{Error, Result};
use crate::estimation::{build_z_with, LmmseEstimator, ObservationMatrix, TapPrior};
use crate::linalg::{hermitian_max_eigenvalue, CMat, HpdFactor};
use crate::pilot::{receiver_footprints, Allocation, ReceiverFootprint};
use crate::stats::MeanEstimate;
use crate::types::{complex_gaussian, linear_to_db, ChannelSpec, PowerBudget, RngStream};

/// `P_p σ⁴_c / (σ²_n + σ²_c P_p)`: variance of one LMMSE tap estimate.
pub fn sigma2_chat(sigma2_c: f64, noise_variance: f64, pilot_power: f64) -> f64 {
    if pilot_power == 0.0 {
        return 0.0;
    }
    if pilot_power.is_infinite() {
        return sigma2_c;
    }
    pilot_power * sigma2_c * sigma2_c / (noise_variance + sigma2_c * pilot_power)
}

/// Frame size and data-block dimensions of an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AllocGeometry {
    pub k: usize,
    pub k_c: usize,
    pub r_c: usize,
}

impl AllocGeometry {
    pub fn new(alloc: &Allocation, footprint: &ReceiverFootprint) -> Self {
        let (m, n) = alloc.grid_dims();
        Self {
            k: m * n,
            k_c: alloc.k_c(),
            r_c: footprint.r_c(),
        }
    }

    pub fn of(alloc: &Allocation, spec: &ChannelSpec) -> Result<Self> {
        Ok(Self::new(alloc, &receiver_footprints(alloc, spec)?))
    }
}

/// Constituents of `ρ` at one power split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoInputs {
    pub comm_power: f64,
    pub pilot_power: f64,
    pub k_c: usize,
    pub r_c: usize,
    pub noise_variance: f64,
    pub tap_variances: Vec<f64>,
    pub sigma2_chat: Vec<f64>,
}

impl RhoInputs {
    pub fn new(
        alpha: f64,
        budget: &PowerBudget,
        spec: &ChannelSpec,
        geom: AllocGeometry,
    ) -> Result<Self> {
        let b = budget.with_alpha(alpha)?;
        let s2n = b.noise_variance();
        let p_p = b.pilot_power();
        Ok(Self {
            comm_power: b.comm_power(),
            pilot_power: p_p,
            k_c: geom.k_c,
            r_c: geom.r_c,
            noise_variance: s2n,
            tap_variances: spec.tap_variances().to_vec(),
            sigma2_chat: spec
                .tap_variances()
                .iter()
                .map(|&s| sigma2_chat(s, s2n, p_p))
                .collect(),
        })
    }

    /// `Σ σ²_c σ²_n / (σ²_n + σ²_c P_p)`.
    pub fn channel_mse(&self) -> f64 {
        let s2n = self.noise_variance;
        self.tap_variances
            .iter()
            .map(|s| s * s2n / (s2n + s * self.pilot_power))
            .sum()
    }

    pub fn sum_sigma2_chat(&self) -> f64 {
        self.sigma2_chat.iter().sum()
    }

    pub fn rho(&self) -> f64 {
        if self.k_c == 0 {
            return 0.0;
        }
        let per_symbol = self.comm_power / self.k_c as f64;
        let noise = per_symbol * self.channel_mse() + self.noise_variance;
        per_symbol * self.r_c as f64 / noise * self.sum_sigma2_chat()
    }
}

/// Effective SNR `ρ(α)`; `α` overrides the budget's own split.
pub fn rho(
    alpha: f64,
    budget: &PowerBudget,
    spec: &ChannelSpec,
    geom: AllocGeometry,
) -> Result<f64> {
    Ok(RhoInputs::new(alpha, budget, spec, geom)?.rho())
}

/// Maximizer of `ρ` with pre-scan diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub rho: f64,
    /// Best point of the 101-point pre-scan.
    pub grid_alpha: f64,
    /// Interior local maxima seen on the pre-scan; 1 for a unimodal `ρ`.
    pub grid_local_maxima: usize,
}

impl AlphaOptimum {
    pub fn is_unimodal(&self) -> bool {
        self.grid_local_maxima == 1 && (self.alpha - self.grid_alpha).abs() <= 0.01 + 1e-12
    }
}

const GOLDEN_LO: f64 = 1e-4;
const GOLDEN_HI: f64 = 1.0 - 1e-4;
const GOLDEN_TOL: f64 = 1e-5;

/// `α* = argmax ρ(α)` by golden-section search on `[1e−4, 1−1e−4]`.
pub fn optimize_alpha(
    budget: &PowerBudget,
    spec: &ChannelSpec,
    geom: AllocGeometry,
) -> Result<AlphaOptimum> {
    let f = |a: f64| rho(a, budget, spec, geom);

    let grid: Vec<f64> = (0..=100)
        .map(|i| f(i as f64 / 100.0))
        .collect::<Result<_>>()?;
    let grid_best = (0..grid.len())
        .max_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .unwrap_or(0);
    let grid_local_maxima = (1..grid.len() - 1)
        .filter(|&i| grid[i] > grid[i - 1] && grid[i] >= grid[i + 1])
        .count();

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (GOLDEN_LO, GOLDEN_HI);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > GOLDEN_TOL {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    let alpha = 0.5 * (a + b);
    Ok(AlphaOptimum {
        alpha,
        rho: f(alpha)?,
        grid_alpha: grid_best as f64 / 100.0,
        grid_local_maxima,
    })
}

/// `SNR_tx = SNR_p/K + (K_c/K)·SNR_c`, returned as `(linear, dB)`.
pub fn snr_tx_from_symbol_snrs(snr_p: f64, snr_c: f64, k: usize, k_c: usize) -> (f64, f64) {
    let lin = snr_p / k as f64 + k_c as f64 / k as f64 * snr_c;
    (lin, linear_to_db(lin))
}

/// `α = K_c SNR_c / (K_c SNR_c + SNR_p)`.
pub fn alpha_from_symbol_snrs(snr_p: f64, snr_c: f64, k_c: usize) -> Result<f64> {
    let data = k_c as f64 * snr_c;
    if snr_p < 0.0 || snr_c < 0.0 || data + snr_p <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "symbol SNRs must be non-negative and not both zero (got {snr_p}, {snr_c})"
        )));
    }
    Ok(data / (data + snr_p))
}

/// Logarithm used for capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogBase::Bits => "bits",
            LogBase::Nats => "nats",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" | "2" => Ok(LogBase::Bits),
            "nats" | "e" => Ok(LogBase::Nats),
            _ => Err(Error::InvalidArgument(format!(
                "unknown log base '{s}' (expected bits or nats)"
            ))),
        }
    }
}

/// Which taps the receiver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    #[default]
    Estimated,
    /// Genie taps; a test baseline only.
    Perfect,
}

/// Monte Carlo `C̲` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub alpha: f64,
    pub rho: f64,
    pub log_base: LogBase,
}

/// Sparse view of `Ĥ_c = Ψ_c^H H_DD Φ_c`: each data column has one entry per
/// tap.
#[derive(Debug, Clone)]
pub struct CommBlock {
    kernel: DdKernel,
    cols: Vec<usize>,
    row_of: Vec<usize>,
    r_c: usize,
}

impl CommBlock {
    pub fn new(spec: &ChannelSpec, alloc: &Allocation, footprint: &ReceiverFootprint) -> Self {
        let kernel = DdKernel::new(spec);
        let mut row_of = vec![usize::MAX; spec.k()];
        for (r, &cell) in footprint.comm_obs.iter().enumerate() {
            row_of[cell] = r;
        }
        Self {
            kernel,
            cols: alloc.comm_cells().to_vec(),
            row_of,
            r_c: footprint.r_c(),
        }
    }

    pub fn rows(&self) -> usize {
        self.r_c
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    /// `(row, value)` entries of column `j` for taps `c`.
    fn column<'a>(
        &'a self,
        j: usize,
        c: &'a [Complex64],
    ) -> impl Iterator<Item = (usize, Complex64)> + 'a {
        let cell = self.cols[j];
        c.iter().enumerate().filter_map(move |(t, &ct)| {
            let (target, w) = self.kernel.image(t, cell);
            let r = self.row_of[target];
            (r != usize::MAX).then_some((r, ct * w))
        })
    }

    /// Entries of the single-tap selector `Ψ_c^H H_t Φ_c`.
    fn selector(&self, tap: usize) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.cols.iter().enumerate().filter_map(move |(j, &cell)| {
            let (target, w) = self.kernel.image(tap, cell);
            let r = self.row_of[target];
            (r != usize::MAX).then_some((r, j, w))
        })
    }

    pub fn dense(&self, c: &[Complex64]) -> CMat {
        let mut h = CMat::zeros(self.r_c, self.cols.len());
        for j in 0..self.cols.len() {
            for (r, v) in self.column(j, c) {
                h[(r, j)] += v;
            }
        }
        h
    }

    /// `Ĥ_c^H Ĥ_c` (`K_c × K_c`), built row by row from the sparse entries.
    pub fn gram(&self, c: &[Complex64]) -> CMat {
        let kc = self.cols.len();
        let mut by_row: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); self.r_c];
        for j in 0..kc {
            for (r, v) in self.column(j, c) {
                by_row[r].push((j, v));
            }
        }
        let mut g = CMat::zeros(kc, kc);
        for row in &by_row {
            for &(j1, v1) in row {
                for &(j2, v2) in row {
                    g[(j1, j2)] += v1.conj() * v2;
                }
            }
        }
        g
    }

    /// `Ĥ_c Ĥ_c^H` (`R_c × R_c`).
    pub fn outer(&self, c: &[Complex64]) -> CMat {
        let mut d = CMat::zeros(self.r_c, self.r_c);
        self.accumulate_outer(c, &mut d);
        d
    }

    fn accumulate_outer(&self, c: &[Complex64], d: &mut CMat) {
        let mut col = Vec::with_capacity(c.len());
        for j in 0..self.cols.len() {
            col.clear();
            col.extend(self.column(j, c));
            for &(r1, v1) in &col {
                for &(r2, v2) in &col {
                    d[(r1, r2)] += v1 * v2.conj();
                }
            }
        }
    }

    pub fn frobenius_sq(&self, c: &[Complex64]) -> f64 {
        (0..self.cols.len())
            .flat_map(|j| self.column(j, c))
            .map(|(_, v)| v.norm_sqr())
            .sum()
    }
}

/// Per-trial machinery for `C̲` at one power split: pilot observation,
/// LMMSE estimate, and log-det of the normalized data-block Gram.
pub struct CapacityModel {
    spec: ChannelSpec,
    z: ObservationMatrix,
    estimator: LmmseEstimator,
    block: CommBlock,
    inputs: RhoInputs,
    geom: AllocGeometry,
}

impl CapacityModel {
    /// The allocation's pilot is rescaled to `budget.pilot_power()`.
    pub fn new(spec: &ChannelSpec, alloc: &Allocation, budget: &PowerBudget) -> Result<Self> {
        let alloc = alloc.clone().with_pilot_power(budget.pilot_power());
        let footprint = receiver_footprints(&alloc, spec)?;
        let kernel = DdKernel::new(spec);
        let z = build_z_with(&kernel, &alloc, &footprint)?;
        let prior = TapPrior::from_spec(spec, budget.noise_variance())?;
        let estimator = LmmseEstimator::new(&z, &prior)?;
        let geom = AllocGeometry::new(&alloc, &footprint);
        let inputs = RhoInputs::new(budget.alpha(), budget, spec, geom)?;
        Ok(Self {
            spec: spec.clone(),
            z,
            estimator,
            block: CommBlock::new(spec, &alloc, &footprint),
            inputs,
            geom,
        })
    }

    pub fn rho(&self) -> f64 {
        self.inputs.rho()
    }

    pub fn geometry(&self) -> AllocGeometry {
        self.geom
    }

    pub fn inputs(&self) -> &RhoInputs {
        &self.inputs
    }

    pub fn block(&self) -> &CommBlock {
        &self.block
    }

    /// True taps and LMMSE estimate for trial `stream`; the draws do not
    /// depend on the power split, so different splits share random numbers.
    pub fn draw(&self, stream: RngStream) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let mut rng = stream.rng();
        let c = sample_taps(&self.spec, &mut rng).into_inner();
        let sn = self.inputs.noise_variance.sqrt();
        let mut y = self.z.apply(&c);
        for v in y.iter_mut() {
            *v += complex_gaussian(&mut rng, 1.0) * sn;
        }
        let c_hat = self.estimator.estimate(&y)?;
        Ok((c, c_hat))
    }

    /// `ln det(I + ρ Ĥ'^H Ĥ')` for given taps.
    pub fn log_det_nats(&self, taps: &[Complex64]) -> Result<f64> {
        let rho = self.rho();
        let norm = self.geom.r_c as f64 * self.inputs.sum_sigma2_chat();
        if rho == 0.0 || norm == 0.0 {
            return Ok(0.0);
        }
        let scale = Complex64::new(rho / norm, 0.0);
        let mut a = self.block.gram(taps);
        let n = a.nrows();
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] *= scale;
            }
            a[(j, j)] += Complex64::new(1.0, 0.0);
        }
        Ok(HpdFactor::new(&a)?.ln_det())
    }

    /// `(1/K) ln det(…)` for one trial.
    pub fn trial_nats(&self, stream: RngStream, csi: CsiMode) -> Result<f64> {
        if self.rho() == 0.0 {
            return Ok(0.0);
        }
        let (c, c_hat) = self.draw(stream)?;
        let taps = match csi {
            CsiMode::Estimated => &c_hat,
            CsiMode::Perfect => &c,
        };
        Ok(self.log_det_nats(taps)? / self.geom.k as f64)
    }

    pub fn estimate(
        &self,
        trials: usize,
        stream: RngStream,
        base: LogBase,
        csi: CsiMode,
    ) -> Result<CapacityEstimate> {
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let samples = (0..trials)
            .into_par_iter()
            .map(|t| Ok(base.from_nats(self.trial_nats(stream.trial(t as u64), csi)?)))
            .collect::<Result<Vec<f64>>>()?;
        let est = MeanEstimate::from_samples(&samples);
        Ok(CapacityEstimate {
            mean: est.mean,
            stderr: est.stderr,
            trials,
            alpha: self.inputs.comm_power / (self.inputs.comm_power + self.inputs.pilot_power),
            rho: self.rho(),
            log_base: base,
        })
    }
}

/// Monte Carlo `C̲` at split `α` with estimated taps.
pub fn capacity_lower_bound_mc(
    alpha: f64,
    budget: &PowerBudget,
    spec: &ChannelSpec,
    alloc: &Allocation,
    trials: usize,
    stream: RngStream,
    base: LogBase,
) -> Result<CapacityEstimate> {
    let b = budget.with_alpha(alpha)?;
    let mut est =
        CapacityModel::new(spec, alloc, &b)?.estimate(trials, stream, base, CsiMode::Estimated)?;
    est.alpha = alpha;
    Ok(est)
}

/// `(H̃_c − Ĥ̃_c)(H̃_c − Ĥ̃_c)^H` for one draw.
pub fn mismatch_gram(c: &[Complex64], c_hat: &[Complex64], block: &CommBlock) -> CMat {
    let diff: Vec<Complex64> = c.iter().zip(c_hat).map(|(a, b)| a - b).collect();
    block.outer(&diff)
}

/// True when every single-tap selector `B_t = Ψ_c^H H_t Φ_c` has `B_t B_t^H`
/// diagonal with 0/1 entries, i.e. at most one unit-modulus entry per row.
pub fn selectors_are_partial_identities(block: &CommBlock, taps: usize) -> bool {
    (0..taps).all(|t| {
        let mut seen = vec![false; block.rows()];
        block.selector(t).all(|(r, _, w)| {
            let fresh = !std::mem::replace(&mut seen[r], true);
            fresh && (w.norm_sqr() - 1.0).abs() < 1e-12
        })
    })
}

/// Monte Carlo check of `E[(H̃_c−Ĥ̃_c)(·)^H] ⪯ E‖c−ĉ‖² I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchReport {
    pub max_eigenvalue: f64,
    /// Closed-form `E‖c − ĉ‖²`.
    pub trace_mse: f64,
    pub empirical_trace_mse: f64,
    pub selectors_partial_identity: bool,
    pub trials: usize,
}

impl MismatchReport {
    pub fn passed(&self, slack: f64) -> bool {
        self.selectors_partial_identity && self.max_eigenvalue <= (1.0 + slack) * self.trace_mse
    }
}

pub fn mismatch_bound_check(
    alloc: &Allocation,
    spec: &ChannelSpec,
    budget: &PowerBudget,
    trials: usize,
    stream: RngStream,
) -> Result<MismatchReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let model = CapacityModel::new(spec, alloc, budget)?;
    let r_c = model.block.rows();
    if r_c > crate::types::DENSE_LIMIT {
        return Err(Error::TooLarge {
            k: r_c,
            limit: crate::types::DENSE_LIMIT,
        });
    }
    let mut d = CMat::zeros(r_c, r_c);
    let mut err = Vec::with_capacity(trials);
    for t in 0..trials {
        let (c, c_hat) = model.draw(stream.trial(t as u64))?;
        let diff: Vec<Complex64> = c.iter().zip(&c_hat).map(|(a, b)| a - b).collect();
        err.push(diff.iter().map(|v| v.norm_sqr()).sum::<f64>());
        model.block.accumulate_outer(&diff, &mut d);
    }
    let inv = Complex64::new(1.0 / trials as f64, 0.0);
    for j in 0..r_c {
        for i in 0..r_c {
            d[(i, j)] *= inv;
        }
    }
    Ok(MismatchReport {
        max_eigenvalue: hermitian_max_eigenvalue(&d)?,
        trace_mse: model.inputs.channel_mse(),
        empirical_trace_mse: MeanEstimate::from_samples(&err).mean,
        selectors_partial_identity: selectors_are_partial_identities(&model.block, spec.num_taps()),
        trials,
    })
}

/// Monte Carlo statistics of `ĉ` and of the estimated data block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatGramReport {
    pub empirical_diag: Vec<f64>,
    pub expected_diag: Vec<f64>,
    pub max_rel_deviation: f64,
    pub max_offdiag: f64,
    /// Largest `|E[ĉ_i ĉ_j^*]| / SE` over `i ≠ j`.
    pub max_offdiag_z: f64,
    /// Empirical `tr E[Ĥ̃_c Ĥ̃_c^H]`.
    pub empirical_trace: f64,
    /// `R_c Σ σ²_ĉ`.
    pub trace_bound: f64,
    pub trials: usize,
}

impl ChatGramReport {
    pub fn diag_within(&self, rel: f64) -> bool {
        self.max_rel_deviation < rel
    }

    pub fn trace_within(&self, slack: f64) -> bool {
        self.empirical_trace <= (1.0 + slack) * self.trace_bound
    }
}

pub fn chat_gram_bound_check(
    alloc: &Allocation,
    spec: &ChannelSpec,
    budget: &PowerBudget,
    trials: usize,
    stream: RngStream,
) -> Result<ChatGramReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(
            "at least two trials are required".into(),
        ));
    }
    let model = CapacityModel::new(spec, alloc, budget)?;
    let t = spec.num_taps();
    let draws = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (_, c_hat) = model.draw(stream.trial(i as u64))?;
            let fro = model.block.frobenius_sq(&c_hat);
            Ok((c_hat, fro))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trials as f64;
    let mut sum = vec![Complex64::new(0.0, 0.0); t * t];
    let mut sum_sq = vec![0.0f64; t * t];
    for (c_hat, _) in &draws {
        for j in 0..t {
            for i in 0..t {
                let p = c_hat[i] * c_hat[j].conj();
                sum[i + j * t] += p;
                sum_sq[i + j * t] += p.norm_sqr();
            }
        }
    }
    let expected_diag = model.inputs.sigma2_chat.clone();
    let empirical_diag: Vec<f64> = (0..t).map(|i| sum[i + i * t].re / n).collect();
    let max_rel_deviation = empirical_diag
        .iter()
        .zip(&expected_diag)
        .map(|(e, x)| (e / x - 1.0).abs())
        .fold(0.0, f64::max);
    let (mut max_offdiag, mut max_offdiag_z) = (0.0f64, 0.0f64);
    for j in 0..t {
        for i in 0..t {
            if i == j {
                continue;
            }
            let mean = sum[i + j * t] / n;
            let var = (sum_sq[i + j * t] / n - mean.norm_sqr()).max(0.0);
            let se = (var / (n - 1.0)).sqrt();
            max_offdiag = max_offdiag.max(mean.norm());
            if se > 0.0 {
                max_offdiag_z = max_offdiag_z.max(mean.norm() / se);
            }
        }
    }
    let fro: Vec<f64> = draws.iter().map(|d| d.1).collect();
    Ok(ChatGramReport {
        empirical_diag,
        expected_diag,
        max_rel_deviation,
        max_offdiag,
        max_offdiag_z,
        empirical_trace: MeanEstimate::from_samples(&fro).mean,
        trace_bound: model.geom.r_c as f64 * model.inputs.sum_sigma2_chat(),
        trials,
    })
}
