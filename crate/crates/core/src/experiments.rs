//! Experiment drivers shared by the CLI, the Python bindings and the tests:
//! allocation design, the published-table reproductions, and MSE, capacity
//! and BER curves.

use serde::Serialize;

use crate::capacity::{
    alpha_from_symbol_snrs, optimize_alpha, rho, snr_tx_from_symbol_snrs, AllocGeometry,
    CapacityEstimate, CapacityModel, CsiMode, LogBase,
};
use crate::error::{Error, Result};
use crate::estimation::{empirical_mse, mse_closed_form, TapPrior};
use crate::link::{BerEstimate, LinkSimulator};
use crate::pilot::{make_allocation, receiver_footprints, Allocation, AllocationKind};
use crate::scenarios::{table2_spec, TableIIRow, TABLE_I, TABLE_II, TABLE_I_SNR_TX_DB};
use crate::stats::MeanEstimate;
use crate::types::{db_to_linear, ChannelSpec, PowerBudget, RngStream};

/// Frame size used by `design` when none is given.
pub const DEFAULT_DESIGN_K: usize = 441;

/// One candidate grid for a channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignOption {
    pub kind: AllocationKind,
    pub n: usize,
    pub m: usize,
    pub k_p: usize,
    pub k_c: usize,
    pub r_c: usize,
    pub mse_closed: f64,
    pub alpha_star: f64,
    pub rho_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRecommendation {
    pub l: usize,
    pub q: usize,
    pub k: usize,
    pub snr_tx_db: f64,
    /// One option, or both slabs when `L = Q`.
    pub options: Vec<DesignOption>,
}

/// Smallest divisor `d ≥ min` of `k` whose cofactor exceeds `guard`.
fn smallest_divisor(k: usize, min: usize, guard: usize) -> Option<(usize, usize)> {
    (min.max(1)..=k)
        .find(|d| k.is_multiple_of(*d) && k / d > guard)
        .map(|d| (d, k / d))
}

fn design_option(kind: AllocationKind, spec: &ChannelSpec, snr_tx_db: f64) -> Result<DesignOption> {
    let alloc = make_allocation(kind, spec, 1.0, None)?;
    let geom = AllocGeometry::of(&alloc, spec)?;
    let budget = PowerBudget::from_snr_tx_db(snr_tx_db, spec.k(), 0.5)?;
    let best = optimize_alpha(&budget, spec, geom)?;
    let at_best = budget.with_alpha(best.alpha)?;
    let prior = TapPrior::from_spec(spec, budget.noise_variance())?;
    Ok(DesignOption {
        kind,
        n: spec.n(),
        m: spec.m(),
        k_p: alloc.k_p(),
        k_c: geom.k_c,
        r_c: geom.r_c,
        mse_closed: mse_closed_form(&prior, at_best.pilot_power()),
        alpha_star: best.alpha,
        rho_star: best.rho,
    })
}

/// Picks the lowest-overhead slab: a Doppler slab with `N = Q+1` when
/// `Q > L`, a delay slab with `M = L+1` when `Q < L`, both when equal. If
/// `K` is not divisible by the minimal size, the next divisor is used.
pub fn design(
    l: usize,
    q: usize,
    k: Option<usize>,
    snr_tx_db: f64,
) -> Result<DesignRecommendation> {
    let k = k.unwrap_or(DEFAULT_DESIGN_K);
    let mut kinds = Vec::new();
    if q >= l {
        kinds.push(AllocationKind::DopplerSlab);
    }
    if q <= l {
        kinds.push(AllocationKind::DelaySlab);
    }
    let mut options = Vec::new();
    for kind in kinds {
        let (n, m) = match kind {
            AllocationKind::DopplerSlab => smallest_divisor(k, q + 1, 2 * l + 1).ok_or_else(|| {
                Error::Geometry(format!(
                    "doppler_slab: no factorization K = {k} = N·M with N ≥ Q+1 = {} and M > 2L+1 = {}",
                    q + 1,
                    2 * l + 1
                ))
            })?,
            _ => {
                let (m, n) = smallest_divisor(k, l + 1, 2 * q + 1).ok_or_else(|| {
                    Error::Geometry(format!(
                        "delay_slab: no factorization K = {k} = N·M with M ≥ L+1 = {} and N > 2Q+1 = {}",
                        l + 1,
                        2 * q + 1
                    ))
                })?;
                (n, m)
            }
        };
        let spec = ChannelSpec::uniform(n, m, l, q)?;
        options.push(design_option(kind, &spec, snr_tx_db)?);
    }
    Ok(DesignRecommendation {
        l,
        q,
        k,
        snr_tx_db,
        options,
    })
}

/// Computed against reported optimal split for one channel/allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Result {
    pub channel: u8,
    pub kind: AllocationKind,
    pub n: usize,
    pub m: usize,
    pub k_p: usize,
    pub alpha_star: f64,
    pub expected: f64,
}

impl Table1Result {
    pub fn abs_error(&self) -> f64 {
        (self.alpha_star - self.expected).abs()
    }
}

pub fn reproduce_table1() -> Result<Vec<Table1Result>> {
    let mut out = Vec::new();
    for ch in TABLE_I {
        for (kind, n, m, expected) in ch.entries {
            let spec = ch.spec(kind)?;
            let alloc = make_allocation(kind, &spec, 1.0, None)?;
            let geom = AllocGeometry::of(&alloc, &spec)?;
            let budget = PowerBudget::from_snr_tx_db(TABLE_I_SNR_TX_DB, spec.k(), 0.5)?;
            out.push(Table1Result {
                channel: ch.index,
                kind,
                n,
                m,
                k_p: alloc.k_p(),
                alpha_star: optimize_alpha(&budget, &spec, geom)?.alpha,
                expected,
            });
        }
    }
    Ok(out)
}

/// SNR conversion and optimal splits for one comparison row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Analytic {
    pub row: usize,
    pub snr_tx_linear: f64,
    pub snr_tx_db: f64,
    pub alpha: f64,
    /// `α*` for island, Doppler slab and delay slab.
    pub alpha_star: [f64; 3],
    pub expected: TableIIRow,
}

/// Island `(K, K_c)` for the comparison: the symbol-SNR conversion refers to it.
fn table2_island_dims() -> Result<(usize, usize)> {
    let spec = table2_spec(AllocationKind::Island)?;
    let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, None)?;
    Ok((spec.k(), alloc.k_c()))
}

pub fn reproduce_table2_analytics() -> Result<Vec<Table2Analytic>> {
    let (k, k_c) = table2_island_dims()?;
    let mut out = Vec::new();
    for (row, expected) in TABLE_II.iter().enumerate() {
        let (snr_p, snr_c) = (
            db_to_linear(expected.snr_p_db),
            db_to_linear(expected.snr_c_db),
        );
        let (snr_tx_linear, snr_tx_db) = snr_tx_from_symbol_snrs(snr_p, snr_c, k, k_c);
        let alpha = alpha_from_symbol_snrs(snr_p, snr_c, k_c)?;
        let mut alpha_star = [0.0; 3];
        for (slot, kind) in alpha_star.iter_mut().zip(AllocationKind::STANDARD) {
            let spec = table2_spec(kind)?;
            let alloc = make_allocation(kind, &spec, 1.0, None)?;
            let geom = AllocGeometry::of(&alloc, &spec)?;
            let budget = PowerBudget::new(1.0, 0.5, 1.0 / (spec.k() as f64 * snr_tx_linear))?;
            *slot = optimize_alpha(&budget, &spec, geom)?.alpha;
        }
        out.push(Table2Analytic {
            row,
            snr_tx_linear,
            snr_tx_db,
            alpha,
            alpha_star,
            expected: *expected,
        });
    }
    Ok(out)
}

/// Which reported capacity of a comparison row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Table2Column {
    /// Island at the split implied by the symbol SNRs.
    IslandAtAlpha,
    /// Allocation at its reported optimal split.
    Optimum(AllocationKind),
}

impl Table2Column {
    pub const ALL: [Table2Column; 4] = [
        Table2Column::IslandAtAlpha,
        Table2Column::Optimum(AllocationKind::Island),
        Table2Column::Optimum(AllocationKind::DopplerSlab),
        Table2Column::Optimum(AllocationKind::DelaySlab),
    ];

    pub fn kind(self) -> AllocationKind {
        match self {
            Table2Column::IslandAtAlpha => AllocationKind::Island,
            Table2Column::Optimum(k) => k,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Table2Column::IslandAtAlpha => "island_alpha",
            Table2Column::Optimum(AllocationKind::Island) => "island_alpha_star",
            Table2Column::Optimum(AllocationKind::DopplerSlab) => "doppler_slab_alpha_star",
            Table2Column::Optimum(_) => "delay_slab_alpha_star",
        }
    }

    /// Reported `(α, C̲)` for this column of `row`.
    pub fn reported(self, row: &TableIIRow) -> (f64, f64) {
        match self {
            Table2Column::IslandAtAlpha => (row.alpha, row.capacity_at_alpha),
            Table2Column::Optimum(k) => {
                let p = row.optimum(k);
                (p.alpha_star, p.capacity)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Capacity {
    pub row: usize,
    pub column: Table2Column,
    pub alpha: f64,
    pub expected: f64,
    pub estimate: CapacityEstimate,
}

impl Table2Capacity {
    pub fn rel_error(&self) -> f64 {
        (self.estimate.mean / self.expected - 1.0).abs()
    }
}

/// Monte Carlo `C̲` at a reported `(α, geometry)` point of the comparison.
pub fn table2_capacity(
    row: usize,
    column: Table2Column,
    trials: usize,
    stream: RngStream,
    base: LogBase,
) -> Result<Table2Capacity> {
    let expected_row = TABLE_II.get(row).ok_or_else(|| Error::OutOfRange {
        what: "row",
        value: row as i64,
        range: format!("0..{}", TABLE_II.len()),
    })?;
    let (k, k_c) = table2_island_dims()?;
    let (snr_tx, _) = snr_tx_from_symbol_snrs(
        db_to_linear(expected_row.snr_p_db),
        db_to_linear(expected_row.snr_c_db),
        k,
        k_c,
    );
    let (alpha, expected) = column.reported(expected_row);
    let kind = column.kind();
    let spec = table2_spec(kind)?;
    let alloc = make_allocation(kind, &spec, 1.0, None)?;
    let budget = PowerBudget::new(1.0, alpha, 1.0 / (spec.k() as f64 * snr_tx))?;
    let estimate = CapacityModel::new(&spec, &alloc, &budget)?.estimate(
        trials,
        stream,
        base,
        CsiMode::Estimated,
    )?;
    Ok(Table2Capacity {
        row,
        column,
        alpha,
        expected,
        estimate,
    })
}

/// One point of an MSE-vs-SNR curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsePoint {
    pub snr_tx_db: f64,
    pub alpha: f64,
    pub mse_closed: f64,
    pub mse_empirical: MeanEstimate,
}

pub fn mse_curve(
    spec: &ChannelSpec,
    alloc: &Allocation,
    snrs_db: &[f64],
    alpha: f64,
    trials: usize,
    stream: RngStream,
) -> Result<Vec<MsePoint>> {
    snrs_db
        .iter()
        .map(|&snr| {
            let budget = PowerBudget::from_snr_tx_db(snr, spec.k(), alpha)?;
            let alloc = alloc.clone().with_pilot_power(budget.pilot_power());
            let fp = receiver_footprints(&alloc, spec)?;
            let prior = TapPrior::from_spec(spec, budget.noise_variance())?;
            Ok(MsePoint {
                snr_tx_db: snr,
                alpha,
                mse_closed: mse_closed_form(&prior, budget.pilot_power()),
                mse_empirical: empirical_mse(
                    &alloc,
                    &fp,
                    spec,
                    budget.noise_variance(),
                    trials,
                    stream,
                )?,
            })
        })
        .collect()
}

/// One point of a capacity-vs-split curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub alpha: f64,
    pub rho: f64,
    pub estimate: CapacityEstimate,
}

/// `C̲(α)` on common random numbers across the grid.
pub fn capacity_curve(
    spec: &ChannelSpec,
    alloc: &Allocation,
    snr_tx_db: f64,
    alphas: &[f64],
    trials: usize,
    stream: RngStream,
    base: LogBase,
) -> Result<Vec<CapacityPoint>> {
    let geom = AllocGeometry::of(alloc, spec)?;
    alphas
        .iter()
        .map(|&alpha| {
            let budget = PowerBudget::from_snr_tx_db(snr_tx_db, spec.k(), alpha)?;
            let estimate = CapacityModel::new(spec, alloc, &budget)?.estimate(
                trials,
                stream,
                base,
                CsiMode::Estimated,
            )?;
            Ok(CapacityPoint {
                alpha,
                rho: rho(alpha, &budget, spec, geom)?,
                estimate,
            })
        })
        .collect()
}

pub fn alpha_star(spec: &ChannelSpec, alloc: &Allocation, snr_tx_db: f64) -> Result<f64> {
    let geom = AllocGeometry::of(alloc, spec)?;
    let budget = PowerBudget::from_snr_tx_db(snr_tx_db, spec.k(), 0.5)?;
    Ok(optimize_alpha(&budget, spec, geom)?.alpha)
}

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_tx_db: f64,
    pub alpha: f64,
    pub ber: BerEstimate,
}

pub fn ber_curve(
    spec: &ChannelSpec,
    alloc: &Allocation,
    snr_tx_db: f64,
    alphas: &[f64],
    trials: usize,
    stream: RngStream,
) -> Result<Vec<BerPoint>> {
    alphas
        .iter()
        .map(|&alpha| {
            let budget = PowerBudget::from_snr_tx_db(snr_tx_db, spec.k(), alpha)?;
            Ok(BerPoint {
                snr_tx_db,
                alpha,
                ber: LinkSimulator::new(spec, alloc, &budget)?.run(
                    trials,
                    stream,
                    CsiMode::Estimated,
                )?,
            })
        })
        .collect()
}

/// `n` evenly spaced points on `[start, stop]`.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
