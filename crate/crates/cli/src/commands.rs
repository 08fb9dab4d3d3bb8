use std::path::{Path, PathBuf};

use otfs_core::capacity::{
    alpha_from_symbol_snrs, optimize_alpha, snr_tx_from_symbol_snrs, AllocGeometry, CapacityModel,
    CsiMode, LogBase,
};
use otfs_core::estimation::{build_z, empirical_mse, gram_offdiag, mse_closed_form, TapPrior};
use otfs_core::experiments::{
    alpha_star, capacity_curve, design, linspace, mse_curve, reproduce_table1,
    reproduce_table2_analytics, table2_capacity, Table2Column,
};
use otfs_core::link::LinkSimulator;
use otfs_core::pilot::{
    make_allocation, receiver_footprints, validate_a1, Allocation, AllocationKind,
};
use otfs_core::scenarios::{fig6c_spec, TABLE_I, TABLE_II};
use otfs_core::types::db_to_linear;
use otfs_core::{ChannelSpec, PowerBudget, RngStream};

use crate::config::{AlphaChoice, Analysis, ConfigError, ExperimentConfig, PowerChoice};
use crate::csv::{cell, CsvTable};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Tolerance(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<otfs_core::Error> for CliError {
    fn from(e: otfs_core::Error) -> Self {
        match e {
            otfs_core::Error::Geometry(_)
            | otfs_core::Error::InvalidSpec(_)
            | otfs_core::Error::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Global flags that override per-command defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Stream id spacing between independent sub-experiments.
const STREAM_BLOCK: u64 = 1 << 32;

pub fn cmd_design(l: usize, q: usize, k: Option<usize>, snr_tx_db: f64) -> CliResult {
    let rec = design(l, q, k, snr_tx_db)?;
    println!(
        "channel L = {l}, Q = {q}; K = {}, SNR_tx = {snr_tx_db} dB",
        rec.k
    );
    if rec.options.len() > 1 {
        println!("L = Q: both slabs have the same pilot overhead");
    }
    for o in &rec.options {
        println!(
            "{}: N = {}, M = {}, K_p = {}, K_c = {}, R_c = {}, MSE(α*) = {:.6e}, α* = {:.4}, ρ(α*) = {:.4}",
            o.kind, o.n, o.m, o.k_p, o.k_c, o.r_c, o.mse_closed, o.alpha_star, o.rho_star
        );
    }
    Ok(())
}

fn out_path(dir: &Option<PathBuf>, name: &str) -> PathBuf {
    dir.as_deref().unwrap_or(Path::new(".")).join(name)
}

pub fn reproduce_table1_cmd(ov: &Overrides) -> CliResult {
    let rows = reproduce_table1()?;
    let mut t = CsvTable::new(
        "reproduce table1",
        "table1",
        0,
        &[
            "channel",
            "kind",
            "N",
            "M",
            "K_p",
            "alpha_star",
            "expected",
            "abs_error",
            "pass",
        ],
    );
    let mut all = true;
    for r in &rows {
        let ok = r.abs_error() < 0.005;
        all &= ok;
        println!(
            "{} channel {} {:>12} {{N={}, M={}}}: α* = {:.4} (reported {:.4})",
            status(ok),
            r.channel,
            r.kind.as_str(),
            r.n,
            r.m,
            r.alpha_star,
            r.expected
        );
        t.push(vec![
            cell(r.channel),
            cell(r.kind),
            cell(r.n),
            cell(r.m),
            cell(r.k_p),
            format!("{:.6}", r.alpha_star),
            cell(r.expected),
            format!("{:.6}", r.abs_error()),
            cell(ok),
        ]);
    }
    t.write(Some(&out_path(&ov.out, "table1.csv")))?;
    if all {
        Ok(())
    } else {
        Err(CliError::Tolerance("table1: α* outside ±0.005".into()))
    }
}

pub fn reproduce_table2_cmd(ov: &Overrides) -> CliResult {
    let seed = ov.seed.unwrap_or(0);
    let trials = ov.trials.unwrap_or(200);
    let mut all = true;

    let analytics = reproduce_table2_analytics()?;
    let mut a = CsvTable::new(
        "reproduce table2",
        "table2-analytics",
        0,
        &[
            "row",
            "snr_p_db",
            "snr_c_db",
            "snr_tx_db",
            "expected_snr_tx_db",
            "alpha",
            "expected_alpha",
            "alpha_star_island",
            "alpha_star_doppler_slab",
            "alpha_star_delay_slab",
            "expected_island",
            "expected_doppler_slab",
            "expected_delay_slab",
            "pass",
        ],
    );
    for r in &analytics {
        let e = &r.expected;
        let star_ok = r
            .alpha_star
            .iter()
            .zip(AllocationKind::STANDARD)
            .all(|(got, k)| (got - e.optimum(k).alpha_star).abs() < 0.01);
        let ok = format!("{:.2}", r.snr_tx_db).parse::<f64>().ok() == Some(e.snr_tx_db)
            && format!("{:.4}", r.alpha).parse::<f64>().ok() == Some(e.alpha)
            && star_ok;
        all &= ok;
        println!(
            "{} row {}: SNR_tx = {:.2} dB (reported {:.2}), α = {:.4} (reported {:.4}), α* = {:.4}/{:.4}/{:.4}",
            status(ok), r.row + 1, r.snr_tx_db, e.snr_tx_db, r.alpha, e.alpha,
            r.alpha_star[0], r.alpha_star[1], r.alpha_star[2]
        );
        a.push(vec![
            cell(r.row + 1),
            cell(e.snr_p_db),
            cell(e.snr_c_db),
            format!("{:.4}", r.snr_tx_db),
            cell(e.snr_tx_db),
            format!("{:.6}", r.alpha),
            cell(e.alpha),
            format!("{:.6}", r.alpha_star[0]),
            format!("{:.6}", r.alpha_star[1]),
            format!("{:.6}", r.alpha_star[2]),
            cell(e.island.alpha_star),
            cell(e.doppler_slab.alpha_star),
            cell(e.delay_slab.alpha_star),
            cell(ok),
        ]);
    }
    a.write(Some(&out_path(&ov.out, "table2_analytics.csv")))?;

    let mut c = CsvTable::new(
        "reproduce table2",
        &format!("table2-capacity trials={trials}"),
        seed,
        &[
            "row",
            "column",
            "kind",
            "alpha",
            "cap_lb_mean_nats",
            "cap_lb_stderr_nats",
            "cap_lb_mean_bits",
            "expected",
            "rel_error",
            "trials",
            "pass",
        ],
    );
    c.comment("reported capacities are compared in natural-log units");
    for row in 0..TABLE_II.len() {
        for (j, col) in Table2Column::ALL.into_iter().enumerate() {
            let stream = RngStream::new(seed, STREAM_BLOCK * (4 * row + j) as u64);
            let r = table2_capacity(row, col, trials, stream, LogBase::Nats)?;
            let ok = r.rel_error() < 0.05;
            all &= ok;
            println!(
                "{} row {} {:>24}: C = {:.4} ± {:.4} nats (reported {:.4}, {:+.2}%)",
                status(ok),
                row + 1,
                col.label(),
                r.estimate.mean,
                r.estimate.stderr,
                r.expected,
                100.0 * (r.estimate.mean / r.expected - 1.0)
            );
            c.push(vec![
                cell(row + 1),
                cell(col.label()),
                cell(col.kind()),
                cell(r.alpha),
                format!("{:.6}", r.estimate.mean),
                format!("{:.6}", r.estimate.stderr),
                format!("{:.6}", LogBase::Bits.from_nats(r.estimate.mean)),
                cell(r.expected),
                format!("{:.6}", r.rel_error()),
                cell(trials),
                cell(ok),
            ]);
        }
    }
    c.write(Some(&out_path(&ov.out, "table2_capacity.csv")))?;
    if all {
        Ok(())
    } else {
        Err(CliError::Tolerance(
            "table2: values outside tolerance".into(),
        ))
    }
}

/// Pilot/data split used for the MSE comparison.
pub const FIG6C_ALPHA: f64 = 0.5;

const MSE_COLUMNS: [&str; 11] = [
    "snr_tx_db",
    "kind",
    "K",
    "N",
    "M",
    "L",
    "Q",
    "alpha",
    "mse_closed",
    "mse_empirical",
    "trials",
];

fn mse_row(
    spec: &ChannelSpec,
    kind: AllocationKind,
    snr: f64,
    alpha: f64,
    closed: f64,
    emp: f64,
    trials: usize,
) -> Vec<String> {
    vec![
        cell(snr),
        cell(kind),
        cell(spec.k()),
        cell(spec.n()),
        cell(spec.m()),
        cell(spec.max_delay()),
        cell(spec.doppler_order()),
        cell(alpha),
        format!("{closed:.9e}"),
        format!("{emp:.9e}"),
        cell(trials),
    ]
}

pub fn reproduce_fig6c_cmd(ov: &Overrides) -> CliResult {
    let seed = ov.seed.unwrap_or(0);
    let trials = ov.trials.unwrap_or(2000);
    let snrs = linspace(0.0, 30.0, 7);
    let mut t = CsvTable::new(
        "reproduce fig6c",
        &format!("fig6c trials={trials}"),
        seed,
        &MSE_COLUMNS,
    );
    t.comment(format!("alpha = {FIG6C_ALPHA}"));
    let mut curves = Vec::new();
    for (i, kind) in AllocationKind::STANDARD.into_iter().enumerate() {
        let spec = fig6c_spec(kind)?;
        let alloc = make_allocation(kind, &spec, 1.0, None)?;
        let curve = mse_curve(
            &spec,
            &alloc,
            &snrs,
            FIG6C_ALPHA,
            trials,
            RngStream::new(seed, STREAM_BLOCK * i as u64),
        )?;
        for p in &curve {
            t.push(mse_row(
                &spec,
                kind,
                p.snr_tx_db,
                p.alpha,
                p.mse_closed,
                p.mse_empirical.mean,
                trials,
            ));
        }
        curves.push(curve);
    }
    t.write(Some(&out_path(&ov.out, "fig6c.csv")))?;
    let mut all = true;
    for s in 0..snrs.len() {
        let rel = curves
            .iter()
            .map(|c| (c[s].mse_empirical.mean / c[s].mse_closed - 1.0).abs())
            .fold(0.0, f64::max);
        let mut z = 0.0f64;
        for a in 0..3 {
            for b in a + 1..3 {
                let (x, y) = (&curves[a][s].mse_empirical, &curves[b][s].mse_empirical);
                z = z.max((x.mean - y.mean).abs() / (x.stderr.powi(2) + y.stderr.powi(2)).sqrt());
            }
        }
        let ok = rel < 0.05 && z < 3.0;
        all &= ok;
        println!(
            "{} SNR_tx = {:>4} dB: closed-form MSE {:.4e}, max deviation {:.2}%, allocations within {:.2} SE",
            status(ok), snrs[s], curves[0][s].mse_closed, 100.0 * rel, z
        );
    }
    if all {
        Ok(())
    } else {
        Err(CliError::Tolerance(
            "fig6c: MSE curves outside tolerance".into(),
        ))
    }
}

const CAPACITY_COLUMNS: [&str; 12] = [
    "alpha",
    "rho",
    "cap_lb_mean_bps_hz",
    "cap_lb_stderr",
    "trials",
    "kind",
    "N",
    "M",
    "L",
    "Q",
    "snr_tx_db",
    "alpha_star",
];

pub fn reproduce_fig8_cmd(ov: &Overrides) -> CliResult {
    let seed = ov.seed.unwrap_or(0);
    let trials = ov.trials.unwrap_or(100);
    let grid = linspace(0.0, 1.0, 21);
    let mut all = true;
    for ch in TABLE_I {
        let mut t = CsvTable::new(
            "reproduce fig8",
            &format!("fig8 channel={} trials={trials}", ch.index),
            seed,
            &CAPACITY_COLUMNS,
        );
        t.comment(format!(
            "channel {}: L = {}, Q = {}, SNR_tx = 20 dB, log base bits",
            ch.index, ch.l, ch.q
        ));
        let mut peaks = Vec::new();
        for kind in AllocationKind::STANDARD {
            let spec = ch.spec(kind)?;
            let alloc = make_allocation(kind, &spec, 1.0, None)?;
            let stream = RngStream::new(seed, STREAM_BLOCK * ch.index as u64);
            let curve = capacity_curve(&spec, &alloc, 20.0, &grid, trials, stream, LogBase::Bits)?;
            let a_star = alpha_star(&spec, &alloc, 20.0)?;
            for p in &curve {
                t.push(vec![
                    cell(p.alpha),
                    format!("{:.6}", p.rho),
                    format!("{:.6}", p.estimate.mean),
                    format!("{:.6}", p.estimate.stderr),
                    cell(trials),
                    cell(kind),
                    cell(spec.n()),
                    cell(spec.m()),
                    cell(ch.l),
                    cell(ch.q),
                    cell(20.0),
                    format!("{a_star:.6}"),
                ]);
            }
            let best = curve
                .iter()
                .max_by(|a, b| a.estimate.mean.total_cmp(&b.estimate.mean))
                .expect("non-empty grid");
            let ok = (best.alpha - a_star).abs() <= 0.05 + 1e-12;
            all &= ok;
            println!(
                "{} channel {} {:>12}: peak C = {:.4} at α = {:.2}, α* = {:.4}",
                status(ok),
                ch.index,
                kind.as_str(),
                best.estimate.mean,
                best.alpha,
                a_star
            );
            peaks.push(best.estimate.mean);
        }
        let winner = match ch.index {
            2 => Some((AllocationKind::DopplerSlab, peaks[1] > peaks[0])),
            3 => Some((AllocationKind::DelaySlab, peaks[2] > peaks[0])),
            _ => None,
        };
        if let Some((kind, ok)) = winner {
            all &= ok;
            println!(
                "{} channel {}: {kind} peak exceeds island peak",
                status(ok),
                ch.index
            );
        }
        t.write(Some(&out_path(
            &ov.out,
            &format!("fig8_channel{}.csv", ch.index),
        )))?;
    }
    if all {
        Ok(())
    } else {
        Err(CliError::Tolerance(
            "fig8: capacity curves outside tolerance".into(),
        ))
    }
}

/// `(SNR_tx dB, P)` sweep points.
type PowerPoints = Vec<(f64, f64)>;

/// Sweep points and a header note for the configured power.
fn power_points(
    cfg: &ExperimentConfig,
    alloc: &Allocation,
) -> CliResult<(PowerPoints, Option<String>)> {
    match &cfg.power {
        PowerChoice::SnrTx {
            snr_tx_db,
            total_power,
        } => Ok((snr_tx_db.iter().map(|&s| (s, *total_power)).collect(), None)),
        PowerChoice::SymbolSnr { snr_p_db, snr_c_db } => {
            let (snr_p, snr_c) = (db_to_linear(*snr_p_db), db_to_linear(*snr_c_db));
            let (_, db) = snr_tx_from_symbol_snrs(snr_p, snr_c, cfg.spec.k(), alloc.k_c());
            let alpha = alpha_from_symbol_snrs(snr_p, snr_c, alloc.k_c())
                .map_err(|e| CliError::Config(format!("symbol_snr: {e}")))?;
            Ok((
                vec![(db, 1.0)],
                Some(format!(
                    "symbol SNRs give SNR_tx = {db:.4} dB and alpha = {alpha:.6}"
                )),
            ))
        }
    }
}

fn budget_at(
    spec: &ChannelSpec,
    snr_db: f64,
    total_power: f64,
    alpha: f64,
) -> CliResult<PowerBudget> {
    Ok(PowerBudget::new(
        total_power,
        alpha,
        total_power / (spec.k() as f64 * db_to_linear(snr_db)),
    )?)
}

pub fn cmd_sweep(config: &Path, ov: &Overrides) -> CliResult {
    let (cfg, text) = ExperimentConfig::load(config)?;
    let analysis = cfg.analysis.ok_or_else(|| {
        CliError::Config(format!(
            "{}: analysis: required for sweep (mse, capacity or ber)",
            config.display()
        ))
    })?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    let trials = ov.trials.unwrap_or(cfg.trials);
    let out = ov.out.clone().or_else(|| cfg.output.clone());
    let spec = &cfg.spec;
    let alloc = cfg.allocation();
    let geom = AllocGeometry::of(&alloc, spec)?;
    let (points, note) = power_points(&cfg, &alloc)?;

    let columns: &[&'static str] = match analysis {
        Analysis::Mse => &MSE_COLUMNS,
        Analysis::Capacity => &CAPACITY_COLUMNS,
        Analysis::Ber => &[
            "snr_tx_db",
            "alpha",
            "kind",
            "ber",
            "ci_low",
            "ci_high",
            "bits_simulated",
        ],
    };
    let mut t = CsvTable::new("sweep", &text, seed, columns);
    t.comment(format!("scenario {}", cfg.scenario));
    if analysis == Analysis::Capacity {
        t.comment(format!("log base {}", cfg.log_base));
    }
    if let Some(n) = note {
        t.comment(n);
    }

    for (i, &(snr, power)) in points.iter().enumerate() {
        let stream = RngStream::new(seed, STREAM_BLOCK * i as u64);
        let a_star = optimize_alpha(&budget_at(spec, snr, power, 0.5)?, spec, geom)?.alpha;
        let alphas = match &cfg.alpha {
            AlphaChoice::Fixed(a) => vec![*a],
            AlphaChoice::Grid(g) => g.clone(),
            AlphaChoice::Optimize => vec![a_star],
        };
        for &alpha in &alphas {
            let budget = budget_at(spec, snr, power, alpha)?;
            match analysis {
                Analysis::Mse => {
                    let a = alloc.clone().with_pilot_power(budget.pilot_power());
                    let fp = receiver_footprints(&a, spec)?;
                    let prior = TapPrior::from_spec(spec, budget.noise_variance())?;
                    let closed = mse_closed_form(&prior, budget.pilot_power());
                    let emp =
                        empirical_mse(&a, &fp, spec, budget.noise_variance(), trials, stream)?;
                    t.push(mse_row(
                        spec, cfg.kind, snr, alpha, closed, emp.mean, trials,
                    ));
                }
                Analysis::Capacity => {
                    let model = CapacityModel::new(spec, &alloc, &budget)?;
                    let est = model.estimate(trials, stream, cfg.log_base, CsiMode::Estimated)?;
                    t.push(vec![
                        cell(alpha),
                        format!("{:.6}", model.rho()),
                        format!("{:.6}", est.mean),
                        format!("{:.6}", est.stderr),
                        cell(trials),
                        cell(cfg.kind),
                        cell(spec.n()),
                        cell(spec.m()),
                        cell(spec.max_delay()),
                        cell(spec.doppler_order()),
                        cell(snr),
                        format!("{a_star:.6}"),
                    ]);
                }
                Analysis::Ber => {
                    let ber = LinkSimulator::new(spec, &alloc, &budget)?.run(
                        trials,
                        stream,
                        CsiMode::Estimated,
                    )?;
                    t.push(vec![
                        cell(snr),
                        cell(alpha),
                        cell(cfg.kind),
                        format!("{:.6e}", ber.ber),
                        format!("{:.6e}", ber.ci_low),
                        format!("{:.6e}", ber.ci_high),
                        cell(ber.bits),
                    ]);
                }
            }
        }
    }
    t.write(out.as_deref())?;
    if let Some(p) = &out {
        eprintln!("wrote {} rows to {}", t.len(), p.display());
    }
    Ok(())
}

pub fn cmd_validate(config: &Path) -> CliResult {
    let (cfg, _) = ExperimentConfig::load(config)?;
    let spec = &cfg.spec;
    let alloc = cfg.allocation();
    let fp = receiver_footprints(&alloc, spec)?;
    let a1 = validate_a1(&alloc, spec)?;
    let gram = gram_offdiag(&build_z(&alloc, &fp, spec)?);
    let p_p = alloc.pilot_power();
    let gram_ok = gram.is_scaled_identity(p_p, 1e-9 * p_p);
    println!(
        "scenario {}: {} on N = {}, M = {}, L = {}, Q = {}",
        cfg.scenario,
        cfg.kind,
        spec.n(),
        spec.m(),
        spec.max_delay(),
        spec.doppler_order()
    );
    println!(
        "K_p = {}, K_c = {}, R_p = {}, R_c = {}",
        alloc.k_p(),
        alloc.k_c(),
        fp.r_p(),
        fp.r_c()
    );
    println!(
        "{} pilot/data separation: pilot leakage {:.2e}, data leakage {:.2e}, footprints disjoint: {}",
        status(a1.passed()), a1.pilot_leakage, a1.comm_leakage, a1.footprints_disjoint
    );
    let (lo, hi) = gram
        .diagonal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &d| {
            (l.min(d), h.max(d))
        });
    println!(
        "{} pilot Gram: diagonal in [{lo:.12}, {hi:.12}] (P_p = {p_p}), max off-diagonal {:.2e}",
        status(gram_ok),
        gram.max_offdiag
    );
    if a1.passed() && gram_ok {
        Ok(())
    } else {
        Err(CliError::Tolerance(
            "allocation violates pilot/data separation or Gram diagonality".into(),
        ))
    }
}
