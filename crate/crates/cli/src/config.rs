//! TOML experiment configuration.
//!
//! Top-level keys must precede the tables:
//!
//! ```toml
//! scenario = "channel1-island"
//! analysis = "capacity"          # mse | capacity | ber
//! seed = 0                       # default 0
//! trials = 100                   # default 100
//! log_base = "bits"              # bits | nats
//! alpha_grid = { start = 0.0, stop = 1.0, points = 21 }
//!
//! [channel]
//! N = 21
//! M = 21
//! L = 6
//! Q = 6
//!
//! [allocation]
//! kind = "island"
//!
//! [budget]
//! snr_tx_db = 20.0
//! ```

use std::fmt;
use std::path::PathBuf;

use otfs_core::capacity::LogBase;
use otfs_core::experiments::linspace;
use otfs_core::pilot::{make_allocation, Allocation, AllocationKind};
use otfs_core::ChannelSpec;
use serde::Deserialize;

/// A configuration problem, always naming the offending field or position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field_err(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Mse,
    Capacity,
    Ber,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub tap_variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSection {
    pub kind: AllocationKind,
    /// `[delay, doppler]` of the pilot.
    pub position: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub snr_tx_db: OneOrMany,
    pub total_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSnrSection {
    pub snr_p_db: f64,
    pub snr_c_db: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AlphaGrid {
    Range(GridSpec),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: String,
    pub analysis: Option<Analysis>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<PathBuf>,
    pub log_base: Option<LogBase>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<AlphaGrid>,
    pub optimize_alpha: Option<bool>,
    pub channel: ChannelSection,
    pub allocation: AllocationSection,
    pub budget: Option<BudgetSection>,
    pub symbol_snr: Option<SymbolSnrSection>,
}

/// How `α` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaChoice {
    Fixed(f64),
    Grid(Vec<f64>),
    Optimize,
}

/// Noise level: directly as `SNR_tx`, or via per-symbol SNRs.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerChoice {
    SnrTx {
        snr_tx_db: Vec<f64>,
        total_power: f64,
    },
    SymbolSnr {
        snr_p_db: f64,
        snr_c_db: f64,
    },
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: usize = 100;

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub analysis: Option<Analysis>,
    pub seed: u64,
    pub trials: usize,
    pub output: Option<PathBuf>,
    pub log_base: LogBase,
    pub alpha: AlphaChoice,
    pub power: PowerChoice,
    pub spec: ChannelSpec,
    pub kind: AllocationKind,
    pub position: Option<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
        Self::validate(raw)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let cfg =
            Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    fn validate(raw: RawConfig) -> Result<Self, ConfigError> {
        let alpha_keys = [
            raw.alpha.is_some(),
            raw.alpha_grid.is_some(),
            raw.optimize_alpha == Some(true),
        ];
        match alpha_keys.iter().filter(|b| **b).count() {
            0 => {
                return Err(field_err(
                    "alpha",
                    "specify exactly one of alpha, alpha_grid, optimize_alpha = true",
                ))
            }
            1 => {}
            _ => {
                return Err(field_err(
                    "alpha",
                    "alpha, alpha_grid and optimize_alpha are mutually exclusive",
                ))
            }
        }
        let alpha = if let Some(a) = raw.alpha {
            check_unit("alpha", a)?;
            AlphaChoice::Fixed(a)
        } else if let Some(grid) = &raw.alpha_grid {
            let values = match grid {
                AlphaGrid::Range(g) => {
                    if g.points == 0 {
                        return Err(field_err("alpha_grid.points", "must be at least 1"));
                    }
                    check_unit("alpha_grid.start", g.start)?;
                    check_unit("alpha_grid.stop", g.stop)?;
                    linspace(g.start, g.stop, g.points)
                }
                AlphaGrid::List(v) => {
                    if v.is_empty() {
                        return Err(field_err("alpha_grid", "must not be empty"));
                    }
                    for (i, a) in v.iter().enumerate() {
                        check_unit(&format!("alpha_grid[{i}]"), *a)?;
                    }
                    v.clone()
                }
            };
            AlphaChoice::Grid(values)
        } else {
            AlphaChoice::Optimize
        };

        let power = match (&raw.budget, &raw.symbol_snr) {
            (Some(b), None) => {
                let snr_tx_db = b.snr_tx_db.values();
                if snr_tx_db.is_empty() {
                    return Err(field_err("budget.snr_tx_db", "must not be empty"));
                }
                if let Some(v) = snr_tx_db.iter().find(|v| !v.is_finite()) {
                    return Err(field_err(
                        "budget.snr_tx_db",
                        format!("must be finite (got {v})"),
                    ));
                }
                let total_power = b.total_power.unwrap_or(1.0);
                if !(total_power > 0.0 && total_power.is_finite()) {
                    return Err(field_err(
                        "budget.total_power",
                        format!("must be positive (got {total_power})"),
                    ));
                }
                PowerChoice::SnrTx {
                    snr_tx_db,
                    total_power,
                }
            }
            (None, Some(s)) => PowerChoice::SymbolSnr {
                snr_p_db: s.snr_p_db,
                snr_c_db: s.snr_c_db,
            },
            (None, None) => {
                return Err(field_err(
                    "budget",
                    "specify exactly one of [budget] or [symbol_snr]",
                ))
            }
            (Some(_), Some(_)) => {
                return Err(field_err(
                    "budget",
                    "[budget] and [symbol_snr] are mutually exclusive",
                ))
            }
        };

        let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(field_err("trials", "must be at least 1"));
        }
        let ch = &raw.channel;
        let spec = match &ch.tap_variances {
            Some(v) => ChannelSpec::new(ch.n * ch.m, ch.n, ch.m, ch.l, ch.q, v.clone()),
            None => ChannelSpec::uniform(ch.n, ch.m, ch.l, ch.q),
        }
        .map_err(|e| field_err("channel", e))?;
        let position = raw.allocation.position.map(|p| (p[0], p[1]));
        if raw.allocation.kind == AllocationKind::Custom {
            return Err(field_err(
                "allocation.kind",
                "custom allocations cannot be configured from a file",
            ));
        }
        make_allocation(raw.allocation.kind, &spec, 1.0, position)
            .map_err(|e| field_err("allocation", e))?;

        Ok(Self {
            scenario: raw.scenario,
            analysis: raw.analysis,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            trials,
            output: raw.output,
            log_base: raw.log_base.unwrap_or_default(),
            alpha,
            power,
            spec,
            kind: raw.allocation.kind,
            position,
        })
    }

    /// Allocation with unit pilot power; callers rescale per budget.
    pub fn allocation(&self) -> Allocation {
        make_allocation(self.kind, &self.spec, 1.0, self.position).expect("validated at load")
    }
}

fn check_unit(field: &str, v: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(field_err(field, format!("must lie in [0, 1] (got {v})")));
    }
    Ok(())
}
