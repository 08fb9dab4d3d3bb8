//! Published simulation setups and their reported values.

use serde::Serialize;

use crate::error::Result;
use crate::pilot::AllocationKind;
use crate::types::ChannelSpec;

pub const TABLE_I_K: usize = 441;
pub const TABLE_I_SNR_TX_DB: f64 = 20.0;

/// One channel of the three-channel study with its per-allocation grids
/// `(N, M)` and reported optimal split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableIChannel {
    pub index: u8,
    pub l: usize,
    pub q: usize,
    pub entries: [(AllocationKind, usize, usize, f64); 3],
}

impl TableIChannel {
    pub fn entry(&self, kind: AllocationKind) -> Option<(usize, usize, f64)> {
        self.entries
            .iter()
            .find(|e| e.0 == kind)
            .map(|e| (e.1, e.2, e.3))
    }

    /// Uniform-variance spec on the grid used for `kind`.
    pub fn spec(&self, kind: AllocationKind) -> Result<ChannelSpec> {
        let (n, m, _) = self.entry(kind).unwrap_or((21, 21, f64::NAN));
        ChannelSpec::uniform(n, m, self.l, self.q)
    }
}

use AllocationKind::{DelaySlab, DopplerSlab, Island};

pub const TABLE_I: [TableIChannel; 3] = [
    TableIChannel {
        index: 1,
        l: 6,
        q: 6,
        entries: [
            (Island, 21, 21, 0.7015),
            (DopplerSlab, 7, 63, 0.7270),
            (DelaySlab, 63, 7, 0.7270),
        ],
    },
    TableIChannel {
        index: 2,
        l: 2,
        q: 8,
        entries: [
            (Island, 21, 21, 0.7834),
            (DopplerSlab, 9, 49, 0.7922),
            (DelaySlab, 147, 3, 0.7910),
        ],
    },
    TableIChannel {
        index: 3,
        l: 8,
        q: 2,
        entries: [
            (Island, 21, 21, 0.7834),
            (DopplerSlab, 3, 147, 0.7910),
            (DelaySlab, 49, 9, 0.7922),
        ],
    },
];

/// Channel order and grids of the embedded-pilot comparison.
pub const TABLE_II_L: usize = 6;
pub const TABLE_II_Q: usize = 2;

/// `(N, M)` per allocation for the embedded-pilot comparison.
pub fn table2_grid(kind: AllocationKind) -> (usize, usize) {
    match kind {
        DopplerSlab => (3, 686),
        DelaySlab => (294, 7),
        _ => (16, 128),
    }
}

pub fn table2_spec(kind: AllocationKind) -> Result<ChannelSpec> {
    let (n, m) = table2_grid(kind);
    ChannelSpec::uniform(n, m, TABLE_II_L, TABLE_II_Q)
}

/// Reported `(α*, C̲(α*))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimumPoint {
    pub alpha_star: f64,
    pub capacity: f64,
}

/// One row of the embedded-pilot comparison: symbol SNRs, the resulting
/// `SNR_tx` and `α`, and capacities at `α` and at each allocation's `α*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableIIRow {
    pub snr_p_db: f64,
    pub snr_c_db: f64,
    pub snr_tx_db: f64,
    pub alpha: f64,
    pub capacity_at_alpha: f64,
    pub island: OptimumPoint,
    pub doppler_slab: OptimumPoint,
    pub delay_slab: OptimumPoint,
}

impl TableIIRow {
    pub fn optimum(&self, kind: AllocationKind) -> OptimumPoint {
        match kind {
            DopplerSlab => self.doppler_slab,
            DelaySlab => self.delay_slab,
            _ => self.island,
        }
    }
}

const fn opt(alpha_star: f64, capacity: f64) -> OptimumPoint {
    OptimumPoint {
        alpha_star,
        capacity,
    }
}

pub const TABLE_II: [TableIIRow; 4] = [
    TableIIRow {
        snr_p_db: 50.0,
        snr_c_db: 20.0,
        snr_tx_db: 21.63,
        alpha: 0.6648,
        capacity_at_alpha: 3.9241,
        island: opt(0.9064, 4.1396),
        doppler_slab: opt(0.9072, 4.1728),
        delay_slab: opt(0.9072, 4.1774),
    },
    TableIIRow {
        snr_p_db: 60.0,
        snr_c_db: 20.0,
        snr_tx_db: 27.67,
        alpha: 0.1655,
        capacity_at_alpha: 4.0060,
        island: opt(0.9066, 5.4996),
        doppler_slab: opt(0.9074, 5.5495),
        delay_slab: opt(0.9075, 5.5582),
    },
    TableIIRow {
        snr_p_db: 50.0,
        snr_c_db: 25.0,
        snr_tx_db: 25.50,
        alpha: 0.8625,
        capacity_at_alpha: 5.0351,
        island: opt(0.9066, 5.0482),
        doppler_slab: opt(0.9073, 5.0930),
        delay_slab: opt(0.9074, 5.1011),
    },
    TableIIRow {
        snr_p_db: 60.0,
        snr_c_db: 25.0,
        snr_tx_db: 29.00,
        alpha: 0.3854,
        capacity_at_alpha: 5.0897,
        island: opt(0.9066, 5.7523),
        doppler_slab: opt(0.9074, 5.8057),
        delay_slab: opt(0.9075, 5.8146),
    },
];

/// MSE comparison geometry: `K = 441`, `L = Q = 8`.
pub const FIG6C_L: usize = 8;
pub const FIG6C_Q: usize = 8;

pub fn fig6c_spec(kind: AllocationKind) -> Result<ChannelSpec> {
    let (n, m) = match kind {
        DopplerSlab => (9, 49),
        DelaySlab => (49, 9),
        _ => (21, 21),
    };
    ChannelSpec::uniform(n, m, FIG6C_L, FIG6C_Q)
}
