//! Pilot allocation, LMMSE channel estimation and pilot/data power splitting
//! for OTFS over CE-BEM doubly-selective channels.

pub mod capacity;
pub mod channel;
pub mod dd;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod linalg;
pub mod link;
pub mod modem;
pub mod pilot;
pub mod scenarios;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use types::{
    vec, vec_inv, BemCoefficients, ChannelSpec, DdGrid, PowerBudget, RngStream, DENSE_LIMIT,
};
