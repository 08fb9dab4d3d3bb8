//! Guard-protected single-pilot allocations and their receive footprints.
//!
//! A pilot region of zero-valued guard cells surrounds one nonzero pilot so
//! that no channel shift `(l, q)` can mix pilot and data energy:
//!
//! | kind         | region            | grid requirement        | minimal `K_p`     |
//! |--------------|-------------------|-------------------------|-------------------|
//! | island       | `(2L+1)×(2Q+1)`   | `M ≥ 2L+1`, `N ≥ 2Q+1`  | `(2Q+1)(2L+1)`    |
//! | Doppler slab | `(2L+1)×N`        | `M ≥ 2L+1`, `N ≥ Q+1`   | `(Q+1)(2L+1)`     |
//! | delay slab   | `M×(2Q+1)`        | `M ≥ L+1`, `N ≥ 2Q+1`   | `(2Q+1)(L+1)`     |
//!
//! Slabs wrap around a whole grid axis, which is why their guards can be
//! smaller; the minimal slab sets `N = Q+1` (Doppler) or `M = L+1` (delay).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd::{build_dd_channel_with, DdKernel};
use crate::error::{Error, Result};
use crate::linalg::zero;
use crate::types::{BemCoefficients, ChannelSpec, DdGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationKind {
    Island,
    DopplerSlab,
    DelaySlab,
    /// Hand-built region; no geometry guarantees.
    Custom,
}

impl AllocationKind {
    pub const STANDARD: [AllocationKind; 3] = [
        AllocationKind::Island,
        AllocationKind::DopplerSlab,
        AllocationKind::DelaySlab,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AllocationKind::Island => "island",
            AllocationKind::DopplerSlab => "doppler_slab",
            AllocationKind::DelaySlab => "delay_slab",
            AllocationKind::Custom => "custom",
        }
    }
}

impl fmt::Display for AllocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "island" => Ok(Self::Island),
            "doppler_slab" | "doppler" => Ok(Self::DopplerSlab),
            "delay_slab" | "delay" => Ok(Self::DelaySlab),
            other => Err(Error::InvalidArgument(format!(
                "unknown allocation kind '{other}' (expected island, doppler_slab or delay_slab)"
            ))),
        }
    }
}

/// Minimum pilot overhead `K_p` of each allocation kind.
pub fn pilot_overhead(kind: AllocationKind, l: usize, q: usize) -> usize {
    match kind {
        AllocationKind::Island => (2 * q + 1) * (2 * l + 1),
        AllocationKind::DopplerSlab => (q + 1) * (2 * l + 1),
        AllocationKind::DelaySlab => (2 * q + 1) * (l + 1),
        AllocationKind::Custom => 0,
    }
}

/// Transmit-side pilot/data partition of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    kind: AllocationKind,
    m: usize,
    n: usize,
    region: Vec<usize>,
    pilots: Vec<(usize, Complex64)>,
    comm: Vec<usize>,
}

/// Serializable description of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDescriptor {
    pub kind: AllocationKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Pilot cell as `[delay, doppler]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[usize; 2]>,
    pub pilot_power: f64,
}

fn geometry_error(kind: AllocationKind, msg: String) -> Error {
    Error::Geometry(format!("{kind}: {msg}"))
}

/// Builds a single-pilot allocation with pilot value `√P_p` at `position`
/// (`(delay, doppler)`, default grid center) and guards around it.
pub fn make_allocation(
    kind: AllocationKind,
    spec: &ChannelSpec,
    pilot_power: f64,
    position: Option<(usize, usize)>,
) -> Result<Allocation> {
    let (m, n) = (spec.m(), spec.n());
    let (l, q) = (spec.max_delay(), spec.doppler_order());
    if !(pilot_power >= 0.0 && pilot_power.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pilot power must be non-negative (got {pilot_power})"
        )));
    }
    let (m0, n0) = position.unwrap_or((m / 2, n / 2));
    if m0 >= m || n0 >= n {
        return Err(Error::OutOfRange {
            what: "pilot position",
            value: (m0 + n0 * m) as i64,
            range: format!("{m}×{n} grid"),
        });
    }
    let need = |ok: bool, msg: String| {
        if ok {
            Ok(())
        } else {
            Err(geometry_error(kind, msg))
        }
    };
    let (rows, cols): (Vec<usize>, Vec<usize>) = match kind {
        AllocationKind::Island => {
            need(
                m > 2 * l,
                format!("requires M ≥ 2L+1 = {} (M = {m})", 2 * l + 1),
            )?;
            need(
                n > 2 * q,
                format!("requires N ≥ 2Q+1 = {} (N = {n})", 2 * q + 1),
            )?;
            (around(m0, l, m), around(n0, q, n))
        }
        AllocationKind::DopplerSlab => {
            need(
                m > 2 * l,
                format!("requires M ≥ 2L+1 = {} (M = {m})", 2 * l + 1),
            )?;
            need(n > q, format!("requires N ≥ Q+1 = {} (N = {n})", q + 1))?;
            (around(m0, l, m), (0..n).collect())
        }
        AllocationKind::DelaySlab => {
            need(m > l, format!("requires M ≥ L+1 = {} (M = {m})", l + 1))?;
            need(
                n > 2 * q,
                format!("requires N ≥ 2Q+1 = {} (N = {n})", 2 * q + 1),
            )?;
            ((0..m).collect(), around(n0, q, n))
        }
        AllocationKind::Custom => {
            return Err(Error::InvalidArgument(
                "custom allocations are built with Allocation::custom".into(),
            ))
        }
    };
    let region: BTreeSet<usize> = cols
        .iter()
        .flat_map(|&c| rows.iter().map(move |&r| r + c * m))
        .collect();
    let pilot = (m0 + n0 * m, Complex64::new(pilot_power.sqrt(), 0.0));
    Ok(Allocation::assemble(kind, m, n, region, vec![pilot]))
}

// Indices center-radius..=center+radius, wrapped.
fn around(center: usize, radius: usize, len: usize) -> Vec<usize> {
    (0..=2 * radius)
        .map(|i| (center + len * (radius + 1) + i - radius) % len)
        .collect()
}

impl Allocation {
    fn assemble(
        kind: AllocationKind,
        m: usize,
        n: usize,
        region: BTreeSet<usize>,
        pilots: Vec<(usize, Complex64)>,
    ) -> Self {
        let comm = (0..m * n).filter(|i| !region.contains(i)).collect();
        Self {
            kind,
            m,
            n,
            region: region.into_iter().collect(),
            pilots,
            comm,
        }
    }

    /// Arbitrary region and pilot values; cells are `(delay, doppler)`.
    pub fn custom(
        spec: &ChannelSpec,
        region: &[(usize, usize)],
        pilots: &[((usize, usize), Complex64)],
    ) -> Result<Self> {
        let (m, n) = (spec.m(), spec.n());
        let idx = |(r, c): (usize, usize)| -> Result<usize> {
            if r >= m || c >= n {
                return Err(Error::OutOfRange {
                    what: "cell",
                    value: (r + c * m) as i64,
                    range: format!("{m}×{n} grid"),
                });
            }
            Ok(r + c * m)
        };
        let region: BTreeSet<usize> = region.iter().map(|&c| idx(c)).collect::<Result<_>>()?;
        let mut pilot_cells = Vec::new();
        for &(cell, v) in pilots {
            let i = idx(cell)?;
            if !region.contains(&i) {
                return Err(Error::Geometry(format!(
                    "pilot cell {cell:?} lies outside the pilot region"
                )));
            }
            pilot_cells.push((i, v));
        }
        pilot_cells.sort_by_key(|p| p.0);
        Ok(Self::assemble(
            AllocationKind::Custom,
            m,
            n,
            region,
            pilot_cells,
        ))
    }

    /// Rotates every pilot value by `e^{jφ}`.
    pub fn with_pilot_phase(mut self, phase: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phase);
        for p in &mut self.pilots {
            p.1 *= rot;
        }
        self
    }

    /// Rescales pilot values to total power `p_p`, keeping their phases and
    /// relative amplitudes.
    pub fn with_pilot_power(mut self, p_p: f64) -> Self {
        let current = self.pilot_power();
        if current > 0.0 {
            let s = (p_p / current).sqrt();
            for p in &mut self.pilots {
                p.1 *= s;
            }
        } else if let Some(first) = self.pilots.first_mut() {
            first.1 = Complex64::new(p_p.sqrt(), 0.0);
        }
        self
    }

    pub fn kind(&self) -> AllocationKind {
        self.kind
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Vec indices of the `K_p` pilot-region cells (guards and pilots).
    pub fn pilot_region(&self) -> &[usize] {
        &self.region
    }

    /// Vec indices and values of the nonzero pilot cells.
    pub fn pilot_cells(&self) -> &[(usize, Complex64)] {
        &self.pilots
    }

    /// Vec indices of the `K_c` data cells (`Φ_c`).
    pub fn comm_cells(&self) -> &[usize] {
        &self.comm
    }

    pub fn k_p(&self) -> usize {
        self.region.len()
    }

    pub fn k_c(&self) -> usize {
        self.comm.len()
    }

    pub fn pilot_power(&self) -> f64 {
        self.pilots.iter().map(|p| p.1.norm_sqr()).sum()
    }

    /// `s_p` aligned with [`pilot_region`](Self::pilot_region).
    pub fn pilot_vector(&self) -> Vec<Complex64> {
        self.region
            .iter()
            .map(|i| {
                self.pilots
                    .iter()
                    .find(|p| p.0 == *i)
                    .map_or(zero(), |p| p.1)
            })
            .collect()
    }

    /// `S_p`: pilot values on an otherwise empty grid.
    pub fn pilot_grid(&self) -> DdGrid {
        let mut g = DdGrid::zeros(self.m, self.n);
        for &(i, v) in &self.pilots {
            g.as_mut_slice()[i] = v;
        }
        g
    }

    pub fn descriptor(&self) -> AllocationDescriptor {
        AllocationDescriptor {
            kind: self.kind,
            n: self.n,
            m: self.m,
            position: self.pilots.first().map(|p| [p.0 % self.m, p.0 / self.m]),
            pilot_power: self.pilot_power(),
        }
    }

    pub fn from_descriptor(desc: &AllocationDescriptor, spec: &ChannelSpec) -> Result<Self> {
        if desc.n != spec.n() || desc.m != spec.m() {
            return Err(Error::Geometry(format!(
                "descriptor grid {}×{} (N×M) does not match spec {}×{}",
                desc.n,
                desc.m,
                spec.n(),
                spec.m()
            )));
        }
        make_allocation(
            desc.kind,
            spec,
            desc.pilot_power,
            desc.position.map(|p| (p[0], p[1])),
        )
    }

    fn check_spec(&self, spec: &ChannelSpec) -> Result<()> {
        if spec.m() != self.m || spec.n() != self.n {
            return Err(Error::Dimension {
                expected: self.m * self.n,
                actual: spec.k(),
            });
        }
        Ok(())
    }
}

/// Receive-side index sets: cells hit by pilot energy (`Ψ_p`, `R_p` cells)
/// and by data energy (`Ψ_c`, `R_c` cells). Cells hit by neither carry only
/// noise and belong to neither set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverFootprint {
    pub pilot_obs: Vec<usize>,
    pub comm_obs: Vec<usize>,
}

impl ReceiverFootprint {
    pub fn r_p(&self) -> usize {
        self.pilot_obs.len()
    }

    pub fn r_c(&self) -> usize {
        self.comm_obs.len()
    }

    pub fn overlap(&self) -> Vec<usize> {
        let comm: BTreeSet<_> = self.comm_obs.iter().collect();
        self.pilot_obs
            .iter()
            .filter(|i| comm.contains(i))
            .copied()
            .collect()
    }

    pub fn is_disjoint(&self) -> bool {
        self.overlap().is_empty()
    }
}

pub fn receiver_footprints(alloc: &Allocation, spec: &ChannelSpec) -> Result<ReceiverFootprint> {
    alloc.check_spec(spec)?;
    let kernel = DdKernel::new(spec);
    let image = |cells: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut set = BTreeSet::new();
        for cell in cells {
            for tap in 0..kernel.num_taps() {
                set.insert(kernel.target(tap, cell));
            }
        }
        set.into_iter().collect()
    };
    Ok(ReceiverFootprint {
        pilot_obs: image(&mut alloc.pilot_cells().iter().map(|p| p.0)),
        comm_obs: image(&mut alloc.comm_cells().iter().copied()),
    })
}

/// Result of the pilot/data no-overlap check.
#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    /// `max |Ψ_c^H H_DD Φ_p|` over columns carrying a nonzero pilot.
    pub pilot_leakage: f64,
    /// `max |Ψ_p^H H_DD Φ_c|`.
    pub comm_leakage: f64,
    pub footprints_disjoint: bool,
    /// Offending `(received vec index, transmitted vec index)` pairs.
    pub violations: Vec<(usize, usize)>,
}

impl A1Report {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.pilot_leakage < Self::TOLERANCE
            && self.comm_leakage < Self::TOLERANCE
            && self.footprints_disjoint
    }
}

/// Checks the no-overlap condition on a dense `H_DD` built with all-ones
/// coefficients, which exposes every possible nonzero.
pub fn validate_a1(alloc: &Allocation, spec: &ChannelSpec) -> Result<A1Report> {
    let ones = BemCoefficients::new(spec, vec![Complex64::new(1.0, 0.0); spec.num_taps()])?;
    validate_a1_with(alloc, spec, &ones)
}

/// Same check for a specific coefficient realization.
pub fn validate_a1_with(
    alloc: &Allocation,
    spec: &ChannelSpec,
    c: &BemCoefficients,
) -> Result<A1Report> {
    let fp = receiver_footprints(alloc, spec)?;
    let hdd = build_dd_channel_with(&DdKernel::new(spec), c.as_slice())?;
    let h = hdd.matrix();
    let mut violations = Vec::new();
    let mut pilot_leakage = 0.0f64;
    for &(col, _) in alloc.pilot_cells() {
        for &row in &fp.comm_obs {
            let v = h[(row, col)].norm();
            pilot_leakage = pilot_leakage.max(v);
            if v >= A1Report::TOLERANCE {
                violations.push((row, col));
            }
        }
    }
    let mut comm_leakage = 0.0f64;
    for &col in alloc.comm_cells() {
        for &row in &fp.pilot_obs {
            let v = h[(row, col)].norm();
            comm_leakage = comm_leakage.max(v);
            if v >= A1Report::TOLERANCE {
                violations.push((row, col));
            }
        }
    }
    Ok(A1Report {
        pilot_leakage,
        comm_leakage,
        footprints_disjoint: fp.is_disjoint(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_formulas() {
        assert_eq!(pilot_overhead(AllocationKind::Island, 2, 2), 25);
        assert_eq!(pilot_overhead(AllocationKind::DopplerSlab, 2, 2), 15);
        assert_eq!(pilot_overhead(AllocationKind::DelaySlab, 2, 2), 15);
        assert_eq!(pilot_overhead(AllocationKind::Island, 6, 6), 169);
        for kind in AllocationKind::STANDARD {
            assert_eq!(pilot_overhead(kind, 0, 0), 1);
        }
        for l in 0..6 {
            for q in (0..8).step_by(2) {
                assert_eq!(
                    pilot_overhead(AllocationKind::DopplerSlab, l, q),
                    pilot_overhead(AllocationKind::DelaySlab, q, l)
                );
            }
        }
    }

    #[test]
    fn minimal_allocations_have_formula_overhead() {
        let island = make_allocation(
            AllocationKind::Island,
            &ChannelSpec::uniform(21, 21, 2, 2).unwrap(),
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(island.k_p(), 25);
        let dslab = make_allocation(
            AllocationKind::DopplerSlab,
            &ChannelSpec::uniform(3, 147, 2, 2).unwrap(),
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(dslab.k_p(), 15);
        let lslab = make_allocation(
            AllocationKind::DelaySlab,
            &ChannelSpec::uniform(147, 3, 2, 2).unwrap(),
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(lslab.k_p(), 15);
        for a in [&island, &dslab, &lslab] {
            assert_eq!(a.k_p() + a.k_c(), 441);
            assert!((a.pilot_power() - 1.0).abs() < 1e-15);
            assert_eq!(a.pilot_cells().len(), 1);
        }
    }

    #[test]
    fn geometry_violations_name_the_bound() {
        let spec = ChannelSpec::uniform(2, 63, 2, 2).unwrap();
        let err = make_allocation(AllocationKind::DopplerSlab, &spec, 1.0, None).unwrap_err();
        assert!(err.to_string().contains("N ≥ Q+1"), "{err}");
        let spec = ChannelSpec::uniform(5, 2, 2, 2).unwrap();
        let err = make_allocation(AllocationKind::DelaySlab, &spec, 1.0, None).unwrap_err();
        assert!(err.to_string().contains("M ≥ L+1"), "{err}");
        let spec = ChannelSpec::uniform(21, 4, 2, 2).unwrap();
        assert!(make_allocation(AllocationKind::Island, &spec, 1.0, None).is_err());
    }

    #[test]
    fn island_footprint_counts() {
        let spec = ChannelSpec::uniform(21, 21, 2, 2).unwrap();
        let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, None).unwrap();
        let fp = receiver_footprints(&alloc, &spec).unwrap();
        assert_eq!(fp.r_p(), 9);
        assert!(fp.is_disjoint());
        assert!(fp.r_c() >= alloc.k_c());
    }

    #[test]
    fn lti_single_tap_footprints_equal_masks() {
        let spec = ChannelSpec::uniform(4, 5, 0, 0).unwrap();
        let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, Some((1, 2))).unwrap();
        let fp = receiver_footprints(&alloc, &spec).unwrap();
        assert_eq!(fp.pilot_obs, vec![1 + 2 * 5]);
        assert_eq!(fp.comm_obs, alloc.comm_cells());
        assert_eq!(fp.r_c(), alloc.k_c());
        assert!(validate_a1(&alloc, &spec).unwrap().passed());
    }

    #[test]
    fn minimal_doppler_slab_pilot_fills_shift_image() {
        let spec = ChannelSpec::uniform(3, 147, 2, 2).unwrap();
        let alloc = make_allocation(AllocationKind::DopplerSlab, &spec, 1.0, None).unwrap();
        let fp = receiver_footprints(&alloc, &spec).unwrap();
        let m0 = 147 / 2;
        let mut expected: Vec<usize> = (0..3)
            .flat_map(|n| (m0..=m0 + 2).map(move |m| m + n * 147))
            .collect();
        expected.sort();
        assert_eq!(fp.pilot_obs, expected);
        assert!(fp.is_disjoint());
    }

    #[test]
    fn partition_covers_grid() {
        let spec = ChannelSpec::uniform(9, 49, 2, 8).unwrap();
        let alloc = make_allocation(AllocationKind::DopplerSlab, &spec, 0.3, Some((0, 4))).unwrap();
        let mut all: Vec<usize> = alloc
            .pilot_region()
            .iter()
            .chain(alloc.comm_cells())
            .copied()
            .collect();
        all.sort();
        assert_eq!(all, (0..441).collect::<Vec<_>>());
    }

    #[test]
    fn shrunk_guard_violates_a1() {
        let spec = ChannelSpec::uniform(21, 21, 2, 2).unwrap();
        let (m0, n0) = (10, 10);
        let region: Vec<(usize, usize)> = (m0 - 1..=m0 + 2)
            .flat_map(|m| (n0 - 2..=n0 + 2).map(move |n| (m, n)))
            .collect();
        let alloc =
            Allocation::custom(&spec, &region, &[((m0, n0), Complex64::new(1.0, 0.0))]).unwrap();
        let report = validate_a1(&alloc, &spec).unwrap();
        assert!(!report.passed());
        assert!(report.comm_leakage > 0.5);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn kind_parsing_and_descriptor() {
        assert_eq!(
            "doppler-slab".parse::<AllocationKind>().unwrap(),
            AllocationKind::DopplerSlab
        );
        assert!("ring".parse::<AllocationKind>().is_err());
        let spec = ChannelSpec::uniform(9, 49, 2, 8).unwrap();
        let alloc =
            make_allocation(AllocationKind::DopplerSlab, &spec, 0.25, Some((3, 1))).unwrap();
        let desc = alloc.descriptor();
        assert_eq!(desc.position, Some([3, 1]));
        assert_eq!(Allocation::from_descriptor(&desc, &spec).unwrap(), alloc);
        let text = toml::to_string(&desc).unwrap();
        let back: AllocationDescriptor = toml::from_str(&text).unwrap();
        assert_eq!(back, desc);
    }
}
