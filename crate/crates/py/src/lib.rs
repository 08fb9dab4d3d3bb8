//! Python bindings: channel specs, allocations, modulation, channel
//! responses, estimation, capacity, BER and design.

use otfs_core::capacity::{capacity_lower_bound_mc, optimize_alpha, AllocGeometry, LogBase};
use otfs_core::channel::{paths_to_cebem, DdPath, LtvChannel};
use otfs_core::dd::dd_response;
use otfs_core::estimation::{empirical_mse, mse_closed_form, TapPrior};
use otfs_core::link::ber_run;
use otfs_core::modem::{otfs_demodulate, otfs_modulate};
use otfs_core::pilot::{self, make_allocation, receiver_footprints, validate_a1, AllocationKind};
use otfs_core::{BemCoefficients, Complex64, DdGrid, RngStream};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: otfs_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kind(name: &str) -> PyResult<AllocationKind> {
    name.parse().map_err(err)
}

fn grid(rows: Vec<Vec<Complex64>>) -> PyResult<DdGrid> {
    DdGrid::from_rows(&rows).map_err(err)
}

fn rows(g: &DdGrid) -> Vec<Vec<Complex64>> {
    (0..g.rows())
        .map(|i| (0..g.cols()).map(|j| g[(i, j)]).collect())
        .collect()
}

/// Doubly-selective channel: `N` Doppler bins, `M` delay bins, maximum delay
/// `L`, even Doppler order `Q`.
#[pyclass(name = "ChannelSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChannelSpec(otfs_core::ChannelSpec);

#[pymethods]
impl PyChannelSpec {
    #[new]
    #[pyo3(signature = (n, m, l, q, tap_variances=None))]
    fn new(
        n: usize,
        m: usize,
        l: usize,
        q: usize,
        tap_variances: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let spec = match tap_variances {
            Some(v) => otfs_core::ChannelSpec::new(n * m, n, m, l, q, v),
            None => otfs_core::ChannelSpec::uniform(n, m, l, q),
        };
        spec.map(Self).map_err(err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }
    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }
    #[getter]
    fn l(&self) -> usize {
        self.0.max_delay()
    }
    #[getter]
    fn q(&self) -> usize {
        self.0.doppler_order()
    }
    #[getter]
    fn num_taps(&self) -> usize {
        self.0.num_taps()
    }
    #[getter]
    fn tap_variances(&self) -> Vec<f64> {
        self.0.tap_variances().to_vec()
    }

    /// Canonical coefficient index of tap `(l, q)`.
    fn tap_index(&self, l: usize, q: i64) -> PyResult<usize> {
        self.0.tap_index(l, q).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ChannelSpec(n={}, m={}, l={}, q={})",
            self.0.n(),
            self.0.m(),
            self.0.max_delay(),
            self.0.doppler_order()
        )
    }
}

/// Pilot/guard/data partition of the delay-Doppler grid.
#[pyclass(name = "Allocation", frozen)]
struct PyAllocation(pilot::Allocation);

#[pymethods]
impl PyAllocation {
    /// `kind` is `island`, `doppler_slab` or `delay_slab`; `position` is
    /// `(delay, doppler)` and defaults to the grid center.
    #[new]
    #[pyo3(signature = (kind, spec, pilot_power=1.0, position=None))]
    fn new(
        kind: &str,
        spec: &PyChannelSpec,
        pilot_power: f64,
        position: Option<(usize, usize)>,
    ) -> PyResult<Self> {
        make_allocation(self::kind(kind)?, &spec.0, pilot_power, position)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }
    #[getter]
    fn k_p(&self) -> usize {
        self.0.k_p()
    }
    #[getter]
    fn k_c(&self) -> usize {
        self.0.k_c()
    }
    #[getter]
    fn pilot_power(&self) -> f64 {
        self.0.pilot_power()
    }
    /// Column-major indices of the data cells.
    #[getter]
    fn comm_cells(&self) -> Vec<usize> {
        self.0.comm_cells().to_vec()
    }
    /// `(index, value)` of every nonzero pilot cell.
    #[getter]
    fn pilot_cells(&self) -> Vec<(usize, Complex64)> {
        self.0.pilot_cells().to_vec()
    }

    /// Pilot grid as `M` rows of `N` values.
    fn pilot_grid(&self) -> Vec<Vec<Complex64>> {
        rows(&self.0.pilot_grid())
    }

    /// Pilot/data separation report for `spec`.
    fn validate<'py>(&self, py: Python<'py>, spec: &PyChannelSpec) -> PyResult<Bound<'py, PyDict>> {
        let r = validate_a1(&self.0, &spec.0).map_err(err)?;
        let fp = receiver_footprints(&self.0, &spec.0).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("passed", r.passed())?;
        d.set_item("pilot_leakage", r.pilot_leakage)?;
        d.set_item("comm_leakage", r.comm_leakage)?;
        d.set_item("footprints_disjoint", r.footprints_disjoint)?;
        d.set_item("r_p", fp.r_p())?;
        d.set_item("r_c", fp.r_c())?;
        Ok(d)
    }
}

/// Time-domain OTFS frame from an `M × N` delay-Doppler grid.
#[pyfunction]
fn modulate(grid_rows: Vec<Vec<Complex64>>) -> PyResult<Vec<Complex64>> {
    otfs_modulate(&grid(grid_rows)?).map_err(err)
}

/// Inverse of `modulate`.
#[pyfunction]
fn demodulate(r: Vec<Complex64>, m: usize, n: usize) -> PyResult<Vec<Vec<Complex64>>> {
    otfs_demodulate(&r, m, n).map(|g| rows(&g)).map_err(err)
}

/// Noise-free delay-Doppler response to `grid_rows` for CE-BEM taps `coeffs`.
#[pyfunction]
fn channel_response(
    grid_rows: Vec<Vec<Complex64>>,
    coeffs: Vec<Complex64>,
    spec: &PyChannelSpec,
) -> PyResult<Vec<Vec<Complex64>>> {
    let c = BemCoefficients::new(&spec.0, coeffs).map_err(err)?;
    dd_response(&grid(grid_rows)?, &c, &spec.0)
        .map(|g| rows(&g))
        .map_err(err)
}

/// Time-domain response of the same channel (modulate, convolve,
/// demodulate).
#[pyfunction]
fn channel_response_time_domain(
    grid_rows: Vec<Vec<Complex64>>,
    coeffs: Vec<Complex64>,
    spec: &PyChannelSpec,
) -> PyResult<Vec<Vec<Complex64>>> {
    let c = BemCoefficients::new(&spec.0, coeffs).map_err(err)?;
    let ch = LtvChannel::from_bem(&spec.0, &c).map_err(err)?;
    let x = otfs_modulate(&grid(grid_rows)?).map_err(err)?;
    let y = ch.apply(&x).map_err(err)?;
    otfs_demodulate(&y, spec.0.m(), spec.0.n())
        .map(|g| rows(&g))
        .map_err(err)
}

/// CE-BEM coefficients of on-grid `(gain, delay, doppler)` paths.
#[pyfunction]
fn paths_to_coefficients(
    paths: Vec<(Complex64, usize, i64)>,
    spec: &PyChannelSpec,
) -> PyResult<Vec<Complex64>> {
    let paths: Vec<DdPath> = paths
        .into_iter()
        .map(|(gain, delay, doppler)| DdPath {
            gain,
            delay,
            doppler,
        })
        .collect();
    paths_to_cebem(&paths, &spec.0)
        .map(BemCoefficients::into_inner)
        .map_err(err)
}

fn budget(spec: &PyChannelSpec, snr_tx_db: f64, alpha: f64) -> PyResult<otfs_core::PowerBudget> {
    otfs_core::PowerBudget::from_snr_tx_db(snr_tx_db, spec.0.k(), alpha).map_err(err)
}

/// Closed-form LMMSE channel MSE.
#[pyfunction]
fn mse(spec: &PyChannelSpec, noise_variance: f64, pilot_power: f64) -> PyResult<f64> {
    let prior = TapPrior::from_spec(&spec.0, noise_variance).map_err(err)?;
    Ok(mse_closed_form(&prior, pilot_power))
}

/// Monte Carlo LMMSE MSE: `(mean, stderr)`.
#[pyfunction]
#[pyo3(signature = (spec, kind, snr_tx_db, alpha, trials, seed=0))]
fn mse_monte_carlo(
    py: Python<'_>,
    spec: &PyChannelSpec,
    kind: &str,
    snr_tx_db: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let b = budget(spec, snr_tx_db, alpha)?;
    let alloc = make_allocation(self::kind(kind)?, &spec.0, b.pilot_power(), None).map_err(err)?;
    let fp = receiver_footprints(&alloc, &spec.0).map_err(err)?;
    let est = py
        .detach(|| {
            empirical_mse(
                &alloc,
                &fp,
                &spec.0,
                b.noise_variance(),
                trials,
                RngStream::new(seed, 0),
            )
        })
        .map_err(err)?;
    Ok((est.mean, est.stderr))
}

/// Power split maximizing the effective SNR: `(alpha_star, rho_star)`.
#[pyfunction]
fn optimal_alpha(spec: &PyChannelSpec, kind: &str, snr_tx_db: f64) -> PyResult<(f64, f64)> {
    let alloc = make_allocation(self::kind(kind)?, &spec.0, 1.0, None).map_err(err)?;
    let geom = AllocGeometry::of(&alloc, &spec.0).map_err(err)?;
    let opt = optimize_alpha(&budget(spec, snr_tx_db, 0.5)?, &spec.0, geom).map_err(err)?;
    Ok((opt.alpha, opt.rho))
}

/// Monte Carlo capacity lower bound: `(mean, stderr)` in bits (or nats).
#[pyfunction]
#[pyo3(signature = (spec, kind, snr_tx_db, alpha, trials, seed=0, log_base="bits"))]
#[allow(clippy::too_many_arguments)]
fn capacity_lower_bound(
    py: Python<'_>,
    spec: &PyChannelSpec,
    kind: &str,
    snr_tx_db: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
    log_base: &str,
) -> PyResult<(f64, f64)> {
    let base: LogBase = log_base.parse().map_err(err)?;
    let b = budget(spec, snr_tx_db, alpha)?;
    let alloc = make_allocation(self::kind(kind)?, &spec.0, 1.0, None).map_err(err)?;
    let est = py
        .detach(|| {
            capacity_lower_bound_mc(
                alpha,
                &b,
                &spec.0,
                &alloc,
                trials,
                RngStream::new(seed, 0),
                base,
            )
        })
        .map_err(err)?;
    Ok((est.mean, est.stderr))
}

/// QPSK bit error rate with estimated CSI: `(ber, ci_low, ci_high, bits)`.
#[pyfunction]
#[pyo3(signature = (spec, kind, snr_tx_db, alpha, trials, seed=0))]
fn bit_error_rate(
    py: Python<'_>,
    spec: &PyChannelSpec,
    kind: &str,
    snr_tx_db: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64, u64)> {
    let b = budget(spec, snr_tx_db, alpha)?;
    let alloc = make_allocation(self::kind(kind)?, &spec.0, 1.0, None).map_err(err)?;
    let est = py
        .detach(|| {
            ber_run(
                &spec.0,
                &alloc,
                &b,
                trials,
                RngStream::new(seed, 0),
                otfs_core::capacity::CsiMode::Estimated,
            )
        })
        .map_err(err)?;
    Ok((est.ber, est.ci_low, est.ci_high, est.bits))
}

/// Lowest-overhead allocations for a channel, one dict per option.
#[pyfunction]
#[pyo3(signature = (l, q, k=None, snr_tx_db=20.0))]
fn design<'py>(
    py: Python<'py>,
    l: usize,
    q: usize,
    k: Option<usize>,
    snr_tx_db: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rec = otfs_core::experiments::design(l, q, k, snr_tx_db).map_err(err)?;
    rec.options
        .iter()
        .map(|o| {
            let d = PyDict::new(py);
            d.set_item("kind", o.kind.as_str())?;
            d.set_item("n", o.n)?;
            d.set_item("m", o.m)?;
            d.set_item("k_p", o.k_p)?;
            d.set_item("k_c", o.k_c)?;
            d.set_item("r_c", o.r_c)?;
            d.set_item("mse", o.mse_closed)?;
            d.set_item("alpha_star", o.alpha_star)?;
            d.set_item("rho_star", o.rho_star)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn otfs_pilot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelSpec>()?;
    m.add_class::<PyAllocation>()?;
    m.add_function(wrap_pyfunction!(modulate, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate, m)?)?;
    m.add_function(wrap_pyfunction!(channel_response, m)?)?;
    m.add_function(wrap_pyfunction!(channel_response_time_domain, m)?)?;
    m.add_function(wrap_pyfunction!(paths_to_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mse_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bit_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    Ok(())
}
