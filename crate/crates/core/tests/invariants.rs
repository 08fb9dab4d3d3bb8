use otfs_core::capacity::mismatch_bound_check;
use otfs_core::dd::dd_response;
use otfs_core::modem::{otfs_demodulate, otfs_modulate};
use otfs_core::pilot::{make_allocation, receiver_footprints, AllocationKind};
use otfs_core::scenarios::TABLE_I;
use otfs_core::{
    vec, vec_inv, BemCoefficients, ChannelSpec, Complex64, DdGrid, PowerBudget, RngStream,
};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn grid_and_spec() -> impl Strategy<Value = (ChannelSpec, DdGrid, Vec<Complex64>)> {
    (2usize..8, 2usize..8, 0usize..3, 0usize..2).prop_flat_map(|(m, n, l, half_q)| {
        let spec = ChannelSpec::uniform(n, m, l.min(m - 1), 2 * half_q).unwrap();
        let taps = spec.num_taps();
        (
            Just(spec),
            proptest::collection::vec(complex(), m * n)
                .prop_map(move |v| vec_inv(&v, m, n).unwrap()),
            proptest::collection::vec(complex(), taps),
        )
    })
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vec_round_trips((_, g, _) in grid_and_spec()) {
        let back = vec_inv(&vec(&g), g.rows(), g.cols()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn modulation_is_an_isometry((_, g, _) in grid_and_spec()) {
        let x = otfs_modulate(&g).unwrap();
        prop_assert!((energy(&x) - g.frobenius_sq()).abs() < 1e-10 * (1.0 + g.frobenius_sq()));
        let back = otfs_demodulate(&x, g.rows(), g.cols()).unwrap();
        for (a, b) in vec(&back).iter().zip(vec(&g).iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn response_is_linear_in_taps((spec, g, c) in grid_and_spec(), s in complex()) {
        let c1 = BemCoefficients::new(&spec, c.clone()).unwrap();
        let c2 = BemCoefficients::new(&spec, c.iter().map(|x| x * s).collect()).unwrap();
        let y1 = dd_response(&g, &c1, &spec).unwrap();
        let y2 = dd_response(&g, &c2, &spec).unwrap();
        for (a, b) in vec(&y1).iter().zip(vec(&y2).iter()) {
            prop_assert!((a * s - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_tap_preserves_energy((spec, g, _) in grid_and_spec(), pick in 0usize..64) {
        let taps: Vec<_> = spec.taps().collect();
        let (l, q) = taps[pick % taps.len()];
        let c = BemCoefficients::unit(&spec, l, q).unwrap();
        let y = dd_response(&g, &c, &spec).unwrap();
        prop_assert!((y.frobenius_sq() - g.frobenius_sq()).abs() < 1e-10 * (1.0 + g.frobenius_sq()));
    }
}

#[test]
fn allocations_partition_the_grid() {
    for ch in TABLE_I {
        for kind in AllocationKind::STANDARD {
            let spec = ch.spec(kind).unwrap();
            let alloc = make_allocation(kind, &spec, 1.0, None).unwrap();
            assert_eq!(alloc.k_p() + alloc.k_c(), spec.k());
            let fp = receiver_footprints(&alloc, &spec).unwrap();
            assert!(fp.is_disjoint());
            assert_eq!(fp.r_p(), spec.num_taps());
        }
    }
}

#[test]
fn mismatch_term_respects_its_bound() {
    let ch = &TABLE_I[0];
    let spec = ch.spec(AllocationKind::Island).unwrap();
    let alloc = make_allocation(AllocationKind::Island, &spec, 1.0, None).unwrap();
    let budget =
        PowerBudget::from_snr_tx_db(20.0, spec.k(), ch.entry(AllocationKind::Island).unwrap().2)
            .unwrap();
    // the bound is tight, so the sample maximum eigenvalue overshoots by
    // O(1/√trials): ~8% at 500 trials, ~1.3% at 8000
    let report = mismatch_bound_check(&alloc, &spec, &budget, 4000, RngStream::new(3, 0)).unwrap();
    assert!(report.passed(0.05), "{report:?}");
}
