"""Smoke test for the otfs_pilot extension module.

Build and run:
    python python/build_ext.py && PYTHONPATH=python python python/smoke_test.py
"""

import cmath
import math
import random

import otfs_pilot as op


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    spec = op.ChannelSpec(21, 21, 6, 6)
    assert (spec.k, spec.num_taps) == (441, 49), spec

    rng = random.Random(0)
    grid = [[complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(spec.n)] for _ in range(spec.m)]
    back = op.demodulate(op.modulate(grid), spec.m, spec.n)
    assert all(close(a, b, 1e-12) for ra, rb in zip(grid, back) for a, b in zip(ra, rb))

    coeffs = [complex(rng.gauss(0, 0.1), rng.gauss(0, 0.1)) for _ in range(spec.num_taps)]
    dd = op.channel_response(grid, coeffs, spec)
    td = op.channel_response_time_domain(grid, coeffs, spec)
    err = max(abs(a - b) for ra, rb in zip(dd, td) for a, b in zip(ra, rb))
    assert err < 1e-10, err

    c = op.paths_to_coefficients([(1 + 0j, 2, -1), (0.5j, 0, 3)], spec)
    assert close(abs(c[spec.tap_index(2, -1)]), 1, 1e-12) and close(c[spec.tap_index(0, 3)], 0.5j, 1e-12)
    assert sum(abs(x) > 0 for x in c) == 2

    table1 = {"island": 0.7015, "doppler_slab": 0.7270, "delay_slab": 0.7270}
    for kind, n, m in [("island", 21, 21), ("doppler_slab", 7, 63), ("delay_slab", 63, 7)]:
        s = op.ChannelSpec(n, m, 6, 6)
        alloc = op.Allocation(kind, s)
        report = alloc.validate(s)
        assert report["passed"], report
        alpha, rho = op.optimal_alpha(s, kind, 20.0)
        assert abs(alpha - table1[kind]) < 0.005, (kind, alpha)
        print(f"{kind:>12}: K_p={alloc.k_p} K_c={alloc.k_c} alpha*={alpha:.4f} rho*={rho:.1f}")

    sigma2 = 1.0 / (441 * 10.0)
    closed = op.mse(spec, sigma2, 0.5)
    mean, se = op.mse_monte_carlo(spec, "island", 10.0, 0.5, 500, seed=1)
    assert abs(mean - closed) < 4 * se + 0.05 * closed, (mean, closed, se)

    cap, cap_se = op.capacity_lower_bound(spec, "island", 20.0, 0.7, 10, seed=1)
    assert 0 < cap < math.log2(1 + 1e4) and cap_se >= 0, cap
    ber, lo, hi, bits = op.bit_error_rate(spec, "island", 20.0, 0.7, 5, seed=1)
    assert 0 <= lo <= ber <= hi <= 1 and bits == 5 * 2 * 272, (ber, bits)

    [opt] = op.design(6, 2)
    assert (opt["kind"], opt["n"], opt["m"]) == ("delay_slab", 63, 7), opt

    try:
        op.ChannelSpec(21, 21, 6, 3)
    except ValueError as e:
        assert "even" in str(e)
    else:
        raise AssertionError("odd Q accepted")

    assert cmath.isclose(op.Allocation("island", spec).pilot_cells[0][1], 1)
    print(f"capacity {cap:.3f} ± {cap_se:.3f} bits/s/Hz, BER {ber:.2e}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
