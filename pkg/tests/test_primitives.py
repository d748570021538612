"""Step nets, bit machinery, squaring, products: exactness and parameters."""

import numpy as np
import pytest

from reluforge.netcore import evaluate, evaluate_batch, profile, NetworkError
from reluforge.primitives import (
    StepSpec,
    build_bit_lookup,
    build_bit_sum,
    build_monomial,
    build_multi_product,
    build_point_fitter,
    build_pow2_multiplier,
    build_product_general,
    build_product_unit,
    build_square,
    build_step_function,
    point_fitter_precision,
    tooth_count,
)


def step_oracle(x, levels, delta):
    """Piecewise definition: value k on [k/K, (k+1)/K - delta (except last)]."""
    for k in range(levels):
        hi = (k + 1) / levels - (delta if k <= levels - 2 else 0.0)
        if k / levels <= x <= hi:
            return float(k)
    return None  # inside a gap


class TestStepFunction:
    def test_small_example(self):
        spec = StepSpec(d=1, n=2, l=1, delta=1 / 8)
        assert spec.levels == 4
        net = build_step_function(spec)
        assert evaluate(net, [0.1])[0] == pytest.approx(0.0, abs=1e-9)
        assert evaluate(net, [0.30])[0] == pytest.approx(1.0, abs=1e-9)
        assert evaluate(net, [0.0])[0] == pytest.approx(0.0, abs=1e-9)

    def test_plateau_sweep_d1(self):
        spec = StepSpec(d=1, n=2, l=2, delta=1 / (3 * 16))
        net = build_step_function(spec)
        k_levels = spec.levels
        for k in range(k_levels):
            hi = (k + 1) / k_levels - (spec.delta if k <= k_levels - 2 else 0.0)
            xs = np.linspace(k / k_levels, hi, 64).reshape(-1, 1)
            got = evaluate_batch(net, xs)[:, 0]
            np.testing.assert_allclose(got, k, atol=1e-9)

    def test_plateau_sweep_d2(self):
        spec = StepSpec(d=2, n=4, l=2, delta=1 / (2 * 8))
        assert spec.levels == 8
        net = build_step_function(spec)
        for k in range(8):
            hi = (k + 1) / 8 - (spec.delta if k <= 6 else 0.0)
            xs = np.linspace(k / 8, hi, 64).reshape(-1, 1)
            got = evaluate_batch(net, xs)[:, 0]
            np.testing.assert_allclose(got, k, atol=1e-9)

    def test_inadmissible_delta_rejected(self):
        with pytest.raises(NetworkError):
            StepSpec(d=1, n=2, l=1, delta=0.1)

    def test_plateaus_exactly_flat(self):
        spec = StepSpec(d=1, n=2, l=1, delta=1 / 12)
        net = build_step_function(spec)
        rng = np.random.default_rng(31)
        for k in range(4):
            lo, hi = k / 4, (k + 1) / 4 - (spec.delta if k <= 2 else 0.0)
            vals = [evaluate(net, [x])[0] for x in rng.uniform(lo, hi, size=10)]
            assert max(vals) - min(vals) <= 1e-9


class TestPow2Multiplier:
    def test_scales_quarter(self):
        net = build_pow2_multiplier(3)
        assert evaluate(net, [0.25])[0] == pytest.approx(2.0)

    def test_negative_input(self):
        net = build_pow2_multiplier(1)
        assert evaluate(net, [-1.0])[0] == pytest.approx(-2.0)

    def test_profile(self):
        net = build_pow2_multiplier(5)
        p = profile(net)
        assert p.param_sup == 2.0
        assert p.width == 2
        assert p.depth == 6

    def test_is_linear_everywhere(self):
        rng = np.random.default_rng(32)
        net = build_pow2_multiplier(4)
        for x in rng.uniform(-10, 10, size=50):
            assert evaluate(net, [x])[0] == pytest.approx(16.0 * x, rel=1e-12)


class TestBitSum:
    def test_single_row_prefix(self):
        bits = np.zeros((4, 4))
        bits[0] = [1, 0, 1, 1]
        net = build_bit_sum(bits, 1, 4)
        assert evaluate(net, [0.0, 2.0])[0] == pytest.approx(2.0, abs=1e-6)

    def test_all_zero(self):
        net = build_bit_sum(np.zeros((2, 2)), 1, 2)
        for m in range(2):
            for t in range(2):
                assert evaluate(net, [m, t])[0] == pytest.approx(0.0, abs=1e-6)

    def test_all_ones(self):
        bits = np.ones((4, 4))
        net = build_bit_sum(bits, 1, 4)
        for m in range(4):
            for t in range(4):
                assert evaluate(net, [m, t])[0] == pytest.approx(t + 1, abs=1e-6)

    def test_exhaustive_random(self):
        rng = np.random.default_rng(33)
        for n, l in [(1, 2), (2, 2), (2, 3)]:
            rows = n * n * l
            bits = (rng.random((rows, l)) < 0.5).astype(float)
            net = build_bit_sum(bits, n, l)
            for m in range(rows):
                for t in range(l):
                    want = bits[m, : t + 1].sum()
                    got = evaluate(net, [float(m), float(t)])[0]
                    assert got == pytest.approx(want, abs=1e-6), (n, l, m, t)

    def test_parameters_stay_polynomial(self):
        rng = np.random.default_rng(34)
        n, l = 2, 12
        bits = (rng.random((n * n * l, l)) < 0.5).astype(float)
        net = build_bit_sum(bits, n, l)
        sup = profile(net).param_sup
        assert sup <= 4 * n * n * l  # polynomial budget
        assert sup < 2.0**l / 10.0  # nowhere near the unmodified blow-up

    def test_exponential_variant_blows_up(self):
        rng = np.random.default_rng(35)
        n, l = 1, 10
        bits = (rng.random((n * n * l, l)) < 0.5).astype(float)
        net = build_bit_sum(bits, n, l, exponential_variant=True)
        assert profile(net).param_sup >= 2.0**l
        # and it still computes the same prefix sums
        for m in range(n * n * l):
            for t in range(l):
                want = bits[m, : t + 1].sum()
                assert evaluate(net, [float(m), float(t)])[0] == pytest.approx(
                    want, abs=1e-6
                )


class TestBitLookup:
    def test_unit_vector(self):
        theta = np.zeros(16)
        theta[5] = 1.0
        net = build_bit_lookup(theta, 2, 2)
        for i in range(16):
            want = 1.0 if i == 5 else 0.0
            assert evaluate(net, [float(i)])[0] == pytest.approx(want, abs=1e-6)

    def test_all_zeros(self):
        net = build_bit_lookup(np.zeros(16), 2, 2)
        for i in range(16):
            assert evaluate(net, [float(i)])[0] == pytest.approx(0.0, abs=1e-6)

    def test_random_exhaustive(self):
        rng = np.random.default_rng(36)
        theta = (rng.random(16) < 0.5).astype(float)
        net = build_bit_lookup(theta, 2, 2)
        for i in range(16):
            assert evaluate(net, [float(i)])[0] == pytest.approx(
                theta[i], abs=1e-6
            )

    def test_l_equal_one(self):
        rng = np.random.default_rng(37)
        theta = (rng.random(4) < 0.5).astype(float)
        net = build_bit_lookup(theta, 2, 1)
        for i in range(4):
            assert evaluate(net, [float(i)])[0] == pytest.approx(theta[i], abs=1e-6)


class TestPointFitter:
    def test_zero_targets(self):
        net = build_point_fitter(np.zeros(16), 2, 2, s=1)
        for i in range(16):
            assert evaluate(net, [float(i)])[0] == pytest.approx(0.0, abs=1e-9)

    def test_one_targets(self):
        planes = point_fitter_precision(2, 2, 1)
        net = build_point_fitter(np.ones(16), 2, 2, s=1)
        for i in range(16):
            got = evaluate(net, [float(i)])[0]
            assert 1.0 - 2.0**-planes - 1e-9 <= got <= 1.0 + 1e-9

    def test_random_targets_error_bound(self):
        rng = np.random.default_rng(38)
        xi = rng.random(16)
        net = build_point_fitter(xi, 2, 2, s=1)
        errs = [abs(evaluate(net, [float(i)])[0] - xi[i]) for i in range(16)]
        assert max(errs) <= 1.0 / 16.0

    def test_output_clamped(self):
        rng = np.random.default_rng(39)
        xi = rng.random(16)
        net = build_point_fitter(xi, 2, 2, s=1)
        xs = rng.uniform(-20, 40, size=(2000, 1))
        out = evaluate_batch(net, xs)[:, 0]
        assert np.all(out >= -1e-12) and np.all(out <= 1.0 + 1e-12)

    def test_rejects_bad_targets(self):
        with pytest.raises(NetworkError):
            build_point_fitter([0.5] * 15, 2, 2, s=1)
        with pytest.raises(NetworkError):
            build_point_fitter([1.5] + [0.0] * 15, 2, 2, s=1)


class TestSquare:
    def test_endpoints_exact(self):
        net = build_square(2, 3)
        assert evaluate(net, [0.0])[0] == pytest.approx(0.0, abs=1e-12)
        assert evaluate(net, [1.0])[0] == pytest.approx(1.0, abs=1e-12)

    def test_midpoint_error(self):
        net = build_square(2, 3)
        assert abs(evaluate(net, [0.5])[0] - 0.25) <= 2.0**-3

    def test_grid_error_bound(self):
        for n, l in [(1, 2), (2, 3), (3, 2), (4, 2)]:
            net = build_square(n, l)
            xs = np.linspace(0, 1, 2001).reshape(-1, 1)
            err = np.max(np.abs(evaluate_batch(net, xs)[:, 0] - xs[:, 0] ** 2))
            assert err <= float(n) ** -l + 1e-12, (n, l, err)

    def test_error_quarters_per_depth_step(self):
        # teeth double per depth unit, so the error drops by exactly 4
        xs = np.linspace(0, 1, 4001).reshape(-1, 1)
        errs = []
        for l in range(1, 5):
            net = build_square(2, l)
            errs.append(np.max(np.abs(evaluate_batch(net, xs)[:, 0] - xs[:, 0] ** 2)))
        ratios = [errs[i] / errs[i + 1] for i in range(3)]
        for r in ratios:
            assert 2.0 <= r <= 8.0  # nominal halving, factor-4 slack

    def test_param_scale(self):
        for n in (1, 2, 3, 8, 20):
            k = tooth_count(n)
            assert (k - 1) * 2 ** (k - 1) + 1 <= n <= k * 2**k
            net = build_square(n, 2)
            assert profile(net).param_sup <= 2.0 ** (k + 1)


class TestProducts:
    def test_zero_factor(self):
        net = build_product_unit(2, 4)
        for y in np.linspace(0, 1, 11):
            assert abs(evaluate(net, [0.0, y])[0]) <= 6 * 2.0**-4

    def test_polarization_identity(self):
        x, y = 0.37, 0.81
        assert 2 * (((x + y) / 2) ** 2 - (x / 2) ** 2 - (y / 2) ** 2) == pytest.approx(
            x * y
        )

    def test_grid_error(self):
        net = build_product_unit(2, 4)
        g = np.linspace(0, 1, 41)
        pts = np.array([(x, y) for x in g for y in g])
        err = np.max(np.abs(evaluate_batch(net, pts)[:, 0] - pts[:, 0] * pts[:, 1]))
        assert err <= 6 * 2.0**-4

    def test_general_square_domain(self):
        net = build_product_general(2, 6, -2.0, 3.0)
        g = np.linspace(-2, 3, 31)
        pts = np.array([(x, y) for x in g for y in g])
        err = np.max(np.abs(evaluate_batch(net, pts)[:, 0] - pts[:, 0] * pts[:, 1]))
        assert err <= 6 * 25 * 2.0**-6 + 1e-9

    def test_general_rejects_bad_interval(self):
        with pytest.raises(NetworkError):
            build_product_general(2, 2, 1.0, 1.0)


class TestMultiProduct:
    def test_contains_zero(self):
        net = build_multi_product(3, 2, 3)
        assert abs(evaluate(net, [0.0, 0.7, 0.9])[0]) <= 0.1

    def test_all_ones(self):
        net = build_multi_product(3, 2, 3)
        assert evaluate(net, [1.0, 1.0, 1.0])[0] == pytest.approx(1.0, abs=0.1)

    def test_grid_error_and_depth_monotonicity(self):
        g = np.linspace(0, 1, 9)
        pts = np.array([(x, y, z) for x in g for y in g for z in g])
        want = pts[:, 0] * pts[:, 1] * pts[:, 2]
        errs = []
        for l in (1, 2, 3):
            net = build_multi_product(3, 2, l)
            errs.append(np.max(np.abs(evaluate_batch(net, pts)[:, 0] - want)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] <= 0.05


class TestMonomial:
    def test_identity_like(self):
        net = build_monomial((1,), 2, 3)
        for x in np.linspace(0, 1, 11):
            assert evaluate(net, [x])[0] == pytest.approx(x, abs=6 * 2.0**-3)

    def test_mixed_monomial(self):
        net = build_monomial((2, 1), 2, 4)
        got = evaluate(net, [0.5, 0.5])[0]
        assert got == pytest.approx(0.125, abs=0.05)

    def test_zero_alpha_constant_one(self):
        net = build_monomial((0, 0), 2, 2)
        rng = np.random.default_rng(40)
        for _ in range(10):
            x = rng.uniform(0, 1, size=2)
            assert evaluate(net, x)[0] == pytest.approx(1.0)

    def test_replication_parameters_are_unit(self):
        net = build_monomial((2, 1), 2, 2)
        first = net.layers[0]
        # the replication map contributes only 0/1 entries merged with
        # the product net's halving layer, so magnitudes stay <= 1
        assert np.max(np.abs(first.weights)) <= 1.0
