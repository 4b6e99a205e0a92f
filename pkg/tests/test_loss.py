import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cure.loss import (
    DerivBounds,
    LossSpec,
    derivative_bounds,
    eval_f,
    eval_f_d1,
    eval_f_d2,
    eval_f_d3,
    eval_h,
    eval_h_d1,
    eval_h_d2,
    eval_h_d3,
)

SPECS = [LossSpec(2.0, 4.0), LossSpec(2.5, 6.0), LossSpec(7.5, 15.0)]


# independent re-derivation of the three branches, used as the oracle for
# knot agreement and branch values
def branch_inner(x, s):
    return (x * x - 1) ** 2 / 4


def branch_mid(x, s):
    a, b = s.a, s.b
    h_a = (a * a - 1) ** 2 / 4
    hp_a, hpp_a = a**3 - a, 3 * a * a - 1
    t = abs(x) - a
    return h_a + hp_a * t + hpp_a / 2 * t**2 - hpp_a / (6 * (b - a)) * t**3


def branch_outer(x, s):
    a, b = s.a, s.b
    hp_a, hpp_a = a**3 - a, 3 * a * a - 1
    return branch_mid(b, s) + (hp_a + (b - a) / 2 * hpp_a) * (abs(x) - b)


class TestSpecValidation:
    def test_regime_enforced(self):
        with pytest.raises(ValueError):
            LossSpec(a=2.0, b=3.0)  # b < 2a
        with pytest.raises(ValueError):
            LossSpec(a=1.0, b=4.0)  # 2a < 4
        with pytest.raises(ValueError):
            LossSpec(a=2.0, b=4.0, lam=-0.5)

    def test_defaults(self):
        s = LossSpec()
        assert (s.a, s.b, s.lam) == (7.5, 15.0, 1.0)


class TestReferenceQuartic:
    def test_valleys(self):
        assert eval_h(1.0) == 0.0
        assert eval_h(-1.0) == 0.0
        assert eval_h(0.0) == 0.25
        assert eval_h(2.0) == 2.25

    def test_derivatives(self):
        assert eval_h_d1(2.0) == 6.0
        assert eval_h_d2(2.0) == 11.0
        assert eval_h_d3(2.0) == 12.0


class TestPiecewiseValues:
    def test_inner_region_is_quartic(self, tight_loss):
        assert eval_f(1.0, tight_loss) == 0.0
        assert eval_f(0.0, tight_loss) == 0.25

    def test_middle_branch_hand_value(self, tight_loss):
        # 2.25 + 6*1 + (11/2)*1 - (11/12)*1
        expected = 2.25 + 6.0 + 5.5 - 11.0 / 12.0
        assert eval_f(3.0, tight_loss) == pytest.approx(expected, rel=1e-12)

    def test_outer_branch_hand_value(self, tight_loss):
        f4 = 2.25 + 12.0 + 22.0 - 11.0 / 12.0 * 8.0
        assert eval_f(4.0, tight_loss) == pytest.approx(f4, rel=1e-12)
        assert eval_f(5.0, tight_loss) == pytest.approx(f4 + 17.0, rel=1e-12)

    def test_derivative_examples(self, tight_loss):
        assert eval_f_d1(1.0, tight_loss) == 0.0
        assert eval_f_d1(2.0, tight_loss) == 6.0
        assert eval_f_d2(5.0, tight_loss) == 0.0
        assert eval_f_d3(3.0, tight_loss) == -5.5  # -h''(2)/(b-a)

    def test_d3_at_knots_takes_inner_limit(self, tight_loss):
        assert eval_f_d3(2.0, tight_loss) == 12.0  # h'''(a)
        assert eval_f_d3(4.0, tight_loss) == -5.5  # middle-branch limit
        assert eval_f_d3(-2.0, tight_loss) == -12.0


class TestKnotContinuity:
    @pytest.mark.parametrize("spec", SPECS)
    def test_value_and_derivative_branches_agree_at_knots(self, spec):
        a, b = spec.a, spec.b
        for x, lo, hi in [(a, branch_inner, branch_mid), (b, branch_mid, branch_outer)]:
            assert abs(lo(x, spec) - hi(x, spec)) <= 1e-9 * max(1.0, abs(hi(x, spec)))
        # first and second derivatives via one-sided finite differences of the
        # adjacent branches
        eps = 1e-7
        for x in (a, b):
            d_lo = (eval_f(x, spec) - eval_f(x - eps, spec)) / eps
            d_hi = (eval_f(x + eps, spec) - eval_f(x, spec)) / eps
            assert abs(d_lo - d_hi) <= 1e-4 * max(1.0, abs(d_hi))
            assert abs(eval_f_d1(x - eps, spec) - eval_f_d1(x + eps, spec)) <= 1e-5 * max(
                1.0, abs(eval_f_d1(x, spec))
            )
            assert abs(eval_f_d2(x - eps, spec) - eval_f_d2(x + eps, spec)) <= 1e-5 * max(
                1.0, abs(eval_f_d2(x, spec))
            )

    @pytest.mark.parametrize("spec", SPECS)
    def test_exact_branch_agreement_at_knots(self, spec):
        # the implementation uses closed forms, so agreement at the knots is
        # exact up to rounding, much tighter than the 1e-9 contract
        a, b = spec.a, spec.b
        assert eval_f(a, spec) == pytest.approx(branch_mid(a, spec), rel=1e-12)
        assert eval_f(b, spec) == pytest.approx(branch_outer(b, spec), rel=1e-12)


class TestSymmetry:
    @pytest.mark.parametrize("spec", SPECS)
    def test_parity_on_random_points(self, spec):
        rng = np.random.default_rng(0)
        x = rng.uniform(-3 * spec.b, 3 * spec.b, size=10_000)
        np.testing.assert_array_equal(eval_f(-x, spec), eval_f(x, spec))
        np.testing.assert_array_equal(eval_f_d1(-x, spec), -eval_f_d1(x, spec))
        np.testing.assert_array_equal(eval_f_d2(-x, spec), eval_f_d2(x, spec))

    @given(st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_parity_property(self, x):
        spec = LossSpec(2.0, 4.0)
        assert eval_f(-x, spec) == eval_f(x, spec)
        assert eval_f_d1(-x, spec) == -eval_f_d1(x, spec)
        assert eval_f_d2(-x, spec) == eval_f_d2(x, spec)


def _fd_check(fn, dfn, spec, rng, n, step=1e-5, keepout=1e-3, rel=1e-6):
    """Central differences of fn match dfn at n random points away from knots."""
    x = rng.uniform(-2 * spec.b, 2 * spec.b, size=4 * n)
    dist = np.minimum(np.abs(np.abs(x) - spec.a), np.abs(np.abs(x) - spec.b))
    x = x[dist > keepout][:n]
    assert x.size >= n // 2
    fd = (fn(x + step, spec) - fn(x - step, spec)) / (2 * step)
    d = dfn(x, spec)
    err = np.abs(fd - d) / np.maximum(1.0, np.abs(d))
    assert err.max() <= rel, f"worst relative FD error {err.max()}"


class TestFiniteDifferences:
    @pytest.mark.parametrize("spec", SPECS)
    def test_first_derivative(self, spec):
        _fd_check(eval_f, eval_f_d1, spec, np.random.default_rng(1), 10_000)

    @pytest.mark.parametrize("spec", SPECS)
    def test_second_derivative(self, spec):
        _fd_check(eval_f_d1, eval_f_d2, spec, np.random.default_rng(2), 10_000)

    @pytest.mark.parametrize("spec", SPECS)
    def test_third_derivative(self, spec):
        _fd_check(eval_f_d2, eval_f_d3, spec, np.random.default_rng(3), 10_000)


class TestDerivativeBounds:
    def test_exact_suprema_tight_spec(self, tight_loss):
        b = derivative_bounds(tight_loss)
        assert b == DerivBounds(f1=17.0, f2=11.0, f3=12.0)

    @pytest.mark.parametrize("spec", SPECS)
    def test_bound_inequalities(self, spec):
        b = derivative_bounds(spec)
        assert b.f1 <= 2 * spec.a**2 * spec.b
        assert b.f2 <= 3 * spec.a**2
        assert b.f3 <= 6 * spec.a

    @pytest.mark.parametrize("spec", SPECS)
    def test_suprema_attained_on_grid(self, spec):
        x = np.linspace(-3 * spec.b, 3 * spec.b, 200_001)
        b = derivative_bounds(spec)
        assert np.abs(eval_f_d1(x, spec)).max() <= b.f1 * (1 + 1e-12)
        assert np.abs(eval_f_d2(x, spec)).max() <= b.f2 * (1 + 1e-12)
        assert np.abs(eval_f_d3(x, spec)).max() <= b.f3 * (1 + 1e-12)
        assert np.abs(eval_f_d1(x, spec)).max() == pytest.approx(b.f1, rel=1e-6)


class TestProximityBounds:
    @pytest.mark.parametrize("spec", SPECS)
    def test_derivative_proximity_to_quartic(self, spec):
        x = np.linspace(-10 * spec.b, 10 * spec.b, 100_001)
        outside = np.abs(x) >= spec.a
        d1_gap = np.abs(eval_f_d1(x, spec) - eval_h_d1(x))
        d2_gap = np.abs(eval_f_d2(x, spec) - eval_h_d2(x))
        assert np.all(d1_gap <= 7 * np.abs(x) ** 3 * outside + 1e-12)
        assert np.all(d2_gap <= 9 * x**2 * outside + 1e-12)
        # inside the inner region f coincides with h exactly
        inside = ~outside
        assert np.all(d1_gap[inside] == 0)
        assert np.all(d2_gap[inside] == 0)


class TestCoercivity:
    @pytest.mark.parametrize("spec", SPECS)
    def test_floor_beyond_outer_knot(self, spec):
        x = np.linspace(spec.b, 20 * spec.b, 50_001)
        fb = eval_f(spec.b, spec)
        vals = eval_f(x, spec)
        assert np.all(vals >= fb - 1e-12)
        assert np.all(eval_f(-x, spec) >= fb - 1e-12)

    @pytest.mark.parametrize("spec", SPECS)
    def test_nondecreasing_past_valley(self, spec):
        x = np.linspace(1.0, 20 * spec.b, 100_001)
        vals = eval_f(x, spec)
        assert np.all(np.diff(vals) >= -1e-12)
