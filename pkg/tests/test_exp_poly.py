"""
Closed forms in the Θᵃe^{iωΘ} basis.

The closed-form route must agree with the series route rational for
rational, reproduce the known low-order elements, and show why it cannot
be evaluated naively near Θ = 0.
"""

import math
from fractions import Fraction

import pytest

from backend.errors import ContractViolation, InvariantViolation
from backend.models.exp_poly import (
    ExpPoly, GaussianRational, ep_at_quarter_period, ep_convolve, ep_eval_naive, ep_to_series, ep_trig,
    laurent_to_float,
)
from backend.models.rational_series import taylor_trig
from backend.services.recurrence import compute_fg


# ============================================================================
# Helpers
# ============================================================================

def first_order_closed_form() -> ExpPoly:
    return (ep_convolve(ep_trig('sin2_2phi'), ep_trig('cos2_2phi'))
            + ep_convolve(ep_trig('cos2_2phi'), ep_trig('sin2_2phi')))


@pytest.fixture(scope='module')
def low_orders():
    return compute_fg(10, degree=16, crossover=10)


# ============================================================================
# Tests
# ============================================================================

class TestGaussianRational:

    def test_division(self):
        z = GaussianRational(1, 2) / GaussianRational(0, 1)
        assert z == GaussianRational(2, -1)

    def test_float_rejected(self):
        with pytest.raises(ContractViolation):
            GaussianRational.coerce(0.25)


class TestConvolution:
    """Exact convolution of closed forms"""

    def test_constants(self):
        result = ep_convolve(ExpPoly.monomial(0), ExpPoly.monomial(0))
        assert result == ExpPoly.monomial(1)

    def test_f1_closed_form(self):
        f1 = first_order_closed_form()
        expected = {
            0: (Fraction(0), Fraction(0), Fraction(-1, 16)),
            1: (Fraction(1, 2), Fraction(-1, 4), Fraction(0)),
        }
        assert f1.trig_form() == expected

    def test_f2_closed_form(self):
        f1 = first_order_closed_form()
        g1 = (ep_convolve(ep_trig('cos2_2phi'), ep_trig('cos2_2phi'))
              + ep_convolve(ep_trig('sin2_2phi'), ep_trig('sin2_2phi')))
        f2 = ep_convolve(f1, ep_trig('cos2_2phi')) + ep_convolve(g1, ep_trig('sin2_2phi'))
        form = f2.trig_form()
        assert form[2] == (Fraction(1, 4), Fraction(-1, 16), Fraction(0))
        assert form[1] == (Fraction(0), Fraction(0), Fraction(-3, 64))

    def test_reality_is_checked(self):
        broken = ExpPoly({(4, 0): GaussianRational(1)})
        with pytest.raises(InvariantViolation):
            broken.check_real()


class TestSeriesRoute:
    """Closed forms expanded about 0 equal the recurrence series"""

    def test_f0_matches_taylor_trig(self):
        assert ep_to_series(ep_trig('sin2_2phi'), 20) == taylor_trig('sin2_2phi', 20)

    @pytest.mark.parametrize('k', range(1, 11))
    def test_routes_agree(self, low_orders, k):
        pair = low_orders[k]
        cap = pair.f_series.cap
        assert ep_to_series(pair.f_closed, cap) == pair.f_series
        assert ep_to_series(pair.g_closed, cap) == pair.g_series

    @pytest.mark.parametrize('k', range(11))
    def test_closed_form_trace_identity(self, low_orders, k):
        pair = low_orders[k]
        assert pair.f_closed + pair.g_closed == ExpPoly.monomial(k, Fraction(1, math.factorial(k)))

    def test_f5_starts_at_seventh_power(self):
        pairs = compute_fg(5, degree=8, crossover=5)
        assert ep_to_series(pairs[5].f_closed, 13).leading_power() == 7

    def test_residual_imaginary_part_rejected(self):
        broken = ExpPoly({(4, 0): GaussianRational(1)})
        with pytest.raises(InvariantViolation):
            ep_to_series(broken, 3)


class TestEvaluation:
    """Naive float evaluation and the exact quarter-period value"""

    def test_f0_anywhere(self):
        for theta in (0.1, 0.7, 2.3):
            assert ep_eval_naive(ep_trig('sin2_2phi'), theta) == pytest.approx(math.sin(2 * theta) ** 2, abs=1e-15)

    def test_F1_at_quarter_period(self):
        assert ep_eval_naive(first_order_closed_form(), math.pi / 4, divisor=1) == pytest.approx(0.75, abs=1e-12)

    def test_F1_quarter_period_is_rational(self):
        assert ep_at_quarter_period(first_order_closed_form(), divisor=1) == {0: Fraction(3, 4)}

    def test_laurent_to_float(self):
        assert laurent_to_float({0: Fraction(1, 2), -1: Fraction(1, 4)}) == pytest.approx(0.5 + 1 / math.pi)

    def test_negative_powers_at_zero(self):
        with pytest.raises(ContractViolation):
            ep_eval_naive(first_order_closed_form(), 0.0, divisor=1)

    def test_cancellation_near_zero(self):
        pairs = compute_fg(5, degree=8, crossover=5)
        series = pairs[5].f_series.shift_down(5)
        theta = 1e-7
        naive = ep_eval_naive(pairs[5].f_closed, theta, divisor=5)
        accurate = float(series.evaluate(theta))
        assert abs(accurate) < 1e-10
        assert abs(naive - accurate) > 1e-3


class TestSerialization:

    def test_json_round_trip(self):
        f1 = first_order_closed_form()
        assert ExpPoly.from_json(f1.to_json()) == f1
