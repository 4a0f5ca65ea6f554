"""
Independent oracles: direct quadrature of the diagrammatic integral,
finite-n error-placement sums, and the validation report.
"""

import math

import numpy as np
import pytest

from backend.errors import ContractViolation, QuadratureError
from backend.models.domain_models import QuadratureSpec, SimConfig
from backend.services import noisy_grover_sim as sim
from backend.services.oracle_validate import (
    KNOWN_CLOSED_FORMS, Fk_quadrature_estimate, ValidationReport, _check_finite_n, _check_quarter_period,
    _check_quadrature_honesty, _check_routes, diagram_integrand, diagram_weight, direct_Fk_quadrature,
    finite_n_Tk, normalized_trig_form, run_validation_suite, t1_contributions,
)


def iterations_for(n: int, theta_target: float) -> int:
    """M with (M + ½)θ closest to the target Θ"""
    return max(1, round(theta_target / sim.boyer_angle(n) - 0.5))


def single_error_gap(table, n: int, m: int) -> float:
    theta, _ = sim.map_finite_n(m, n, 0.0)
    return abs(finite_n_Tk(n, m, 1) - float(table.F[1].evaluate(theta)))


class TestDiagramRule:

    def test_single_error_integrand(self):
        theta, phi = 0.9, 0.35
        expected = (math.sin(2 * phi) ** 2 * math.cos(2 * (theta - phi)) ** 2
                    + math.cos(2 * phi) ** 2 * math.sin(2 * (theta - phi)) ** 2)
        assert diagram_integrand(1, theta)(phi) == pytest.approx(expected, abs=1e-15)

    def test_weight_is_a_square(self):
        assert diagram_weight((1, 0, 1), (0.1, 0.2, 0.3), 1.0) >= 0.0


class TestQuadrature:
    """Direct k-fold quadrature against the exact values"""

    def test_F1_at_quarter_period(self):
        assert direct_Fk_quadrature(QuadratureSpec(k=1, theta=math.pi / 4)) == pytest.approx(0.75, abs=1e-8)

    def test_F2_at_quarter_period(self):
        assert direct_Fk_quadrature(QuadratureSpec(k=2, theta=math.pi / 4)) == pytest.approx(5 / 16, abs=1e-8)

    @pytest.mark.parametrize('theta', [0.3, 1.0])
    def test_F2_against_series(self, table, theta):
        quad = direct_Fk_quadrature(QuadratureSpec(k=2, theta=theta, tol=1e-9))
        assert quad == pytest.approx(float(table.F[2].evaluate(theta)), abs=1e-7)

    @pytest.mark.slow
    @pytest.mark.parametrize('theta', [0.3, math.pi / 4, 1.0])
    def test_F3_against_series(self, table, theta):
        quad = direct_Fk_quadrature(QuadratureSpec(k=3, theta=theta, tol=1e-9))
        assert quad == pytest.approx(float(table.F[3].evaluate(theta)), abs=1e-7)

    @pytest.mark.parametrize('k', [1, 2])
    @pytest.mark.parametrize('theta', [0.3, math.pi / 4, 1.0])
    def test_error_estimate_covers_tightening(self, k, theta):
        coarse, error = Fk_quadrature_estimate(QuadratureSpec(k=k, theta=theta, tol=1e-8))
        fine, _ = Fk_quadrature_estimate(QuadratureSpec(k=k, theta=theta, tol=5e-9))
        assert 0.0 <= error <= 1e-8
        assert abs(fine - coarse) <= error + 1e-13

    def test_unreachable_tolerance(self):
        with pytest.raises(QuadratureError) as excinfo:
            direct_Fk_quadrature(QuadratureSpec(k=1, theta=0.5, tol=1e-30))
        assert excinfo.value.estimate == pytest.approx(0.0, abs=1.0)
        assert excinfo.value.error_estimate > 1e-30

    def test_order_limited_to_three(self):
        with pytest.raises(ContractViolation):
            QuadratureSpec(k=4, theta=0.5)


class TestFiniteN:
    """⟨0|T_k^(M)|0⟩/(Mn)ᵏ from explicit error placements"""

    def test_no_errors_is_noiseless(self):
        assert finite_n_Tk(6, 5, 0) == pytest.approx(float(sim.noiseless_closed_form(6, 5)), abs=1e-12)

    def test_qubit_symmetry(self):
        contributions = t1_contributions(4, 3)
        assert contributions.shape == (6, 4)
        np.testing.assert_allclose(contributions, np.repeat(contributions[:, :1], 4, axis=1), atol=1e-12)
        assert finite_n_Tk(4, 3, 1) == pytest.approx(contributions.sum() / 12, abs=1e-12)

    def test_placement_sums_rebuild_the_channel(self):
        n, m, p = 2, 1, 0.2
        slots = 2 * m * n
        total = sum(p ** k * (1 - p) ** (slots - k) * finite_n_Tk(n, m, k) * (m * n) ** k
                    for k in range(slots + 1))
        exact = sim.run_exact_channel(SimConfig(n=n, m_max=m, p=p)).final()
        assert total == pytest.approx(exact, abs=1e-12)

    def test_placement_cap(self):
        with pytest.raises(ContractViolation):
            finite_n_Tk(9, 17, 3, max_placements=1000)

    def test_errors_need_iterations(self):
        with pytest.raises(ContractViolation):
            finite_n_Tk(4, 0, 1)

    def test_single_error_element_converges(self, table):
        gaps = {n: single_error_gap(table, n, iterations_for(n, 0.77)) for n in (6, 8, 10, 12)}
        values = [gaps[n] for n in (6, 8, 10, 12)]
        assert all(a > b for a, b in zip(values, values[1:])), values
        assert values[-1] < 0.02

    def test_single_error_element_at_default_register(self, table):
        gap = single_error_gap(table, 9, 17)
        assert gap < 0.05
        # the n=9 register sits between its neighbours on the same trend
        assert single_error_gap(table, 10, iterations_for(10, 0.77)) < gap
        assert gap < single_error_gap(table, 8, iterations_for(8, 0.77))


class TestClosedForms:

    @pytest.mark.parametrize('k', sorted(KNOWN_CLOSED_FORMS))
    def test_known_forms(self, table, k):
        closed, divisor = table.F_closed[k]
        assert normalized_trig_form(closed, divisor) == KNOWN_CLOSED_FORMS[k]


class TestReport:

    def test_close_and_record(self):
        report = ValidationReport()
        report.close('near', 1.0, 1.0 + 1e-12, 1e-9)
        assert report.passed
        report.record('broken', False, reason='demo')
        summary = report.to_dict()
        assert not summary['passed']
        assert (summary['n_checks'], summary['n_failed']) == (2, 1)
        assert summary['checks'][1]['reason'] == 'demo'

    def test_route_checks(self):
        report = ValidationReport()
        _check_routes(report, 4, 10)
        assert report.passed
        assert report.checks[0]['name'] == 'closed_form_routes'

    def test_quarter_period_checks(self, table):
        report = ValidationReport()
        _check_quarter_period(report, table)
        assert report.passed
        assert len(report.checks) == len(table.F_closed)

    def test_quadrature_honesty_checks(self, cfg):
        report = ValidationReport()
        _check_quadrature_honesty(report, cfg.QUADRATURE_TOL)
        assert report.passed
        assert len(report.checks) == 6

    def test_finite_n_checks(self, table, cfg):
        report = ValidationReport()
        _check_finite_n(report, table, cfg)
        names = [check['name'] for check in report.checks]
        assert names == ['finite_n_T0_n6_M5', 'finite_n_T0_n9_M17', 'finite_n_T1_qubit_symmetry',
                         'finite_n_T1_n9_M17', 'finite_n_T1_convergence']
        assert report.passed

    @pytest.mark.slow
    def test_suite_passes(self, table, cfg):
        report = run_validation_suite(table, cfg, structure_order=8, quadrature_order=2)
        failed = [check['name'] for check in report.checks if not check['passed']]
        assert failed == []
