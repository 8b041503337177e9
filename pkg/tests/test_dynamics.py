import math

import numpy as np
import pytest

from toruskit import dynamics as dyn
from toruskit.errors import DegenerateConversion, InvalidEta, StepLimitExceeded

TWO_PI = 2.0 * math.pi


class TestStdMapStep:
    def test_unperturbed_invariant_circle(self):
        p = dyn.DissStdMapParams(0.0, 0.3, 0.7)
        st = dyn.std_map_step(dyn.MapState(0.7, 1.2), p)
        assert st.y == pytest.approx(0.7, abs=0)
        assert st.x == pytest.approx((1.2 + 0.7) % TWO_PI, abs=0)

    def test_direct_arithmetic(self):
        p = dyn.DissStdMapParams(0.9, 0.1, 0.4)
        st = dyn.std_map_step(dyn.MapState(0.5, 0.0), p)
        assert st.y == pytest.approx(0.49, abs=1e-15)
        assert st.x == pytest.approx(0.49, abs=1e-15)

    @pytest.mark.parametrize("x0,y0", [(0.3, 1.1), (2.0, -0.7), (5.9, 3.2)])
    def test_conservative_area_preservation(self, x0, y0):
        # finite-difference Jacobian of one step at eta = 0
        p = dyn.DissStdMapParams(0.8, 0.0, 0.0)
        h = 1e-6

        def step(y, x):
            s = dyn.std_map_step(dyn.MapState(y, x), p)
            return np.array([s.y, s.x])

        j = np.empty((2, 2))
        j[:, 0] = (step(y0 + h, x0) - step(y0 - h, x0)) / (2 * h)
        j[:, 1] = (step(y0, x0 + h) - step(y0, x0 - h)) / (2 * h)
        assert abs(np.linalg.det(j) - 1.0) < 1e-8

    def test_unperturbed_relaxation_closed_form(self):
        eta, Om, y0 = 0.23, 0.6, 1.4
        p = dyn.DissStdMapParams(0.0, eta, Om)
        st = dyn.MapState(y0, 0.0)
        for n in range(1, 51):
            st = dyn.std_map_step(st, p)
            exact = Om + (1 - eta) ** n * (y0 - Om)
            assert st.y == pytest.approx(exact, rel=1e-12)

    def test_orbit_kernel_matches_step(self):
        p = dyn.DissStdMapParams(0.9, 0.1, 2.4)
        y, x, wind = dyn.std_map_orbit(dyn.MapState(2.4, 0.0), p, 100)
        st = dyn.MapState(2.4, 0.0)
        for n in range(1, 101):
            st = dyn.std_map_step(st, p)
            assert y[n] == pytest.approx(st.y, rel=1e-13, abs=1e-13)
            assert x[n] == pytest.approx(st.x, rel=1e-12, abs=1e-12)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            dyn.DissStdMapParams(-0.1, 0.0, 0.0)
        with pytest.raises(ValueError):
            dyn.DissStdMapParams(0.1, -0.2, 0.0)


class TestCellConvert:
    def test_direct(self):
        eta, Om = dyn.std_map_cell_convert(0.9, 0.1)
        assert eta == pytest.approx(0.1, rel=1e-15)
        assert Om == pytest.approx(TWO_PI, rel=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateConversion):
            dyn.std_map_cell_convert(1.0, 0.0)

    def test_zero_c(self):
        eta, Om = dyn.std_map_cell_convert(0.5, 0.0)
        assert (eta, Om) == (0.5, 0.0)


class TestPendulumFlow:
    def test_vector_field_on_attractor(self):
        p = dyn.ForcedPendulumParams(0.03, 0.1, 0.4)
        dp1, dq1, dq2 = dyn.pendulum_vector_field(dyn.FlowState(0.4, 0.0, 0.0), p)
        assert dp1 == pytest.approx(0.0, abs=1e-15)
        assert dq1 == 0.4
        assert dq2 == 1.0

    def test_vector_field_general(self):
        p = dyn.ForcedPendulumParams(0.2, 0.05, 0.3)
        st = dyn.FlowState(0.7, 1.1, 2.3)
        dp1, dq1, dq2 = dyn.pendulum_vector_field(st, p)
        expected = 0.2 * (math.sin(1.1) + math.sin(1.1 - 2.3)) - 0.05 * (0.7 - 0.3)
        assert dp1 == pytest.approx(expected, rel=1e-15)
        assert dq1 == 0.7

    def test_exponential_relaxation(self):
        # eps = 0: p1(t) = (p1(0) - Omega) e^{-eta t} + Omega
        p = dyn.ForcedPendulumParams(0.0, 0.1, 0.0)
        out = dyn.integrate_flow(dyn.FlowState(1.0, 0.0, 0.0), 10.0, p)
        assert abs(out.p1 - math.exp(-1.0)) < 1e-12

    def test_zero_duration_identity(self):
        p = dyn.ForcedPendulumParams(0.1, 0.1, 0.3)
        st = dyn.FlowState(0.5, 1.0, 2.0)
        out = dyn.integrate_flow(st, 0.0, p)
        assert (out.p1, out.q1, out.q2) == (0.5, 1.0, 2.0)

    def test_tolerance_self_consistency(self):
        # rerun at a much finer tolerance; drift below 1e-10 per section
        p = dyn.ForcedPendulumParams(0.03, 0.1, 0.387)
        loose = dyn.IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11)
        tight = dyn.IntegratorConfig(abs_tol=1e-14, rel_tol=1e-14)
        a = dyn.integrate_flow(dyn.FlowState(0.387, 0.0, 0.0), TWO_PI, p, loose)
        b = dyn.integrate_flow(dyn.FlowState(0.387, 0.0, 0.0), TWO_PI, p, tight)
        assert abs(a.p1 - b.p1) < 1e-10
        assert abs(a.q1 - b.q1) < 1e-10

    def test_poincare_unperturbed(self):
        Om = 0.3
        p = dyn.ForcedPendulumParams(0.0, 0.1, Om)
        p1, q1 = dyn.poincare_map((Om, 1.0), p)
        assert p1 == pytest.approx(Om, abs=1e-12)
        assert q1 == pytest.approx((1.0 + TWO_PI * Om) % TWO_PI, abs=1e-10)

    def test_poincare_relaxation_closed_form(self):
        Om, eta = 0.3, 0.1
        p = dyn.ForcedPendulumParams(0.0, eta, Om)
        p1, _ = dyn.poincare_map((1.0, 0.0), p)
        assert abs(p1 - ((1.0 - Om) * math.exp(-eta * TWO_PI) + Om)) < 1e-12

    def test_poincare_symplectic_at_zero_eta(self):
        p = dyn.ForcedPendulumParams(0.03, 0.0, 0.0)
        h = 1e-6
        base = (0.4, 1.0)

        def pmap(p1, q1):
            return np.array(dyn.poincare_map((p1, q1), p))

        j = np.empty((2, 2))
        j[:, 0] = (pmap(base[0] + h, base[1]) - pmap(base[0] - h, base[1])) / (2 * h)
        j[:, 1] = (pmap(base[0], base[1] + h) - pmap(base[0], base[1] - h)) / (2 * h)
        assert abs(np.linalg.det(j) - 1.0) < 1e-8

    def test_poincare_consistency_with_flow(self):
        # 100 section maps equal one long flow, to 1e-10 in p1
        p = dyn.ForcedPendulumParams(0.03, 0.1, 0.387)
        ps, qs, _ = dyn.poincare_sections((0.387, 0.0), 100, p)
        out = dyn.integrate_flow(dyn.FlowState(0.387, 0.0, 0.0), 100 * TWO_PI, p)
        assert abs(ps[100] - out.p1) < 1e-10

    def test_determinism(self):
        p = dyn.ForcedPendulumParams(0.03, 0.1, 0.387)
        a = dyn.poincare_sections((0.387, 0.0), 50, p)
        b = dyn.poincare_sections((0.387, 0.0), 50, p)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_step_limit(self):
        p = dyn.ForcedPendulumParams(0.03, 0.1, 0.387)
        cfg = dyn.IntegratorConfig(max_steps_per_section=5)
        with pytest.raises(StepLimitExceeded):
            dyn.integrate_flow(dyn.FlowState(0.4, 0.0, 0.0), TWO_PI, p, cfg)

    def test_integrator_config_validation(self):
        with pytest.raises(ValueError):
            dyn.IntegratorConfig(abs_tol=1e-3)
        with pytest.raises(ValueError):
            dyn.IntegratorConfig(rel_tol=0.0)


class TestRelaxationCount:
    @pytest.mark.parametrize("eta,expected", [(0.1, 328), (0.5, 50), (0.99, 8)])
    def test_values(self, eta, expected):
        assert dyn.relaxation_count(eta) == expected

    def test_formula(self):
        for eta in (0.02, 0.05, 0.2):
            w = dyn.relaxation_count(eta)
            assert (1 - eta) ** w <= 10**-15 < (1 - eta) ** (w - 1) * (1 + 1e-12)

    @pytest.mark.parametrize("eta", [0.0, 1.0, -0.1, 1.5])
    def test_invalid(self, eta):
        with pytest.raises(InvalidEta):
            dyn.relaxation_count(eta)
