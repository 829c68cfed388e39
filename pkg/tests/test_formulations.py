import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamshoot.errors import DomainError, InsufficientDataError
from lamshoot.formulations import (RescaledState, cross_validate, f_graph, f_second, f_third,
                                   graph_defects, lemma_violations, limit_profile_rho_of_t,
                                   limit_profile_t_of_rho, rescaled_deviation, rescaled_rhs,
                                   u_second, validation_report)
from lamshoot.ode_core import IntegratorControls, Params, integrate, theta_dot, ProfileState

# mpmath quadrature at 30 digits, two working precisions agreeing to 1e-25
T_OF_ONE = {2: 1.7320508075688772935, 3: 1.3796635686420301882}


class TestGraphEquations:
    def test_u_second_examples(self):
        r04 = Params(2, 0.4).cylinder_radius
        assert u_second(7.0, r04, 0.0, Params(2, 0.4)) == pytest.approx(0, abs=1e-15)
        assert u_second(0.0, 1.0, 0.0, Params(2, 0)) == 0
        assert u_second(0.0, 2.0, 0.0, Params(2, 0)) == pytest.approx(-1.5)

    def test_f_second_examples(self):
        for lam in (-0.4, 0.0, 0.7):
            for r in (0.3, 1.0, 5.0):
                assert f_second(r, -lam, 0.0, Params(3, lam)) == pytest.approx(0, abs=1e-15)
        assert f_second(1.0, 0.0, 1.0, Params(2, 0)) == 0
        assert f_second(2.0, 0.0, 1.0, Params(2, 0)) == pytest.approx(3.0)

    def test_f_third_examples(self):
        for r in (0.5, 2.0):
            assert f_third(r, 0.0, 0.0, Params(2, 0.3)) == 0
        assert f_third(1.0, 1.0, 0.0, Params(2, 0)) == pytest.approx(2.0)
        v = f_third(1.0, -1.0, 0.0, Params(2, -0.24))
        assert v == pytest.approx(-2.0)
        assert -1.0 * v > 0

    def test_domain(self):
        with pytest.raises(DomainError):
            u_second(0.0, 0.0, 0.0, Params(2, 0))
        with pytest.raises(DomainError):
            f_second(-1.0, 0.0, 0.0, Params(2, 0))
        with pytest.raises(DomainError):
            f_third(0.0, 1.0, 0.0, Params(2, 0))

    @settings(max_examples=200)
    @given(st.integers(2, 5), st.floats(-1, 1), st.floats(-3, 3), st.floats(0.05, 4),
           st.floats(0.05, math.pi / 2 - 0.05))
    def test_u_graph_matches_arc_length_form(self, n, lam, x, r, th):
        # theta' = u'' / (1 + u'^2)^(3/2) with u' = tan(theta)
        p = Params(n, lam)
        u1 = math.tan(th)
        kappa = u_second(x, r, u1, p) / (1 + u1 * u1) ** 1.5
        assert kappa == pytest.approx(theta_dot(ProfileState(0, x, r, th), p), abs=1e-9, rel=1e-9)

    @settings(max_examples=200)
    @given(st.integers(2, 5), st.floats(-1, 1), st.floats(-3, 3), st.floats(0.05, 4),
           st.floats(0.05, math.pi - 0.05))
    def test_f_graph_matches_arc_length_form(self, n, lam, x, r, th):
        # f' = cot(theta), f'' = -theta' / sin(theta)^3
        p = Params(n, lam)
        f1 = math.cos(th) / math.sin(th)
        f2 = -theta_dot(ProfileState(0, x, r, th), p) / math.sin(th) ** 3
        assert f_second(r, x, f1, p) == pytest.approx(f2, abs=1e-8, rel=1e-9)

    @settings(max_examples=100)
    @given(st.integers(2, 5), st.floats(-1, 1), st.floats(0.3, 3), st.floats(-3, 3),
           st.floats(-3, 3), st.floats(-2, 2))
    def test_f_third_is_derivative_of_f_second(self, n, lam, r, f, f1, f2_shift):
        # along an exact graph f'' = F(r, f, f'), so f''' = dF/dr + F_f f' + F_f1 f''
        p = Params(n, lam)
        f2 = f_second(r, f, f1, p)
        h = 1e-5

        def F(rr):
            return f_second(rr, f + f1 * (rr - r), f1 + f2 * (rr - r), p)

        fd = (F(r + h) - F(r - h)) / (2 * h)
        assert f_third(r, f1, f2, p) == pytest.approx(fd, rel=1e-5, abs=1e-5)


class TestRescaled:
    def test_rhs_examples(self):
        assert rescaled_rhs(RescaledState(0, 0, 0, 0), 0.0, Params(2, 0.3)) == (1.0, 0.0, 1.0)
        for n in (2, 3, 5):
            dxi, drho, dal = rescaled_rhs(RescaledState(0, 1.0, 0.5, math.pi / 2), 0.0, Params(n, 0))
            assert (dxi, drho, dal) == pytest.approx((0, 1, 0), abs=1e-15)
        out = rescaled_rhs(RescaledState(0, 0, 0, 0), 0.1, Params(2, -0.24))
        assert out == pytest.approx((1.0, 0.0, 0.966), abs=1e-15)

    def test_rhs_domain(self):
        with pytest.raises(DomainError):
            rescaled_rhs(RescaledState(0, 0, -1.0, 0), 0.1, Params(2, 0))

    def test_t_of_rho_examples(self):
        assert limit_profile_t_of_rho(1.0, Params(2, 0)) == pytest.approx(T_OF_ONE[2], abs=1e-12)
        assert limit_profile_t_of_rho(1.0, Params(3, 0)) == pytest.approx(T_OF_ONE[3], abs=1e-10)
        assert limit_profile_t_of_rho(1e-12, Params(2, 0)) < 1e-5
        with pytest.raises(DomainError):
            limit_profile_t_of_rho(0.0, Params(2, 0))

    @given(st.floats(1e-6, 10), st.integers(2, 5))
    @settings(max_examples=30, deadline=None)
    def test_t_of_rho_monotone_and_inverse(self, rho, n):
        p = Params(n, 0)
        t = limit_profile_t_of_rho(rho, p)
        assert limit_profile_t_of_rho(rho * 1.01, p) > t
        assert limit_profile_rho_of_t(t, p) == pytest.approx(rho, rel=1e-9)

    def test_closed_form_n2(self):
        for t in (0.1, 0.5, 1.0, 2.0):
            assert limit_profile_rho_of_t(t, Params(2, 0)) == pytest.approx(
                -1 + math.sqrt(1 + t * t), abs=1e-13)

    def test_deviation_linear_in_delta(self):
        p = Params(2, -0.24)
        devs = [rescaled_deviation(d, p) for d in (0.1, 0.05, 0.025)]
        assert devs[0] > devs[1] > devs[2]
        for a, b in zip(devs, devs[1:]):
            assert 1.7 <= a / b <= 2.3


class TestCrossValidation:
    def test_cylinder(self):
        p = Params(2, -0.24)
        traj = integrate(p.cylinder_radius, p, IntegratorControls(s_max=5.0, sample_ds=0.01))
        assert cross_validate(traj) < 1e-10

    def test_window_example_on_dense_grid(self):
        traj = integrate(0.5, Params(2, 0), IntegratorControls(sample_ds=1e-4))
        assert cross_validate(traj, 1e-5, theta_window=(0.1, 1.4)) < 1e-5

    def test_too_few_samples(self):
        traj = integrate(0.5, Params(2, 0), IntegratorControls(max_steps=2), stop=None)
        assert len(traj) <= 3
        with pytest.raises(InsufficientDataError):
            cross_validate(traj, 1e-5)

    def test_second_order_decay(self):
        defects = []
        for ds in (1e-3, 5e-4, 2.5e-4):
            traj = integrate(0.5, Params(2, 0), IntegratorControls(sample_ds=ds))
            defects.append(cross_validate(traj, theta_window=(0.1, 1.4)))
        for a, b in zip(defects, defects[1:]):
            assert 3.0 < a / b < 5.0

    def test_report_records(self):
        traj = integrate(0.5, Params(2, 0), IntegratorControls(sample_ds=1e-3))
        recs = validation_report(traj, 1e-3)
        assert recs and {"check", "arc", "max_defect", "pass"} == set(recs[0])
        assert {r["check"] for r in recs} == {"u-graph", "f-graph"}
        arcs = graph_defects(traj)
        assert all(a.samples >= 5 for a in arcs)


LEMMA_SHOTS = [(2, -0.4, 0.05), (2, -0.4, 0.6), (2, -0.24, 0.13), (2, -0.24, 0.5),
               (3, -0.1, 0.3), (3, -0.1, 1.2), (2, 0.0, 0.3), (2, 0.0, 0.9), (4, 0.5, 1.0)]


class TestLemmas:
    @pytest.mark.parametrize("n,lam,delta", LEMMA_SHOTS)
    def test_no_violations(self, n, lam, delta):
        traj = integrate(delta, Params(n, lam))
        assert lemma_violations(traj) == {"propagation": 0, "single_inflection": 0,
                                          "inflection_sign": 0}

    def test_f_graph_is_increasing_in_r(self):
        g = f_graph(integrate(0.3, Params(2, 0)))
        assert np.all(np.diff(g.r) > 0)

    def test_type2_has_single_inflection(self):
        g = f_graph(integrate(0.05, Params(2, -0.4)))
        assert len(g.inflections) == 1
        ev = g.inflections[0]
        f1 = math.cos(ev.state.theta) / math.sin(ev.state.theta)
        assert f1 * f_third(ev.state.r, f1, 0.0, Params(2, -0.4)) > 0
