import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamshoot.classify import (CLOSURE_BAND, TypeName, check_radius_bounds, classify_delta,
                               has_type3_signature, label_from_summary, summarize)
from lamshoot.errors import DomainError
from lamshoot.ode_core import IntegratorControls, Params, integrate

GRID = [(2, -0.4), (2, -0.24), (3, -0.1), (2, 0.0), (3, 0.3)]


def test_small_delta_self_shrinker_is_type1_1():
    assert classify_delta(0.3, Params(2, 0)).label is TypeName.TYPE1_1


def test_near_cylinder_self_shrinker_is_type1_3():
    assert classify_delta(0.95, Params(2, 0)).label is TypeName.TYPE1_3


def test_small_delta_negative_lambda_is_type2():
    assert classify_delta(0.01, Params(2, -0.4)).label is TypeName.TYPE2


def test_type2_event_values():
    label = classify_delta(0.05, Params(2, -0.4))
    s = label.summary
    assert label.label is TypeName.TYPE2
    assert s.s2 == pytest.approx(0.57158805692, abs=1e-8)
    assert s.s1 == pytest.approx(2.8098218156, abs=1e-8)
    assert s.s3 == s.s1
    assert s.b > Params(2, -0.4).cylinder_radius


@pytest.mark.parametrize("delta", [0.0, -0.1, 1.0, 2.0, math.nan])
def test_delta_outside_interval(delta):
    with pytest.raises(DomainError):
        classify_delta(delta, Params(2, 0))


def test_unresolved_scan_reports_infinity():
    label = classify_delta(0.19557566238, Params(2, -0.4))
    assert label.summary.s1 == math.inf
    assert label.label in (TypeName.TYPE3_CANDIDATE, TypeName.UNDETERMINED)
    assert label.summary.termination == "escape"


def _grid_shots():
    for n, lam in GRID:
        p = Params(n, lam)
        for frac in np.linspace(0.02, 0.98, 13):
            yield p, float(frac * p.cylinder_radius)


@pytest.mark.parametrize("p,delta", list(_grid_shots()))
def test_event_order_and_radius_bounds(p, delta):
    traj = integrate(delta, p)
    summ = summarize(traj)
    label = label_from_summary(summ, traj.controls, traj)
    if not summ.s1_resolved:
        assert check_radius_bounds(summ, p) is None
        return
    # exactly one of s2, s3 precedes s1 and the first event is the matching one
    assert (summ.s2 < summ.s1) != (summ.s3 < summ.s1)
    assert label.label.resolved
    for _, ok in check_radius_bounds(summ, p):
        assert ok
    if label.label.is_type1:
        assert math.isclose(summ.theta_at_s1, math.pi, abs_tol=1e-9)
    elif label.label is TypeName.TYPE2:
        assert abs(summ.theta_at_s1) < 1e-9


@pytest.mark.parametrize("p,delta", list(_grid_shots())[::4])
def test_label_rederived_from_summary(p, delta):
    label = classify_delta(delta, p)
    again = label_from_summary(label.summary, IntegratorControls().resolved(p),
                               closure_band=CLOSURE_BAND)
    assert again.label is label.label


@pytest.mark.parametrize("p,delta", [(Params(2, 0), 0.3), (Params(2, 0), 0.95),
                                     (Params(2, -0.4), 0.05), (Params(2, -0.24), 0.13)])
def test_open_types_are_stable(p, delta):
    label = classify_delta(delta, p).label
    for eps in (-1e-6, 1e-6):
        assert classify_delta(delta + eps, p).label is label


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(GRID), st.floats(0.02, 0.98))
def test_tighter_tolerance_keeps_label(nl, frac):
    p = Params(*nl)
    delta = frac * p.cylinder_radius
    a = classify_delta(delta, p)
    if not a.label.resolved or a.margin < 1e-6:
        return
    b = classify_delta(delta, p, IntegratorControls().tightened(10))
    assert b.label is a.label


def test_type3_signature_near_cylinder_parameter():
    p = Params(2, -0.4)
    traj = integrate(0.19557566238, p, IntegratorControls().resolved(p))
    assert has_type3_signature(traj)
    assert not has_type3_signature(integrate(0.05, p))


def test_summary_requires_valid_delta():
    traj = integrate(1.0, Params(2, 0))
    with pytest.raises(DomainError):
        summarize(traj)
