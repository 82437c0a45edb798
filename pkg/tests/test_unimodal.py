import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LAMBDA_REF
from henon_renorm.henon import EXAMPLE_A, quadratic
from henon_renorm.unimodal import (
    Affine,
    RenormalizationError,
    SingularityError,
    StructureError,
    UnderResolvedWarning,
    backward_orbit_b,
    build_unimodal,
    expansion_check,
    functional_equation_pushforward,
    is_renormalizable_unimodal,
    renormalize_unimodal,
    schwarzian,
    solve_feigenbaum,
    unimodal_class_check,
)
from henon_renorm.fnrep import AnalyticFn, Interval


def closed_form_points(a):
    q0 = (a - 1.0) / a
    p2 = math.sqrt(1.0 - (1.0 - q0) / a)
    return q0, -q0, p2


def test_example_points_match_closed_form():
    m = build_unimodal(quadratic(EXAMPLE_A))
    assert m.q0 == pytest.approx(0.44433840569019699, abs=1e-14)
    assert m.p1 == pytest.approx(-0.44433840569019699, abs=1e-14)
    assert m.p2 == pytest.approx(0.83140855937925482, abs=1e-13)
    assert m.c == pytest.approx(0.0, abs=1e-14)
    assert m.c1 == pytest.approx(0.7996565, abs=1e-14)
    assert m.f.deriv()(-1.0) == pytest.approx(3.599313, abs=1e-12)
    assert m.f.deriv()(m.q0) == pytest.approx(-1.599313, abs=1e-12)


def test_example_is_renormalizable():
    m = build_unimodal(quadratic(EXAMPLE_A))
    test = is_renormalizable_unimodal(m)
    assert test.ok
    assert test.margin == pytest.approx(0.83140855937925482 - 0.7996565, abs=1e-12)


def test_chebyshev_map_not_renormalizable():
    m = build_unimodal(quadratic(2.0))
    assert m.q0 == pytest.approx(0.5, abs=1e-14)
    assert m.p2 == pytest.approx(math.sqrt(3) / 2, abs=1e-13)
    assert not is_renormalizable_unimodal(m)
    with pytest.raises(RenormalizationError):
        renormalize_unimodal(m)


def test_missing_critical_point():
    f = AnalyticFn(Interval(-1.0, 1.0), np.array([0.0, 1.0]))
    with pytest.raises(StructureError):
        build_unimodal(f)


def test_first_bifurcation_rejected():
    # f'(q0) = -2(a - 1) reaches -1 at a = 1.5
    with pytest.raises(StructureError):
        build_unimodal(quadratic(1.5))


def test_unnormalized_map_rejected():
    f = AnalyticFn(Interval(-1.3, 1.1), np.array([0.5, 0.0, -0.5]))
    with pytest.raises(StructureError):
        build_unimodal(f)


def test_renormalized_map_is_normalized():
    m = build_unimodal(quadratic(EXAMPLE_A))
    r, s = renormalize_unimodal(m)
    assert s(m.q0) == pytest.approx(-1.0, abs=1e-14)
    assert s(m.p1) == pytest.approx(1.0, abs=1e-14)
    assert r.f(-1.0) == pytest.approx(-1.0, abs=1e-12)
    assert r.f(1.0) == pytest.approx(-1.0, abs=1e-12)
    # s o f^2 o s^-1 evaluated directly
    x = 0.3
    assert r.f(x) == pytest.approx(s(m.f(m.f(s.inv(x)))), abs=1e-13)


def test_schwarzian_of_quadratic():
    f = quadratic(EXAMPLE_A)
    xs = np.array([-1.0, -0.5, 0.5, 1.0])
    assert np.allclose(schwarzian(f, xs), -1.5 / xs**2, atol=1e-10)
    with pytest.raises(SingularityError):
        schwarzian(f, np.array([0.0]))


def test_class_check_example():
    checks = unimodal_class_check(build_unimodal(quadratic(EXAMPLE_A)))
    assert checks["ok"], checks


@settings(max_examples=30, deadline=None)
@given(st.floats(1.55, 1.95))
def test_partition_points_invariants(a):
    m = build_unimodal(quadratic(a))
    q0, p1, p2 = closed_form_points(a)
    assert m.q0 == pytest.approx(q0, abs=1e-12)
    assert m.p1 == pytest.approx(p1, abs=1e-12)
    assert m.p2 == pytest.approx(p2, abs=1e-12)
    assert m.f(m.p2) == pytest.approx(m.p1, abs=1e-12)
    assert m.q_minus1 < m.p1 < m.c < m.q0 < m.p2 < m.qhat_minus1()


@given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(-10, 10))
def test_affine_round_trip(offset, slope, x):
    s = Affine(offset, slope)
    assert s.inv(s(x)) == pytest.approx(x, abs=1e-9)


def test_feigenbaum_solution(sol):
    assert abs(sol.lam - LAMBDA_REF) < 1e-12
    assert sol.residual < 1e-13
    g = sol.g
    assert g.f(1.0) == pytest.approx(-1.0, abs=1e-14)
    assert g.c == pytest.approx(0.0, abs=1e-12)
    assert g.q0 == pytest.approx(1.0 / sol.lam, abs=1e-12)


def test_feigenbaum_identities(sol):
    dg = sol.g.f.deriv()
    _, b2 = backward_orbit_b(sol)
    assert abs(dg(b2) + 1.0) < 1e-12
    assert abs(dg(sol.g.q_minus1) - dg(sol.g.q0) ** 2) < 1e-10
    assert expansion_check(sol) == pytest.approx(1.6012, abs=1e-4)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_functional_equation_pushforward(sol, n):
    assert functional_equation_pushforward(sol, n) < 1e-12


def test_low_degree_warns_not_raises():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = solve_feigenbaum(10)
    assert any(issubclass(w.category, UnderResolvedWarning) for w in caught)
    assert abs(s.lam - LAMBDA_REF) < 1e-4
