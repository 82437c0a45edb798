import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LAMBDA_REF
from henon_renorm.henon import EXAMPLE_A, example_map
from henon_renorm.manifolds import build_partition
from henon_renorm.renorm import (
    HenonRenormalizationError,
    compute_tip,
    is_renormalizable_henon,
    level_manifolds,
    renormalize_henon,
    rescaling_trick_check,
    rescaling_trick_derivative,
    universality_spread,
)

# frozen from a reference run of the Example tower
EPS_NORMS = (0.0325, 0.00223697776856992, 3.618224884266278e-06, 3.531045663466402e-12)
LAMBDAS = (2.2505369493026066, 2.626062861626643, 2.5045606139634007, 2.5037389124484024)
TIPS = (
    (0.7829310046531803, 0.005305733238223654),
    (0.6833334795475545, -0.011940748695765082),
    (0.7260494859564348, -0.0015011988154213925),
    (0.7273804147547215, 0.00039150344042253706),
)


def test_tower_depth_and_stop(tower):
    assert tower.depth == 9
    assert "level 9 not renormalizable" in tower.reason


def test_tower_levels(tower):
    for n in range(4):
        lv = tower.levels[n]
        assert lv.eps_norm == pytest.approx(EPS_NORMS[n], rel=1e-6)
        assert lv.lam == pytest.approx(LAMBDAS[n], rel=1e-9)
        assert lv.tip == pytest.approx(TIPS[n], abs=1e-8)
        assert not lv.degenerate_continuation
    assert all(lv.degenerate_continuation for lv in tower.levels[4:])


def test_level0_scaling_closed_form(tower):
    assert tower.levels[0].lam == pytest.approx(EXAMPLE_A / (EXAMPLE_A - 1), rel=1e-13)


def test_decay_ratios(tower):
    r = tower.decay_ratios()
    assert r[:3] == pytest.approx([2.117848774977439, 0.7230564758259639, 0.26971942277968847], rel=1e-5)
    assert all(v is None for v in r[3:])


def test_tip_agreement(tower):
    t = tower.tip
    assert t.agreement[0] < 1e-9
    assert not t.converged
    assert list(t.agreement[:4]) == sorted(t.agreement[:4])


def test_tip_inside_level_unimodal_C(tower):
    for lv in tower.levels[:4]:
        um = lv.unimodal
        assert um.q0 < lv.tip[0] < um.p2


def test_compute_tip_converges_with_depth(tower):
    errs = []
    for d in (3, 5, 7):
        t = compute_tip(tower, 0, depth=d)
        assert len(t.points) == d + 1
        errs.append(float(np.hypot(*np.subtract(t.points[0], TIPS[0]))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-7


def test_report_shape(tower):
    rows = tower.report()
    assert len(rows) == len(tower.levels)
    assert rows[0]["fixed_points"][1]["x"] == pytest.approx(0.44009314455426664, abs=1e-14)


def test_not_renormalizable_raises():
    F = example_map(0.0, 2.0)
    P = build_partition(F)
    assert not is_renormalizable_henon(F, P)
    with pytest.raises(HenonRenormalizationError):
        renormalize_henon(F, P)


def test_renormalized_map_matches_double_iterate(tower):
    lv = tower.levels[0]
    phi, F, RF = lv.rescaling, lv.F, tower.levels[1].F
    ys = np.linspace(-0.3, 0.3, 7)
    xs = np.linspace(0.5, 0.7, 7)
    X, Y = phi.s(xs), phi.s(ys)
    # RF(phi(z)) = phi(F^2(z)) for z in C
    zx, zy = phi(*F(*F(xs, ys)))
    rx, ry = RF(*phi(xs, ys))
    assert np.max(np.abs(rx - zx)) < 1e-9
    assert np.max(np.abs(ry - zy)) < 1e-12
    assert X.shape == Y.shape


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 0.8), st.floats(-0.5, 0.5))
def test_rescaling_inverse_round_trip(tower, x, y):
    phi = tower.levels[0].rescaling
    u, v = phi(x, y)
    xb, yb = phi.inverse(u, v)
    assert xb == pytest.approx(x, abs=1e-12)
    assert yb == pytest.approx(y, abs=1e-12)


def test_universality_spread_example(tower):
    assert universality_spread(tower.levels[0].F) == pytest.approx(0.0, abs=1e-12)
    assert universality_spread(tower.levels[5].F) is None


def test_level_manifolds_nest(tower, level_sets):
    L = level_sets(0)
    assert L.j_max >= 4
    for j in range(1, L.j_max + 1):
        ys = np.linspace(-0.5, 0.5, 11)
        assert np.all(L.W0[j - 1](ys) < L.W0[j](ys))
        assert np.all(L.W2[j](ys) < L.W2[j - 1](ys))


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_rescaling_trick(sol, j):
    assert rescaling_trick_check(sol, j) < 1e-12
    lo, hi = rescaling_trick_derivative(sol, j)
    assert 0 < lo <= hi


def test_g_lift_is_fixed(g_lift, g_tower):
    G, sol = g_lift
    assert abs(sol.lam - LAMBDA_REF) < 1e-12
    RG, phi, _ = renormalize_henon(G)
    xs = np.linspace(-1.3, 1.1, 201)
    assert RG.degenerate
    assert np.max(np.abs(RG.f(xs) - G.f(xs))) < 1e-12
    assert phi.lam == pytest.approx(LAMBDA_REF, rel=1e-12)
    assert g_tower.depth == 5
    for lv in g_tower.levels[:5]:
        assert lv.lam == pytest.approx(LAMBDA_REF, rel=1e-11)


def test_g_lift_tip_is_critical_value(g_tower):
    lv = g_tower.levels[0]
    assert lv.tip[0] == pytest.approx(lv.unimodal.c1, abs=1e-12)
    assert lv.tip[0] == pytest.approx(0.7273465588076731, abs=1e-12)


def test_g_lift_level_manifolds_scale(g_tower):
    L = level_manifolds(g_tower, 0)
    tau = g_tower.levels[0].tip[0]
    lam = LAMBDA_REF
    d0 = [abs(L.W0[j].xs[0] - tau) * lam ** (2 * j) for j in range(1, L.j_max + 1)]
    d2 = [abs(L.W2[j].xs[0] - tau) * lam ** (2 * j) for j in range(1, L.j_max + 1)]
    assert max(d0) / min(d0) < 1.01
    assert max(d2) / min(d2) < 1.01
    assert d0[0] == pytest.approx(0.335, abs=2e-3)
    assert d2[0] == pytest.approx(0.0429, abs=2e-4)
