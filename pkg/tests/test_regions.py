import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import LAMBDA_REF
from henon_renorm.regions import (
    RegionError,
    compute_K,
    fit_bracket_constant,
    region_of,
    rescaling_level_by_manifolds,
    verify_region_geometry,
)
from henon_renorm.renorm import RenormTower

# frozen from a reference run: K_n for b = 5, 10, 20 at levels 0, 1, 2
K_TABLE = {0: (0, 0, 0), 1: (1, 1, 1), 2: (5, 4, 4)}


@pytest.mark.parametrize("n", [0, 1, 2])
def test_K_values(K_of, n):
    for b, k in zip((5.0, 10.0, 20.0), K_TABLE[n]):
        assert K_of(n, b).K == k


def test_K_decreases_with_b(K_of):
    for n in range(3):
        Ks = [K_of(n, b).K for b in (5.0, 10.0, 20.0)]
        assert Ks == sorted(Ks, reverse=True)


def test_witnesses_shrink_by_lambda_squared(K_of):
    w = K_of(2, 5.0).witnesses
    ratios = [a / b for a, b in zip(w, w[1:])]
    for r in ratios:
        assert r == pytest.approx(LAMBDA_REF**2, rel=0.02)


def test_bracket_constant(K_of, tower):
    rows = [(tower.levels[n].lam, K_of(n, b).K, b, K_of(n, b).eps_norm) for n in range(3) for b in (5.0, 10.0, 20.0)]
    c = fit_bracket_constant(rows)
    assert c == pytest.approx(4.225, abs=0.01)


def test_degenerate_K_infinite(degenerate_tower):
    K = compute_K(degenerate_tower, 0)
    assert K.infinite
    assert K.as_dict()["K"] is None
    assert region_of(50, K) == "good"


def test_region_error_keeps_partial(tower):
    cut = RenormTower(tower.levels[:4], "cut", tower.tip)
    with pytest.raises(RegionError) as info:
        compute_K(cut, 2, 10.0)
    assert info.value.partial.K == 1


def test_region_of():
    assert region_of(1, 1) == "good"
    assert region_of(2, 1) == "bad"
    with pytest.raises(ValueError):
        region_of(0, 3)


def test_geometry_checks_level1(tower, K_of):
    rep = verify_region_geometry(tower, 1, K_of(1, 10.0))
    assert rep["pass"], rep
    assert rep["ii_good_far_from_tip"]["min_distance"] > rep["ii_good_far_from_tip"]["threshold"]
    assert rep["iv_bad_near_tip"]["count"] > 0


def test_rescaling_level_of_fixed_points(level_sets):
    L = level_sets(0)
    for j in range(1, L.j_max):
        x, y = L.points[j]
        # p(j) sits on W^0(j): strictly inside level j, outside level j+1
        lev = rescaling_level_by_manifolds(L, x + 1e-12, y)[0]
        assert lev == j + 1


@given(st.integers(1, 40), st.integers(0, 40))
def test_region_of_threshold(j, k):
    assert region_of(j, k) == ("good" if j <= k else "bad")


def test_fit_bracket_constant_symmetry():
    # one case at exactly the bracket value gives c = 1
    lam, b, K = 2.5, 10.0, 2
    eps = (lam**-K) ** 2 / b
    assert fit_bracket_constant([(lam, K, b, eps)]) == pytest.approx(1.0)
    assert math.isfinite(fit_bracket_constant([(lam, 3, b, eps), (lam, 1, b, eps)]))
