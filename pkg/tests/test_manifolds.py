import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henon_renorm.fnrep import Interval
from henon_renorm.henon import EXAMPLE_A, fixed_points
from henon_renorm.manifolds import (
    PullbackError,
    branch_window,
    build_partition,
    classify_point,
    classify_points,
    graph_pullback,
    local_stable_at_saddle,
    vertical_line,
    write_partition_csv,
)

Q0 = (EXAMPLE_A - 1) / EXAMPLE_A
P2 = float(np.sqrt(1 - (1 - Q0) / EXAMPLE_A))


@pytest.fixture(scope="module")
def degenerate_partition(degenerate_example):
    return build_partition(degenerate_example)


@pytest.fixture(scope="module")
def partition(example):
    return build_partition(example)


def test_degenerate_partition_lines(degenerate_partition):
    expected = [-1.0, -Q0, Q0, P2, 1.0]
    for g, x in zip(degenerate_partition.graphs, expected):
        assert g.lipschitz == 0.0
        assert g.measured_lipschitz < 1e-10
        assert np.max(np.abs(g.xs - x)) < 1e-12, g.label


def test_degenerate_classification(degenerate_partition):
    P = degenerate_partition
    assert classify_point(P, (0.0, 0.0)) == "B"
    assert classify_point(P, (P.p0.x, P.p0.y)) == "on-manifold"
    assert classify_point(P, (-1.2, 0.0)) == "outside-D"
    assert classify_point(P, (0.6, 0.0)) == "C"
    assert classify_point(P, (0.9, 0.3)) == "A"
    assert classify_point(P, (-0.7, 0.3)) == "A"


def test_partition_certificates(partition):
    assert partition.ordered()
    for g in partition.graphs:
        assert 0 < g.measured_lipschitz <= g.lipschitz + 1e-6, g.label
        assert g.lipschitz < 0.2


def test_stable_manifold_through_saddles(partition):
    for g, p in ((partition.W0_m1, partition.p_m1), (partition.W0_0, partition.p0)):
        assert abs(g(p.y) - p.x) < 1e-9


def test_stable_manifold_invariance(example, partition):
    # F maps W0(0) into itself where the image height stays in Iv
    g = partition.W0_0
    ys = np.linspace(-1.0, 1.0, 101)
    xs = g(ys)
    hx, hy = example(xs, ys)
    assert np.max(np.abs(hx - g(hy))) < 1e-10


def test_pullback_lands_on_source(example, partition):
    for g, src in ((partition.W1_0, partition.W0_0), (partition.W2_0, partition.W1_0), (partition.W2_m1, partition.W0_m1)):
        hx, hy = example(g.xs, g.ys)
        assert np.max(np.abs(hx - src(hy))) < 1e-10, g.label


def test_pullback_rejects_uncovered_window(example):
    line = vertical_line(0.0, example.Iv)
    with pytest.raises(PullbackError):
        graph_pullback(example, line, None, Interval(0.9, 1.0))


def test_local_stable_explicit_window(example):
    pm1, _ = fixed_points(example)
    g = local_stable_at_saddle(example, pm1, branch_window(example, pm1.x, 0.0))
    assert abs(g(pm1.y) - pm1.x) < 1e-9


def test_partition_csv(tmp_path, partition):
    paths = write_partition_csv(partition, tmp_path, prefix="level0_")
    assert [p.name for p in paths] == [
        "level0_W0_m1.csv",
        "level0_W1_0.csv",
        "level0_W0_0.csv",
        "level0_W2_0.csv",
        "level0_W2_m1.csv",
    ]
    with paths[2].open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["label", "lipschitz", "y", "x"]
    assert len(rows) == 1 + partition.W0_0.ys.size


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.29, 1.09), st.floats(-1.29, 1.09))
def test_classification_consistent_with_graphs(partition, x, y):
    P = partition
    lab = classify_points(P, x, y)[0]
    gx = P.stack(np.array([y]))[:, 0]
    if lab == "B":
        assert gx[1] < x < gx[2]
    elif lab == "C":
        assert gx[2] < x < gx[3]
    elif lab == "A":
        assert gx[0] < x < gx[1] or gx[3] < x < gx[4]
    elif lab == "outside-D":
        assert x < gx[0] or x > gx[4]

