"""Vertical graphs, the graph pullback, local stable manifolds and the A/B/C partition."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fnrep import AnalyticFn, Interval, from_lobatto, lobatto_nodes
from .henon import HenonMap, InversionError, SaddlePoint, fixed_points, invert_h
from .unimodal import StructureError, build_unimodal

__all__ = [
    "N_HEIGHTS",
    "ON_MANIFOLD_TOL",
    "VerticalGraph",
    "Partition",
    "PullbackError",
    "ContractionError",
    "PartitionError",
    "vertical_line",
    "branch_window",
    "branch_slope_bound",
    "graph_pullback",
    "local_stable_at_saddle",
    "build_partition",
    "classify_point",
    "classify_points",
    "write_graph_csv",
    "write_partition_csv",
]

N_HEIGHTS = 257
ON_MANIFOLD_TOL = 1e-9
SLOPE_MARGIN = 0.01
PULLBACK_TOL = 1e-13
PULLBACK_MAX_ITER = 200
STABLE_TOL = 1e-11
STABLE_MAX_ITER = 400
WINDOW_FRACTION = 0.25
SLOPE_SLACK = 1e-6

REGION_LABELS = ("A", "B", "C", "on-manifold", "outside-D")


class PullbackError(ValueError):
    pass


class ContractionError(RuntimeError):
    pass


class PartitionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class VerticalGraph:
    """x = gamma(y) sampled at Lobatto heights on ``Iv``."""

    label: str
    Iv: Interval
    ys: np.ndarray
    xs: np.ndarray
    lipschitz: float
    contraction: float = 0.0
    _fn: AnalyticFn | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self._fn is None:
            object.__setattr__(self, "_fn", from_lobatto(self.xs, self.Iv))

    def __call__(self, y):
        return self._fn(y)

    @property
    def measured_lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.xs) / np.diff(self.ys))))

    def relabel(self, label: str) -> "VerticalGraph":
        return VerticalGraph(label, self.Iv, self.ys, self.xs, self.lipschitz, self.contraction, self._fn)


def vertical_line(x0: float, Iv: Interval, label: str = "line", n: int = N_HEIGHTS) -> VerticalGraph:
    ys = lobatto_nodes(n, Iv)
    return VerticalGraph(label, Iv, ys, np.full(n, float(x0)), 0.0)


def branch_window(F: HenonMap, x_ref: float, c: float, frac: float = WINDOW_FRACTION) -> Interval:
    """Window U' around ``x_ref`` on one monotone branch, clipped to Ih.

    Half-width max(2 sqrt|eps|, 0.05 |x_ref - c|), capped at ``frac |x_ref - c|``.
    """
    d = abs(x_ref - c)
    r = min(max(2.0 * np.sqrt(F.eps_norm()), 0.05 * d), frac * d)
    return Interval(max(x_ref - r, F.Ih.lo), min(x_ref + r, F.Ih.hi))


def branch_slope_bound(F: HenonMap, Uprime: Interval, ys: np.ndarray, n: int = 65) -> float:
    """Sampled min |dh/dx| on ``Uprime x ys`` less a 1% margin; 0 if h_y is not monotone."""
    X, Y = np.meshgrid(Uprime.linspace(n), ys, indexing="ij")
    hx = F.h_x(X, Y)
    if not (np.all(hx > 0) or np.all(hx < 0)):
        return 0.0
    return float(np.min(np.abs(hx))) * (1.0 - SLOPE_MARGIN)


def graph_pullback(
    F: HenonMap,
    Gamma: VerticalGraph,
    U: Interval | None,
    Uprime: Interval,
    m: float | None = None,
    L: float | None = None,
    *,
    label: str = "pullback",
) -> VerticalGraph:
    """The vertical graph in ``Uprime`` mapped by F into ``Gamma``.

    Per height y the fixed point of x -> h_y^-1(Gamma(x)) on ``Uprime``.
    The certified Lipschitz constant is |eps| / (delta (m - L)).
    """
    ys = lobatto_nodes(N_HEIGHTS, F.Iv)
    u_lo, u_hi = (U.lo, U.hi) if U is not None else (float(Gamma.xs.min()), float(Gamma.xs.max()))
    if m is None:
        m = branch_slope_bound(F, Uprime, ys)
    if L is None:
        L = Gamma.lipschitz
    if not L < m:
        raise PullbackError(f"Lipschitz {L:.3g} not below slope bound {m:.3g} on U'")
    ends = np.stack([F.h(np.full_like(ys, Uprime.lo), ys), F.h(np.full_like(ys, Uprime.hi), ys)])
    lo, hi = ends.min(axis=0), ends.max(axis=0)
    miss = (lo > u_lo) | (hi < u_hi)
    if np.any(miss):
        y_bad = ys[np.flatnonzero(miss)[0]]
        raise PullbackError(f"h_y(U') does not cover U at height y={y_bad:.6g}")

    x = np.full_like(ys, Uprime.center)
    prev_change = None
    factor = 0.0
    for _ in range(PULLBACK_MAX_ITER):
        try:
            xn = invert_h(F, ys, Gamma(x), Uprime)
        except InversionError as exc:
            raise PullbackError(str(exc)) from exc
        change = float(np.max(np.abs(xn - x)))
        if prev_change and prev_change > 1e-12:
            factor = max(factor, change / prev_change)
        x, prev_change = xn, change
        if change < PULLBACK_TOL:
            break
    else:
        raise ContractionError(f"pullback did not converge in {PULLBACK_MAX_ITER} iterations")
    cert = F.eps_norm() / (F.delta * (m - L))
    g = VerticalGraph(label, F.Iv, ys, x, cert, factor)
    if g.measured_lipschitz > cert + SLOPE_SLACK:
        raise PullbackError(
            f"measured slope {g.measured_lipschitz:.3g} exceeds certified bound {cert:.3g}"
        )
    return g


def _stable_certificate(eps: float, delta: float, m: float) -> float:
    """Fixed point of L -> eps / (delta (m - L)); requires m^2 > 4 eps / delta."""
    disc = m * m - 4.0 * eps / delta
    if disc <= 0:
        raise PullbackError(f"slope bound {m:.3g} too small for |eps| = {eps:.3g}")
    return 0.5 * (m - np.sqrt(disc))


def local_stable_at_saddle(
    F: HenonMap, p: SaddlePoint, Uprime: Interval | None = None, *, label: str = "W"
) -> VerticalGraph:
    """Local stable manifold of ``p`` by repeated pullback from the vertical line through it."""
    if Uprime is None:
        c = build_unimodal(F.f, normalize_tol=None).c
        Uprime = branch_window(F, p.x, c)
    ys = lobatto_nodes(N_HEIGHTS, F.Iv)
    m = branch_slope_bound(F, Uprime, ys)
    if m <= 0:
        raise PullbackError(f"h_y not monotone on [{Uprime.lo:.6g}, {Uprime.hi:.6g}]")
    Lstar = _stable_certificate(F.eps_norm(), F.delta, m)
    g = vertical_line(p.x, F.Iv, label)
    for _ in range(STABLE_MAX_ITER):
        gn = graph_pullback(F, g, None, Uprime, m, g.lipschitz, label=label)
        change = float(np.max(np.abs(gn.xs - g.xs)))
        g = gn
        if change < STABLE_TOL:
            break
    else:
        raise ContractionError("stable manifold iteration did not converge")
    # the certificates increase monotonically to Lstar, which bounds the limit graph
    g = VerticalGraph(label, g.Iv, g.ys, g.xs, Lstar, g.contraction, g._fn)
    if abs(g(p.y) - p.x) > 1e-9:
        raise ContractionError(f"manifold misses its saddle by {abs(g(p.y) - p.x):.3g}")
    return g


@dataclass(frozen=True, eq=False)
class Partition:
    """Five ordered stable-manifold graphs bounding A, B, C inside D."""

    F: HenonMap
    W0_m1: VerticalGraph
    W1_0: VerticalGraph
    W0_0: VerticalGraph
    W2_0: VerticalGraph
    W2_m1: VerticalGraph
    p_m1: SaddlePoint
    p0: SaddlePoint
    critical_point: float

    @property
    def graphs(self) -> tuple[VerticalGraph, ...]:
        return (self.W0_m1, self.W1_0, self.W0_0, self.W2_0, self.W2_m1)

    def stack(self, y) -> np.ndarray:
        """Graph x-positions at heights ``y``; shape (5,) + shape(y)."""
        return np.stack([g(y) for g in self.graphs])

    def ordered(self, n: int = N_HEIGHTS) -> bool:
        ys = lobatto_nodes(n, self.F.Iv)
        xs = self.stack(ys)
        return bool(np.all(np.diff(xs, axis=0) > 0))

    def region_descriptors(self) -> dict[str, tuple[tuple[str, str], ...]]:
        names = [g.label for g in self.graphs]
        return {
            "D": ((names[0], names[4]),),
            "A": ((names[0], names[1]), (names[3], names[4])),
            "B": ((names[1], names[2]),),
            "C": ((names[2], names[3]),),
        }

    def max_lipschitz(self) -> float:
        return max(g.measured_lipschitz for g in self.graphs)


def _pullback_on(F, source, x_ref, c, label):
    U = branch_window(F, x_ref, c)
    return graph_pullback(F, source, None, U, label=label)


def build_partition(F: HenonMap) -> Partition:
    try:
        um = build_unimodal(F.f, normalize_tol=None)
    except StructureError as exc:
        raise PartitionError(str(exc)) from exc
    pm1, p0 = fixed_points(F)
    c = um.c
    try:
        W0m1 = local_stable_at_saddle(F, pm1, label="W0(-1)")
        W00 = local_stable_at_saddle(F, p0, label="W0(0)")
        W2m1 = _pullback_on(F, W0m1, um.qhat_minus1(), c, "W2(-1)")
        W10 = _pullback_on(F, W00, um.p1, c, "W1(0)")
        W20 = _pullback_on(F, W10, um.p2, c, "W2(0)")
    except (PullbackError, ContractionError, StructureError) as exc:
        raise PartitionError(f"partition manifold failed: {exc}") from exc
    P = Partition(F, W0m1, W10, W00, W20, W2m1, pm1, p0, c)
    if not P.ordered():
        raise PartitionError("partition graphs are not ordered left to right")
    return P


_REGION_BY_SLOT = np.array(["outside-D", "A", "B", "C", "A", "outside-D"], dtype=object)


def classify_points(P: Partition, x, y) -> np.ndarray:
    """Region label per point: A, B, C, on-manifold or outside-D."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    gx = P.stack(y)
    slot = np.sum(x[None] > gx, axis=0)
    out = _REGION_BY_SLOT[slot].copy()
    near = np.any(np.abs(x[None] - gx) <= ON_MANIFOLD_TOL, axis=0)
    out[near] = "on-manifold"
    return out


def classify_point(P: Partition, z) -> str:
    return str(classify_points(P, z[0], z[1])[0])


def write_graph_csv(path: str | Path, graphs) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "lipschitz", "y", "x"])
        for g in graphs if not isinstance(graphs, VerticalGraph) else [graphs]:
            for y, x in zip(g.ys, g.xs):
                w.writerow([g.label, f"{g.lipschitz:.17g}", f"{y:.17g}", f"{x:.17g}"])
    return path


def write_partition_csv(P: Partition, out_dir: str | Path, prefix: str = "") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for g in P.graphs:
        name = g.label.replace("(", "_").replace(")", "").replace("-", "m")
        paths.append(write_graph_csv(out_dir / f"{prefix}{name}.csv", g))
    return paths
