"""Planar sets, thickness, the closest-approach sequence and the double sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .fnrep import DomainError, solve_monotone
from .henon import HenonMap
from .manifolds import classify_points
from .regions import B_DEFAULT, RegionBoundary, RegionError, compute_K
from .renorm import RenormTower, Rescaling
from .unimodal import UnimodalMap

__all__ = [
    "PlanarSet",
    "Square",
    "ApproachStep",
    "ApproachTrace",
    "DoubleSequenceRow",
    "EmptySetError",
    "StraddleError",
    "sizes",
    "thickness",
    "is_R_regular",
    "closest_approach",
    "double_sequence",
    "rate_report",
    "alpha_constant",
    "square_in_F_image",
    "square_in_phi_image",
    "vertical_line_preimage_slope",
]

BOUNDARY_POINTS = 256
INTERIOR_GRID = 32
BISECTION_STEPS = 40
PERIMETER_SAMPLES = 16
EPS_FLOOR = 1e-300


class EmptySetError(ValueError):
    pass


class StraddleError(ValueError):
    pass


@dataclass(frozen=True)
class Square:
    x: float
    y: float
    side: float

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x, self.x + self.side, self.y, self.y + self.side)


@dataclass(frozen=True, eq=False)
class PlanarSet:
    """Closed polyline boundary plus interior samples, mapped pointwise."""

    boundary: np.ndarray
    interior: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.boundary, dtype=float).reshape(-1, 2)
        i = np.asarray(self.interior, dtype=float).reshape(-1, 2)
        if b.size == 0:
            raise EmptySetError("set has no boundary samples")
        object.__setattr__(self, "boundary", b)
        object.__setattr__(self, "interior", i)

    @classmethod
    def rectangle(cls, x1: float, x2: float, y1: float, y2: float, m: int = BOUNDARY_POINTS, k: int = INTERIOR_GRID) -> "PlanarSet":
        x1, x2 = sorted((x1, x2))
        y1, y2 = sorted((y1, y2))
        q = m // 4
        t = np.arange(q) / q
        edges = [
            np.c_[x1 + (x2 - x1) * t, np.full(q, y1)],
            np.c_[np.full(q, x2), y1 + (y2 - y1) * t],
            np.c_[x2 - (x2 - x1) * t, np.full(q, y2)],
            np.c_[np.full(q, x1), y2 - (y2 - y1) * t],
        ]
        s = (np.arange(k) + 0.5) / k
        X, Y = np.meshgrid(x1 + (x2 - x1) * s, y1 + (y2 - y1) * s, indexing="ij")
        return cls(np.vstack(edges), np.c_[X.ravel(), Y.ravel()])

    @classmethod
    def square(cls, sq: Square, **kw) -> "PlanarSet":
        x1, x2, y1, y2 = sq.bounds
        return cls.rectangle(x1, x2, y1, y2, **kw)

    @classmethod
    def polygon(cls, vertices, m: int = BOUNDARY_POINTS, k: int = INTERIOR_GRID) -> "PlanarSet":
        """Resampled polygon boundary with interior grid points clipped to the polygon."""
        v = np.asarray(vertices, dtype=float)
        closed = np.vstack([v, v[:1]])
        seg = np.hypot(*np.diff(closed, axis=0).T)
        cum = np.r_[0.0, np.cumsum(seg)]
        t = np.arange(m) / m * cum[-1]
        bx = np.interp(t, cum, closed[:, 0])
        by = np.interp(t, cum, closed[:, 1])
        poly = shapely.Polygon(v)
        x1, y1, x2, y2 = poly.bounds
        s = (np.arange(k) + 0.5) / k
        X, Y = np.meshgrid(x1 + (x2 - x1) * s, y1 + (y2 - y1) * s, indexing="ij")
        inside = shapely.contains_xy(poly, X.ravel(), Y.ravel())
        return cls(np.c_[bx, by], np.c_[X.ravel()[inside], Y.ravel()[inside]])

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.boundary, self.interior]) if self.interior.size else self.boundary

    @property
    def hull(self) -> tuple[float, float, float, float]:
        b = self.boundary
        return (float(b[:, 0].min()), float(b[:, 0].max()), float(b[:, 1].min()), float(b[:, 1].max()))

    def map(self, fun) -> "PlanarSet":
        bx, by = fun(self.boundary[:, 0], self.boundary[:, 1])
        if self.interior.size:
            ix, iy = fun(self.interior[:, 0], self.interior[:, 1])
            inner = np.c_[ix, iy]
        else:
            inner = self.interior
        return PlanarSet(np.c_[bx, by], inner)

    def shape(self) -> shapely.Polygon:
        return shapely.Polygon(self.boundary)


def sizes(J: PlanarSet) -> tuple[float, float]:
    """Horizontal and vertical size l(J), h(J)."""
    x1, x2, y1, y2 = J.hull
    return x2 - x1, y2 - y1


def _square_ok(poly, cx: np.ndarray, cy: np.ndarray, side: float) -> np.ndarray:
    """Per center, whether the square of ``side`` centred there lies inside ``poly``."""
    k = PERIMETER_SAMPLES
    t = np.arange(k) / k
    half = side / 2
    ox = np.r_[-half + side * t, np.full(k, half), half - side * t, np.full(k, -half)]
    oy = np.r_[np.full(k, -half), -half + side * t, np.full(k, half), half - side * t]
    X = cx[:, None] + ox[None]
    Y = cy[:, None] + oy[None]
    inside = shapely.contains_xy(poly, X.ravel(), Y.ravel()).reshape(X.shape)
    return inside.all(axis=1)


def _best_side(poly, cx, cy, hi: float, steps: int) -> tuple[float, int]:
    lo, best = 0.0, -1
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        ok = _square_ok(poly, cx, cy, mid)
        if ok.any():
            lo, best = mid, int(np.flatnonzero(ok)[0])
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(hi, 1e-300):
            break
    return lo, best


def thickness(J: PlanarSet, resolution: float | None = None) -> tuple[float, Square | None]:
    """Largest axis-aligned square inside the boundary polygon.

    Bisection on the side over interior-grid centers, then a pattern search on
    the best center down to ``resolution`` (default: 1e-3 of the smaller size).
    """
    l, h = sizes(J)
    if l <= 0 or h <= 0:
        return 0.0, None
    poly = J.shape()
    if not poly.is_valid or poly.area <= 0:
        poly = shapely.make_valid(poly)
        if poly.area <= 0:
            return 0.0, None
    shapely.prepare(poly)
    res = resolution if resolution is not None else 1e-3 * min(l, h)
    pts = J.interior if J.interior.size else J.boundary
    cx, cy = pts[:, 0].copy(), pts[:, 1].copy()
    side, idx = _best_side(poly, cx, cy, min(l, h), BISECTION_STEPS)
    if idx < 0:
        return 0.0, None
    bx, by = cx[idx], cy[idx]
    step = max(side / 4, res)
    while step >= res / 4:
        moved = False
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
            nx, ny = np.array([bx + dx * step]), np.array([by + dy * step])
            s2, i2 = _best_side(poly, nx, ny, min(l, h), BISECTION_STEPS)
            if i2 >= 0 and s2 > side * (1 + 1e-12):
                side, bx, by, moved = s2, nx[0], ny[0], True
                break
        if not moved:
            step /= 2
    return side, Square(bx - side / 2, by - side / 2, side)


def is_R_regular(l: float, h: float, R: float, eps_norm: float) -> bool:
    """h / l <= R |eps|^{-1/4}."""
    if l <= 0:
        raise ValueError("regularity needs l > 0")
    return h / l <= R * max(eps_norm, EPS_FLOOR) ** -0.25


@dataclass(frozen=True)
class ApproachStep:
    n: int
    level: int
    k: int
    region: str
    l: float
    h: float
    w: float
    regular: bool | None
    event: str = ""
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "level": self.level,
            "k": self.k,
            "region": self.region,
            "l": self.l,
            "h": self.h,
            "w": self.w,
            "is_R_regular": self.regular,
            "event": self.event,
            "detail": self.detail,
        }


@dataclass(frozen=True, eq=False)
class ApproachTrace:
    steps: tuple[ApproachStep, ...]
    sets: tuple[PlanarSet, ...] = field(repr=False)
    end: str
    R: float | None = None

    @property
    def itinerary(self) -> list[str]:
        return [s.region for s in self.steps]

    @property
    def straddled(self) -> bool:
        return self.end == "straddle"


def _labels(T: RenormTower, r: int, J: PlanarSet) -> np.ndarray:
    P = T.levels[r].partition
    pts = J.points
    try:
        return classify_points(P, pts[:, 0], pts[:, 1])
    except DomainError:
        return np.array(["outside-D"])


def _single(labels: np.ndarray) -> str | None:
    u = np.unique(labels)
    return str(u[0]) if u.size == 1 else None


def _map_set(J: PlanarSet, fun) -> PlanarSet:
    return J.map(fun)


def _rescale_depth(T: RenormTower, r: int, J: PlanarSet) -> tuple[int, PlanarSet, str]:
    """Apply F_r, then phi while the set lies in C; returns (k, set, problem)."""
    Fr = T.levels[r].F
    J1 = J.map(Fr)
    k = 0
    lev = r
    while True:
        lab = _labels(T, lev, J1)
        u = _single(lab)
        if u != "C":
            if k == 0:
                return 0, J1, f"F(J) not inside C ({', '.join(sorted(set(lab)))})"
            if u is None or u == "on-manifold":
                return k, J1, f"straddles rescaling manifolds at level {lev}"
            return k, J1, ""
        phi: Rescaling | None = T.levels[lev].rescaling
        if phi is None:
            return k, J1, f"tower exhausted at level {lev}"
        try:
            J1 = J1.map(phi)
        except DomainError as exc:
            return k, J1, f"rescaling left the domain: {exc}"
        k += 1
        lev += 1
        if lev >= len(T.levels):
            return k, J1, f"tower exhausted at level {lev}"


def closest_approach(
    T: RenormTower,
    J0: PlanarSet,
    max_steps: int = 50,
    *,
    level: int = 0,
    R: float | None = None,
    resolution: float | None = None,
    K: dict | None = None,
) -> ApproachTrace:
    """Rescaled orbit of ``J0``: iterate in A, rescale maximally out of B."""
    steps: list[ApproachStep] = []
    sets = [J0]
    J, r = J0, level
    end = "max-steps"
    for n in range(max_steps + 1):
        l, h = sizes(J)
        w, _ = thickness(J, resolution)
        eps = T.levels[r].eps_norm
        if R is None and l > 0:
            R = 2.0 * (h / l) * max(eps, EPS_FLOOR) ** 0.25
        reg = is_R_regular(l, h, R, eps) if l > 0 and R is not None else None
        labels = _labels(T, r, J)
        u = _single(labels)
        if u is None or u == "on-manifold":
            names = ", ".join(sorted(set(labels)))
            if n == 0:
                raise StraddleError(f"initial set straddles a stable manifold ({names})")
            steps.append(ApproachStep(n, r, 0, "straddle", l, h, w, reg, "straddle", names))
            end = "straddle"
            break
        if u in ("outside-D", "C"):
            if n == 0:
                raise StraddleError(f"initial set must lie in A or B, found {u}")
            steps.append(ApproachStep(n, r, 0, u, l, h, w, reg, "left-A-B", u))
            end = "left-A-B"
            break
        if n == max_steps:
            steps.append(ApproachStep(n, r, 0, u, l, h, w, reg, "max-steps"))
            break
        if u == "A":
            steps.append(ApproachStep(n, r, 0, "A", l, h, w, reg))
            try:
                J = J.map(T.levels[r].F)
            except DomainError as exc:
                steps[-1] = ApproachStep(n, r, 0, "A", l, h, w, reg, "domain", str(exc))
                end = "domain"
                break
        else:
            k, J1, problem = _rescale_depth(T, r, J)
            if problem:
                event = "straddle" if "straddle" in problem or "not inside C" in problem else "truncated"
                steps.append(ApproachStep(n, r, k, f"B({k})" if k else "B", l, h, w, reg, event, problem))
                sets.append(J1)
                end = event
                break
            steps.append(ApproachStep(n, r, k, f"B({k})", l, h, w, reg))
            J, r = J1, r + k
        sets.append(J)
    return ApproachTrace(tuple(steps), tuple(sets), end, R)


@dataclass(frozen=True, eq=False)
class DoubleSequenceRow:
    j: int
    level: int
    J0: PlanarSet = field(repr=False)
    square: Square | None
    trace: ApproachTrace = field(repr=False)
    n_good: int | None
    eps_at_bad: float | None
    k_bad: int | None
    end: str

    @property
    def m(self) -> int | None:
        return None if self.n_good is None else self.n_good + 1

    @property
    def steps(self) -> tuple[ApproachStep, ...]:
        return self.trace.steps

    def as_dict(self) -> dict:
        return {
            "row": self.j,
            "level": self.level,
            "square": None if self.square is None else [self.square.x, self.square.y, self.square.side],
            "n": self.n_good,
            "m": self.m,
            "eps_at_bad": self.eps_at_bad,
            "k": self.k_bad,
            "end": self.end,
            "steps": [s.as_dict() for s in self.steps],
        }


def _K_at(T: RenormTower, r: int, b: float, cache: dict) -> float:
    if r not in cache:
        try:
            cache[r] = compute_K(T, r, b).K
        except RegionError as exc:
            cache[r] = exc.partial.K
    return cache[r]


def double_sequence(
    T: RenormTower,
    J0: PlanarSet,
    max_rows: int = 5,
    *,
    b: float = B_DEFAULT,
    max_steps: int = 50,
    resolution: float | None = None,
) -> list[DoubleSequenceRow]:
    """Rows of closest approaches, each restarted from a largest square after its first bad step."""
    rows: list[DoubleSequenceRow] = []
    Kc: dict = {}
    J, r = J0, 0
    _, sq = thickness(J0, resolution)
    for j in range(max_rows):
        try:
            tr = closest_approach(T, J, max_steps, level=r, resolution=resolution)
        except StraddleError as exc:
            rows.append(DoubleSequenceRow(j, r, J, sq, ApproachTrace((), (J,), "straddle"), None, None, None, f"straddle: {exc}"))
            break
        bad = None
        for i, st in enumerate(tr.steps):
            if st.k >= 1 and not st.event and st.k > _K_at(T, st.level, b, Kc):
                bad = i
                break
        if bad is None:
            rows.append(DoubleSequenceRow(j, r, J, sq, tr, None, None, None, "never-bad" if tr.end == "max-steps" else tr.end))
            break
        st = tr.steps[bad]
        trunc = ApproachTrace(tr.steps[: bad + 1], tr.sets[: bad + 2], "bad", tr.R)
        nxt = tr.sets[bad + 1]
        w, sq_next = thickness(nxt, resolution)
        row = DoubleSequenceRow(j, r, J, sq, trunc, bad, T.levels[st.level].eps_norm, st.k, "bad")
        rows.append(row)
        if w <= 0 or sq_next is None:
            rows.append(DoubleSequenceRow(j + 1, r + st.k, nxt, None, ApproachTrace((), (nxt,), "degenerate"), None, None, None, "thickness-zero"))
            break
        J, r, sq = PlanarSet.square(sq_next), st.level + st.k, sq_next
    return rows


def alpha_constant(lam: float) -> float:
    return math.log(2.0) / (6.0 * math.log(lam))


def rate_report(rows: list[DoubleSequenceRow], lam: float = 2.5029078750959, T: RenormTower | None = None, b: float = B_DEFAULT) -> dict:
    """Per-row rates and the two-row inequalities with fitted E and alpha = ln2 / (6 ln lam)."""
    alpha = alpha_constant(lam)
    per_row = []
    factors_all = []
    for row in rows:
        st = row.steps
        good_steps = st if row.n_good is None else st[: row.n_good]
        f = [b2.l / a.l for a, b2 in zip(st, st[1:]) if a in good_steps and a.l > 0 and not a.event]
        factors_all.extend(f)
        wf = [
            b2.w / (a.w * max(T.levels[a.level].eps_norm, EPS_FLOOR) ** 1.5)
            for a, b2 in zip(st, st[1:])
            if T is not None and a.w > 0 and b2.w > 0 and T.levels[a.level].eps_norm > 0
        ]
        per_row.append(
            {
                "row": row.j,
                "m": row.m,
                "eps": row.eps_at_bad,
                "k": row.k_bad,
                "l0": st[0].l if st else None,
                "expansion_factors": f,
                "all_expanding": all(x > 1 for x in f),
                "thickness_step_constant": min(wf) if wf else None,
                "end": row.end,
            }
        )
    E = min(factors_all) if factors_all else None
    pairs = []
    for a, b2 in zip(per_row, per_row[1:]):
        if a["m"] is None or a["eps"] is None or a["l0"] is None or b2["l0"] is None:
            continue
        le = math.log(a["eps"])
        rel_lhs = math.log(b2["l0"])
        rel_rhs = 2 * a["m"] * le + math.log(a["l0"])
        entry = {
            "rows": [a["row"], b2["row"]],
            "l_relation": {"lhs": rel_lhs, "rhs": rel_rhs, "holds": rel_lhs >= rel_rhs},
        }
        if b2["eps"] is not None:
            bound = a["eps"] ** (a["eps"] ** (-2 * alpha))
            entry["eps_two_chain"] = {"eps_next": b2["eps"], "bound": bound, "holds": b2["eps"] <= bound}
        if b2["m"] is not None and E is not None and E > 0:
            rhs = (math.log(E) / (-2 * le)) * b2["m"] + (1 / a["eps"]) ** alpha + math.log(a["l0"]) / (-2 * le)
            entry["two_row"] = {"lhs": a["m"], "rhs": rhs, "holds": a["m"] > rhs}
        pairs.append(entry)
    return {"alpha": alpha, "lambda": lam, "E": E, "rows": per_row, "two_row": pairs}


def square_in_F_image(F: HenonMap, sq: Square, n: int = 65) -> Square:
    """A square inside F(sq) built from the common horizontal span over a height window.

    Heights of F(sq) are the x-range of ``sq``; at height x the image row is
    h(x, [y0, y0 + s]). The window is shrunk until the rows share a span as long
    as the window.
    """
    x0, x1, y0, y1 = sq.bounds
    xc = 0.5 * (x0 + x1)
    ys = np.linspace(y0, y1, n)
    half = 0.5 * sq.side
    for _ in range(60):
        xs = np.linspace(xc - half, xc + half, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        H = F.h(X, Y)
        lo = float(H.min(axis=1).max())
        hi = float(H.max(axis=1).min())
        if hi - lo >= 2 * half:
            side = 2 * half
            mid = 0.5 * (lo + hi)
            return Square(mid - side / 2, xc - half, side)
        half *= 0.8
    return Square(xc, xc, 0.0)


def square_in_phi_image(phi: Rescaling, sq: Square) -> Square:
    """Square of side lam * side inside phi(sq), valid where |h_x| - |eps_y| >= 1."""
    x0, x1, y0, y1 = sq.bounds
    ys = np.linspace(y0, y1, 65)
    a = phi.F.h(np.full_like(ys, x0), ys)
    c = phi.F.h(np.full_like(ys, x1), ys)
    lo = float(np.minimum(a, c).max())
    hi = float(np.maximum(a, c).min())
    mid = 0.5 * (lo + hi)
    side = phi.lam * sq.side
    sx = phi.s(mid)
    sy = phi.s(0.5 * (y0 + y1))
    return Square(sx - side / 2, sy - side / 2, side)


def vertical_line_preimage_slope(F: HenonMap, um: UnimodalMap, x_line: float, n: int = 257) -> dict:
    """Preimage under F of the vertical line x = ``x_line``, restricted to B.

    The preimage is {h(x, y) = x_line}, solved as y(x) over the x in B whose
    vertical segment reaches the line. An interior extremum of y(x) means the
    curve turns around and is not a vertical graph.
    """
    if F.degenerate:
        return {"ok": False, "reason": "degenerate map: preimage is a union of vertical lines"}
    xs = np.linspace(um.p1, um.q0, n)
    a = F.h(xs, np.full_like(xs, F.Iv.lo)) - x_line
    b = F.h(xs, np.full_like(xs, F.Iv.hi)) - x_line
    xs = xs[a * b <= 0]
    if xs.size < 3:
        return {"ok": False, "reason": f"line x={x_line:.6g} has no preimage over B inside Iv"}
    lo = np.full_like(xs, F.Iv.lo)
    hi = np.full_like(xs, F.Iv.hi)
    ys = solve_monotone(lambda y: F.h(xs, y), lambda y: -F.e_y(xs, y), np.full_like(xs, x_line), lo, hi)
    i = int(np.argmax(ys)) if F.e_y(um.c, 0.0) > 0 else int(np.argmin(ys))
    return {
        "ok": True,
        "interior_extremum": bool(0 < i < xs.size - 1),
        "x_extremum": float(xs[i]),
        "x_range": (float(xs[0]), float(xs[-1])),
        "critical_point": um.c,
    }
