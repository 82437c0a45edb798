"""Hénon renormalization, the tower F_n = R^n F, the tip and rescaling levels."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fnrep import (
    AnalyticFn,
    DomainError,
    FitError,
    Interval,
    interpolate,
    interpolate2,
    lobatto_nodes,
)
from .henon import HenonMap, InversionError, SaddlePoint, fixed_points, invert_h
from .manifolds import (
    N_HEIGHTS,
    ON_MANIFOLD_TOL,
    ContractionError,
    Partition,
    PartitionError,
    PullbackError,
    VerticalGraph,
    build_partition,
)
from .unimodal import (
    Affine,
    FeigenbaumSolution,
    StructureError,
    UnimodalMap,
    build_unimodal,
    solve_feigenbaum,
)

__all__ = [
    "Rescaling",
    "TowerLevel",
    "RenormTower",
    "Tip",
    "RescalingLevelSet",
    "HenonRenormalizationError",
    "TipError",
    "Containment",
    "is_renormalizable_henon",
    "renormalize_henon",
    "build_tower",
    "compute_tip",
    "level_manifolds",
    "rescaling_trick_check",
    "rescaling_trick_derivative",
    "feigenbaum_lift",
    "universality_spread",
]

GRID_NX = 81
GRID_NY = 33
FIT_DEGREE = 80
DEFAULT_DEPTH = 12
DEGENERATE_FACTOR = 1e3
BRANCH_MARGIN = 0.1
TIP_TOL = 1e-10


class HenonRenormalizationError(ValueError):
    pass


class TipError(RuntimeError):
    pass


@dataclass(frozen=True)
class Containment:
    ok: bool
    margin: float

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=False)
class Rescaling:
    """phi = Lambda o H with H(x, y) = (h(x, y), y) and Lambda = s x s."""

    s: Affine
    F: HenonMap
    branch: Interval

    @property
    def lam(self) -> float:
        return self.s.lam

    def __call__(self, x, y):
        return self.s(self.F.h(x, y)), self.s(y)

    def inverse(self, x, y):
        X = self.s.inv(x)
        Y = self.s.inv(y)
        return invert_h(self.F, Y, X, self.branch), Y


def _c_branch(um: UnimodalMap, Ih: Interval) -> Interval:
    """Right monotone branch of h_y used by phi^-1, kept clear of the critical point."""
    return Interval(um.c + BRANCH_MARGIN * (um.q0 - um.c), Ih.hi)


def is_renormalizable_henon(F: HenonMap, P: Partition, n: int = 33) -> Containment:
    """F(B) inside C on an ``n x n`` sample of B.

    F maps W1(0) onto W0(0), so the margin is the distance of F(B) to W2(0).
    """
    # heights reachable from D are its x-extent, since pi_y F = pi_x
    ylo = max(F.Iv.lo, float(P.W0_m1.xs.min()))
    yhi = min(F.Iv.hi, float(P.W2_m1.xs.max()))
    ys = np.linspace(ylo, yhi, n)
    t = np.linspace(0.0, 1.0, n)
    T, Y = np.meshgrid(t, ys, indexing="ij")
    X = P.W1_0(Y) + T * (P.W0_0(Y) - P.W1_0(Y))
    hx, hy = F(X, Y)
    try:
        left = hx - P.W0_0(hy)
        right = P.W2_0(hy) - hx
    except DomainError:
        return Containment(False, -np.inf)
    margin = float(right.min())
    ok = margin > 0.0 and left.min() >= -ON_MANIFOLD_TOL
    return Containment(bool(ok), margin)


def _renormalized_h(F: HenonMap, s: Affine, branch: Interval):
    def hR(x, y):
        X = s.inv(x)
        Y = s.inv(y)
        u = invert_h(F, Y, X, branch)
        return s(F.h(F.h(X, u), X))

    return hR


def renormalize_henon(
    F: HenonMap, P: Partition | None = None, *, check: bool = True
) -> tuple[HenonMap, Rescaling, dict]:
    """RF = phi o F^2 o phi^-1 refit on Ih x s(Iv).

    Returns the map, the rescaling and a diagnostics dict.
    """
    if check:
        P = P or build_partition(F)
        test = is_renormalizable_henon(F, P)
        if not test:
            raise HenonRenormalizationError(f"F(B) not inside C (margin {test.margin:.3g})")
    try:
        um = build_unimodal(F.f, normalize_tol=None)
    except StructureError as exc:
        raise HenonRenormalizationError(str(exc)) from exc
    s = um.rescaling()
    branch = _c_branch(um, F.Ih)
    Iv1 = s.image(F.Iv)
    hR = _renormalized_h(F, s, branch)
    try:
        fR = interpolate(lambda x: hR(x, np.zeros_like(x)), F.Ih, FIT_DEGREE)
        eR = interpolate2(lambda x, y: fR(x) - hR(x, y), F.Ih, Iv1, GRID_NX, GRID_NY)
    except (InversionError, DomainError, FitError) as exc:
        raise HenonRenormalizationError(f"phi^-1 branch failure: {exc}") from exc
    fnorm = float(np.max(np.abs(fR.coeffs)))
    eR = eR.chopped(abs_floor=4 * np.finfo(float).eps * fnorm)
    raw = HenonMap(fR, eR, F.Ih, Iv1, F.delta)
    en = raw.eps_norm()
    degenerate = en < DEGENERATE_FACTOR * np.finfo(float).eps * fnorm
    RF = raw.degenerate_version() if degenerate else raw
    diag = {
        "eps_norm_raw": en,
        "degenerate_continuation": bool(degenerate and not F.degenerate),
        "f_trailing": fR.trailing(),
        "f_degree": fR.degree,
    }
    return RF, Rescaling(s, F, branch), diag


@dataclass(frozen=True, eq=False)
class TowerLevel:
    n: int
    F: HenonMap
    unimodal: UnimodalMap
    partition: Partition | None
    rescaling: Rescaling | None
    eps_norm: float
    Iv: Interval
    degenerate: bool
    degenerate_continuation: bool = False
    fixed_points: tuple[SaddlePoint, SaddlePoint] | None = None
    tip: tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def lam(self) -> float | None:
        return None if self.rescaling is None else self.rescaling.lam

    @property
    def critical_point(self) -> float:
        return self.unimodal.c


@dataclass(frozen=True)
class Tip:
    points: tuple[tuple[float, float], ...]
    agreement: tuple[float, ...]
    converged: bool


@dataclass(frozen=True, eq=False)
class RenormTower:
    levels: tuple[TowerLevel, ...]
    reason: str
    tip: Tip | None = None

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, n: int) -> TowerLevel:
        return self.levels[n]

    @property
    def depth(self) -> int:
        """Number of renormalizations performed."""
        return len(self.levels) - 1

    def decay_ratios(self) -> list[float | None]:
        out = []
        for a, b in zip(self.levels, self.levels[1:]):
            if a.eps_norm > 0 and not b.degenerate_continuation and not b.degenerate:
                out.append(b.eps_norm / a.eps_norm**2)
            else:
                out.append(None)
        return out

    def report(self) -> list[dict]:
        ratios = self.decay_ratios() + [None]
        rows = []
        for lv, r in zip(self.levels, ratios):
            fps = None
            if lv.fixed_points is not None:
                fps = [
                    {"x": p.x, "y": p.y, "multipliers": list(p.multipliers)} for p in lv.fixed_points
                ]
            rows.append(
                {
                    "n": lv.n,
                    "lambda_n": lv.lam,
                    "eps_norm": lv.eps_norm,
                    "tip": list(lv.tip) if lv.tip is not None else None,
                    "fixed_points": fps,
                    "decay_ratio": r,
                    "Iv": list(lv.Iv.as_tuple()),
                    "degenerate_continuation": lv.degenerate_continuation,
                    "critical_point": lv.unimodal.c,
                    "critical_value": lv.unimodal.c1,
                }
            )
        return rows


def _make_level(n: int, F: HenonMap, flags: dict) -> TowerLevel:
    um = build_unimodal(F.f, normalize_tol=None)
    P = build_partition(F)
    fps = (P.p_m1, P.p0)
    return TowerLevel(
        n=n,
        F=F,
        unimodal=um,
        partition=P,
        rescaling=None,
        eps_norm=F.eps_norm(),
        Iv=F.Iv,
        degenerate=F.degenerate,
        degenerate_continuation=flags.get("degenerate_continuation", False),
        fixed_points=fps,
        diagnostics=flags,
    )


def _with(level: TowerLevel, **kw) -> TowerLevel:
    d = {k: getattr(level, k) for k in level.__dataclass_fields__}
    d.update(kw)
    return TowerLevel(**d)


def build_tower(F: HenonMap, depth: int = DEFAULT_DEPTH, *, tip: bool = True) -> RenormTower:
    """Levels 0..depth; stops early at the first level that cannot be renormalized."""
    levels: list[TowerLevel] = []
    reason = "depth reached"
    flags: dict = {}
    cont = False
    for n in range(depth + 1):
        try:
            lv = _make_level(n, F, flags)
        except (StructureError, PartitionError, PullbackError, ContractionError, DomainError) as exc:
            reason = f"level {n}: {exc}"
            break
        levels.append(lv)
        if n == depth:
            break
        test = is_renormalizable_henon(F, lv.partition)
        if not test:
            reason = f"level {n} not renormalizable (margin {test.margin:.3g})"
            break
        try:
            RF, phi, flags = renormalize_henon(F, lv.partition, check=False)
        except HenonRenormalizationError as exc:
            reason = f"level {n}: {exc}"
            break
        cont = cont or flags["degenerate_continuation"]
        flags = dict(flags, degenerate_continuation=cont)
        levels[-1] = _with(lv, rescaling=phi)
        F = RF
    T = RenormTower(tuple(levels), reason)
    if tip and len(levels) >= 2:
        t = compute_tip(T)
        new = [_with(lv, tip=t.points[i]) if i < len(t.points) else lv for i, lv in enumerate(levels)]
        T = RenormTower(tuple(new), reason, t)
    return T


def _tip_seed(T: RenormTower, M: int) -> tuple[float, float]:
    lv = T.levels[M]
    y = 0.0
    if lv.rescaling is not None:
        s = lv.rescaling.s
        y = s.offset / (1.0 - s.slope)
    return (lv.unimodal.c1, y)


def _pull_chain(T: RenormTower, M: int, stop: int = 0) -> list[tuple[float, float]]:
    x, y = _tip_seed(T, M)
    pts = [(x, y)]
    for k in range(M - 1, stop - 1, -1):
        try:
            x, y = T.levels[k].rescaling.inverse(x, y)
        except (InversionError, DomainError) as exc:
            raise TipError(f"tip pullback failed at level {k}: {exc}") from exc
        pts.append((float(x), float(y)))
    return pts[::-1]


def compute_tip(T: RenormTower, n: int = 0, depth: int | None = None) -> Tip:
    """Tips tau_n..tau_M by pulling a seed at level M = n + depth back through phi^-1.

    The seed is the critical value of f_M at the fixed height of s_M; a second
    chain seeded at M - 1 measures agreement. Raises only if the two chains
    fail to contract toward each other.
    """
    last = len(T.levels) - 1
    M = last if depth is None else min(n + depth, last)
    if M - n < 1:
        raise TipError("tip needs at least one rescaling")
    a = _pull_chain(T, M, n)
    b = _pull_chain(T, M - 1, n)
    agree = tuple(float(np.hypot(p[0] - q[0], p[1] - q[1])) for p, q in zip(a, b))
    if len(agree) >= 2 and agree[0] > agree[-1] * (1.0 + 1e-9) and agree[-1] > TIP_TOL:
        raise TipError("pullback chains are not contracting")
    return Tip(tuple(a), agree, bool(agree[0] < TIP_TOL))


@dataclass(frozen=True, eq=False)
class RescalingLevelSet:
    n: int
    W0: tuple[VerticalGraph, ...]
    W2: tuple[VerticalGraph, ...]
    points: tuple[tuple[float, float], ...]
    reason: str = ""

    @property
    def j_max(self) -> int:
        return len(self.W0) - 1


def _pull_graph(lv: TowerLevel, g: VerticalGraph, label: str) -> VerticalGraph:
    """phi^-1 of a vertical graph at level n+1, per height Y on Iv_n."""
    phi = lv.rescaling
    F = lv.F
    ys = lobatto_nodes(N_HEIGHTS, F.Iv)
    target = phi.s.inv(g(phi.s(ys)))
    xs = invert_h(F, ys, target, phi.branch)
    m = float(np.min(np.abs(F.h_x(xs, ys))))
    ey = F.eps_y_norm() if not F.degenerate else 0.0
    L = (g.lipschitz + ey) / m
    return VerticalGraph(label, F.Iv, ys, xs, L)


def level_manifolds(T: RenormTower, n: int = 0, j_max: int | None = None) -> RescalingLevelSet:
    last = len(T.levels) - 1
    j_max = last - n if j_max is None else min(j_max, last - n)
    W0: list[VerticalGraph] = [T.levels[n].partition.W0_0.relabel(f"W{n}^0(0)")]
    W2: list[VerticalGraph] = [T.levels[n].partition.W2_0.relabel(f"W{n}^2(0)")]
    p0 = T.levels[n].partition.p0
    pts = [(p0.x, p0.y)]
    reason = ""
    for j in range(1, j_max + 1):
        try:
            g0 = T.levels[n + j].partition.W0_0
            g2 = T.levels[n + j].partition.W2_0
            z = (T.levels[n + j].partition.p0.x, T.levels[n + j].partition.p0.y)
            for k in range(n + j - 1, n - 1, -1):
                lv = T.levels[k]
                g0 = _pull_graph(lv, g0, f"W{k}^0({n + j - k})")
                g2 = _pull_graph(lv, g2, f"W{k}^2({n + j - k})")
                z = lv.rescaling.inverse(*z)
        except (InversionError, DomainError) as exc:
            reason = f"j={j}: {exc}"
            break
        W0.append(g0)
        W2.append(g2)
        pts.append((float(z[0]), float(z[1])))
    return RescalingLevelSet(n, tuple(W0), tuple(W2), tuple(pts), reason)


def rescaling_trick_check(sol: FeigenbaumSolution, j: int, npts: int = 128) -> float:
    """sup over |x| <= lam^-j of |[(-lam) g]^j o g(x) - g((-lam)^j x)|."""
    g, lam = sol.g.f, sol.lam
    xs = np.linspace(-(lam**-j), lam**-j, npts)
    z = g(xs)
    for _ in range(j):
        z = -lam * g(z)
    return float(np.max(np.abs(z - g((-lam) ** j * xs))))


def rescaling_trick_derivative(sol: FeigenbaumSolution, j: int, npts: int = 128) -> tuple[float, float]:
    """min and max of |d/dx [(-lam) g]^j o g| / lam^j over lam^-(j+1) <= |x| <= lam^-j."""
    g, lam = sol.g.f, sol.lam
    dg = g.deriv()
    t = np.linspace(lam ** -(j + 1), lam**-j, npts // 2)
    xs = np.r_[-t[::-1], t]
    z = g(xs)
    d = dg(xs)
    for _ in range(j):
        d = -lam * dg(z) * d
        z = -lam * g(z)
    r = np.abs(d) / lam**j
    return float(r.min()), float(r.max())


def feigenbaum_lift(
    sol: FeigenbaumSolution | None = None, Ih: Interval | None = None, degree: int = 60
) -> tuple[HenonMap, FeigenbaumSolution]:
    """G(x, y) = (g(x), x) with g solved on a symmetric domain covering Ih."""
    from .henon import IH_DEFAULT

    Ih = Ih or IH_DEFAULT
    L = max(abs(Ih.lo), abs(Ih.hi))
    if sol is None or sol.g.domain.lo > Ih.lo or sol.g.domain.hi < Ih.hi:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = solve_feigenbaum(degree, half_width=L)
    return HenonMap(sol.g.f, None, Ih, Ih), sol


def universality_spread(F: HenonMap, n: int = 33) -> float | None:
    """Relative spread in y of eps(x, y) / y, over |y| >= 10% of Iv; None if degenerate."""
    if F.eps is None:
        return None
    xs = np.linspace(F.Ih.lo, F.Ih.hi, n)
    ys = np.linspace(F.Iv.lo, F.Iv.hi, n)
    ys = ys[np.abs(ys) >= 0.1 * max(abs(F.Iv.lo), abs(F.Iv.hi))]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    q = F.eps(X, Y) / Y
    scale = np.max(np.abs(q))
    if scale == 0:
        return None
    return float(np.max(q.max(axis=1) - q.min(axis=1)) / scale)
