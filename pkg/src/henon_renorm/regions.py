"""Good and bad regions: the boundary K_n and the sampled geometry checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fnrep import DomainError, Interval, lobatto_nodes
from .manifolds import N_HEIGHTS, classify_points
from .renorm import RenormTower, RescalingLevelSet, level_manifolds

__all__ = [
    "B_DEFAULT",
    "J_MAX",
    "RegionBoundary",
    "RegionError",
    "compute_K",
    "region_of",
    "rescaling_level_by_manifolds",
    "verify_region_geometry",
    "fit_bracket_constant",
]

B_DEFAULT = 10.0
J_MAX = 12


class RegionError(RuntimeError):
    """Manifolds ran out before the witness condition failed; ``partial`` keeps the data."""

    def __init__(self, msg: str, partial: "RegionBoundary"):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class RegionBoundary:
    n: int
    b: float
    K: float
    witnesses: tuple[float, ...]
    eps_norm: float
    threshold: float
    levels: RescalingLevelSet | None = field(default=None, repr=False, compare=False)

    @property
    def infinite(self) -> bool:
        return math.isinf(self.K)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "b": self.b,
            "K": None if self.infinite else int(self.K),
            "K_infinite": self.infinite,
            "witnesses": list(self.witnesses),
            "eps_norm": self.eps_norm,
            "threshold": self.threshold,
        }


def _witness(g, tip_x: float, Ih: Interval) -> float:
    ys = lobatto_nodes(N_HEIGHTS, Ih)
    try:
        xs = g(ys)
    except DomainError:
        xs = g.xs[(g.ys >= Ih.lo) & (g.ys <= Ih.hi)]
    xs = xs[(xs >= Ih.lo) & (xs <= Ih.hi)]
    return float(np.min(np.abs(xs - tip_x))) if xs.size else math.inf


def compute_K(
    T: RenormTower,
    n: int,
    b: float = B_DEFAULT,
    j_max: int = J_MAX,
    *,
    levels: RescalingLevelSet | None = None,
) -> RegionBoundary:
    """Largest K with |pi_x z - pi_x tau_n| > b |eps_n| on W_n^0(j) for all j <= K.

    ``levels`` reuses previously computed level manifolds of level ``n``.
    """
    lv = T.levels[n]
    eps = lv.eps_norm
    thr = b * eps
    if lv.degenerate or eps == 0.0:
        return RegionBoundary(n, b, math.inf, (), eps, thr)
    if lv.tip is None:
        raise ValueError(f"tip unknown at level {n}")
    L = levels if levels is not None and levels.n == n else level_manifolds(T, n, j_max)
    wit = []
    for j in range(1, L.j_max + 1):
        w = _witness(L.W0[j], lv.tip[0], lv.F.Ih)
        wit.append(w)
        if not w > thr:
            return RegionBoundary(n, b, j - 1, tuple(wit), eps, thr, L)
    partial = RegionBoundary(n, b, L.j_max, tuple(wit), eps, thr, L)
    if L.j_max >= j_max:
        # beyond the cap the graphs are not separable from the tip in double precision
        return partial
    raise RegionError(
        f"level manifolds end at j={L.j_max} before the witness drops below {thr:.3g}"
        + (f" ({L.reason})" if L.reason else ""),
        partial,
    )


def region_of(j: int, K: RegionBoundary | float) -> str:
    if j < 1:
        raise ValueError("rescaling level must be at least 1")
    k = K.K if isinstance(K, RegionBoundary) else K
    return "good" if j <= k else "bad"


def rescaling_level_by_manifolds(L: RescalingLevelSet, x, y) -> np.ndarray:
    """1 + largest i with W^0(i) < x < W^2(i); j_max + 1 marks 'deeper than resolved'."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros(x.shape, dtype=int)
    for i in range(L.j_max + 1):
        inside = (L.W0[i](y) < x) & (x < L.W2[i](y))
        out = np.where(inside, i + 1, out)
    return out


def _sample_D(T: RenormTower, n: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor sample of D over the heights it can reach."""
    lv = T.levels[n]
    P = lv.partition
    side = int(math.isqrt(npts))
    ys = np.linspace(max(lv.F.Iv.lo, P.W0_m1.xs.min()), min(lv.F.Iv.hi, P.W2_m1.xs.max()), side)
    t = (np.arange(side) + 0.5) / side
    Tt, Y = np.meshgrid(t, ys, indexing="ij")
    X = P.W0_m1(Y) + Tt * (P.W2_m1(Y) - P.W0_m1(Y))
    return X.ravel(), Y.ravel()


def verify_region_geometry(
    T: RenormTower, n: int, K: RegionBoundary, *, npts: int = 10_000
) -> dict:
    """Sampled checks of the good/bad region geometry at level ``n``; report-valued."""
    lv = T.levels[n]
    F, P = lv.F, lv.partition
    tau_x = lv.tip[0]
    v = lv.unimodal.c
    bε = K.threshold
    L = K.levels if K.levels is not None else level_manifolds(T, n, J_MAX)
    X, Y = _sample_D(T, n, npts)
    FX, FY = F(X, Y)
    inC = classify_points(P, FX, FY) == "C"
    jlev = rescaling_level_by_manifolds(L, FX, FY)
    Kf = L.j_max if K.infinite else int(K.K)
    report: dict = {"n": n, "b": K.b, "K": None if K.infinite else Kf, "samples": int(X.size)}

    # (i) right components C^r(j), j <= K, miss F(D)
    hits, margins = [], []
    for j in range(1, min(Kf, L.j_max) + 1):
        inside = (L.W2[j](FY) < FX) & (FX < L.W2[j - 1](FY))
        hits.append(int(inside.sum()))
        margins.append(float(np.min(L.W2[j](FY) - FX)))
    report["i_right_component_empty"] = {"pass": all(h == 0 for h in hits), "hits": hits, "margins": margins}

    # (ii) points of F(D) in good levels stay b|eps| from the tip
    good = inC & (jlev <= Kf)
    d_tip = np.abs(FX - tau_x)
    m2 = float(d_tip[good].min()) if good.any() else math.inf
    report["ii_good_far_from_tip"] = {"pass": bool(m2 > bε), "min_distance": m2, "threshold": bε}

    # (iii) preimages in B of good levels keep c sqrt(b|eps|) from the critical point
    root = math.sqrt(bε) if bε > 0 else math.inf
    d_v = np.abs(X - v)
    c3 = float(d_v[good].min() / root) if good.any() and root > 0 and math.isfinite(root) else math.inf
    report["iii_good_B_away_from_center"] = {"pass": bool(c3 > 0), "fitted_c": c3}

    # (iv) bad levels sit within c b|eps| of the tip and c sqrt(b|eps|) of v
    bad = inC & (jlev > Kf)
    if bad.any() and bε > 0:
        c4a = float(d_tip[bad].max() / bε)
        c4b = float(d_v[bad].max() / root)
    else:
        c4a = c4b = 0.0
    report["iv_bad_near_tip"] = {"pass": bool(math.isfinite(c4a) and math.isfinite(c4b)), "fitted_c_tip": c4a, "fitted_c_center": c4b, "count": int(bad.sum())}
    report["pass"] = all(chk["pass"] for chk in report.values() if isinstance(chk, dict))
    return report


def fit_bracket_constant(lams_K: list[tuple[float, int, float, float]]) -> float:
    """Smallest c with c^-1 <= lam^K (b eps)^{1/2} <= c over (lam, K, b, eps) tuples."""
    r = [lam**K * math.sqrt(b * eps) for lam, K, b, eps in lams_K]
    return max(max(r), 1.0 / min(r))
