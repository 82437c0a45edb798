"""Unimodal maps, their period-doubling renormalization, and the fixed point g.

Coordinates follow the normalization with the positive-multiplier fixed point
at -1 and f(1) = -1; the classical g(0) = 1 normalization appears only in the
solver seed.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C

from .fnrep import (
    AnalyticFn,
    BracketError,
    CompositionError,
    Interval,
    compose_refit,
    find_root_monotone,
)

__all__ = [
    "KAPPA",
    "Affine",
    "UnimodalMap",
    "FeigenbaumSolution",
    "Containment",
    "StructureError",
    "RenormalizationError",
    "SolverError",
    "SingularityError",
    "UnderResolvedWarning",
    "build_unimodal",
    "is_renormalizable_unimodal",
    "renormalize_unimodal",
    "solve_feigenbaum",
    "backward_orbit_b",
    "schwarzian",
    "expansion_check",
    "unimodal_class_check",
    "functional_equation_pushforward",
]

# Margin constant of the unimodal class; any small positive value works.
KAPPA = 0.05

# classical seed G(x) = 1 - 1.52763 x^2 + 0.10482 x^4
_SEED = (1.0, -1.52763, 0.10482)


class StructureError(ValueError):
    """The map lacks the fixed-point structure of a renormalizable unimodal map."""


class RenormalizationError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class SingularityError(ZeroDivisionError):
    pass


class UnderResolvedWarning(UserWarning):
    """Trailing Chebyshev coefficients are too large for the requested accuracy."""


@dataclass(frozen=True)
class Affine:
    """x -> offset + slope * x."""

    offset: float
    slope: float

    def __call__(self, x):
        return self.offset + self.slope * np.asarray(x, dtype=float) if np.ndim(x) else self.offset + self.slope * float(x)

    def inv(self, x):
        return (np.asarray(x, dtype=float) - self.offset) / self.slope if np.ndim(x) else (float(x) - self.offset) / self.slope

    @property
    def lam(self) -> float:
        return abs(self.slope)

    def image(self, iv: Interval) -> Interval:
        a, b = self(iv.lo), self(iv.hi)
        return Interval(min(a, b), max(a, b))

    def preimage(self, iv: Interval) -> Interval:
        a, b = self.inv(iv.lo), self.inv(iv.hi)
        return Interval(min(a, b), max(a, b))

    @classmethod
    def through(cls, x0: float, y0: float, x1: float, y1: float) -> "Affine":
        slope = (y1 - y0) / (x1 - x0)
        return cls(y0 - slope * x0, slope)


@dataclass(frozen=True, eq=False)
class UnimodalMap:
    f: AnalyticFn
    c: float
    c1: float
    q_minus1: float
    q0: float
    p1: float
    p2: float

    @property
    def domain(self) -> Interval:
        return self.f.domain

    def A(self) -> tuple[Interval, Interval]:
        return Interval(self.q_minus1, self.p1), Interval(self.p2, self.qhat_minus1())

    def B(self) -> Interval:
        return Interval(self.p1, self.q0)

    def C(self) -> Interval:
        return Interval(self.q0, self.p2)

    def qhat_minus1(self) -> float:
        """Preimage of the fixed point -1 on the decreasing branch."""
        return _root(lambda x: self.f(x) - self.q_minus1, self.c, self.domain.hi)

    def rescaling(self) -> Affine:
        """Orientation-reversing affine map with s(q0) = -1 and s(p1) = 1."""
        return Affine.through(self.q0, -1.0, self.p1, 1.0)


@dataclass(frozen=True, eq=False)
class FeigenbaumSolution:
    g: UnimodalMap
    lam: float
    residual: float
    iterations: int
    degree: int
    seconds: float = 0.0
    identities: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Containment:
    """Boolean containment verdict with the smallest signed margin."""

    ok: bool
    margin: float

    def __bool__(self) -> bool:
        return self.ok


def _root(fun, lo: float, hi: float, end_tol: float = 1e-13) -> float:
    for end in (lo, hi):
        if abs(float(fun(end))) <= end_tol:
            return end
    try:
        return find_root_monotone(fun, Interval(lo, hi))
    except (BracketError, ValueError) as exc:
        raise StructureError(str(exc)) from exc


def _critical_point(f: AnalyticFn) -> float:
    df = f.deriv()
    dom = f.domain
    xs = np.linspace(dom.lo, dom.hi, 513)
    i = int(np.argmax(f(xs)))
    if i == 0 or i == xs.size - 1:
        raise StructureError("maximum on the boundary: no interior critical point")
    return find_root_monotone(df, Interval(xs[i - 1], xs[i + 1]))


def build_unimodal(f: AnalyticFn, normalize_tol: float | None = 1e-8) -> UnimodalMap:
    """Critical point, fixed points and the points p1, p2 of ``f``.

    ``normalize_tol`` checks f(-1) = -1; pass ``None`` for maps that are
    only approximately normalized (deeper tower levels).
    """
    if normalize_tol is not None and abs(f(-1.0) + 1.0) > normalize_tol:
        raise StructureError(f"f(-1) = {f(-1.0):.12g}, expected -1")
    c = _critical_point(f)
    d2 = f.deriv(2)(c)
    if not d2 < 0:
        raise StructureError("critical point is not a maximum")
    c1 = f(c)
    lo, hi = f.domain.lo, f.domain.hi
    df = f.deriv()
    if normalize_tol is not None:
        qm1 = -1.0
    else:
        qm1 = _root(lambda x: f(x) - x, lo, c)
    q0 = _root(lambda x: f(x) - x, c, hi)
    if not df(q0) < -1.0:
        raise StructureError(f"fixed point {q0:.6g} has multiplier {df(q0):.6g} > -1")
    if not df(qm1) > 1.0:
        raise StructureError(f"fixed point {qm1:.6g} is not expanding")
    p1 = _root(lambda x: f(x) - q0, qm1, c)
    p2 = _root(lambda x: f(x) - p1, c, hi)
    return UnimodalMap(f, c, c1, qm1, q0, p1, p2)


def is_renormalizable_unimodal(m: UnimodalMap, n: int = 129) -> Containment:
    """Test f(B) in C on ``n`` samples of B.

    f(q0) = q0 pins the left end, so the margin is p2 - max f(B).
    """
    xs = np.linspace(m.p1, m.q0, n)
    ys = m.f(xs)
    margin = float(m.p2 - max(ys.max(), m.c1 if m.p1 <= m.c <= m.q0 else -np.inf))
    ok = margin > 0.0 and ys.min() >= m.q0 - 1e-12
    return Containment(bool(ok), margin)


def _affine_compose(s: Affine, fn: AnalyticFn) -> AnalyticFn:
    c = s.slope * fn.coeffs
    c[0] += s.offset
    return AnalyticFn(fn.domain, c, fn.residual * s.lam, fn.pad)


def renormalize_unimodal(
    m: UnimodalMap, degree: int = 80, normalize_tol: float | None = 1e-8
) -> tuple[UnimodalMap, Affine]:
    """R f = s o f^2 o s^-1 on the domain of f."""
    test = is_renormalizable_unimodal(m)
    if not test:
        raise RenormalizationError(f"f(B) not inside C (margin {test.margin:.3g})")
    s = m.rescaling()
    dom = m.domain
    try:
        inner = compose_refit(m.f, s.inv, dom, degree)
        f2 = compose_refit(m.f, inner, dom, degree)
    except CompositionError as exc:
        raise RenormalizationError(str(exc)) from exc
    rf = _affine_compose(s, f2)
    return build_unimodal(rf, normalize_tol), s


def _even_full(ce: np.ndarray) -> np.ndarray:
    c = np.zeros(2 * ce.size - 1)
    c[::2] = ce
    return c


def solve_feigenbaum(
    degree: int = 40,
    tol: float = 1e-10,
    *,
    half_width: float = 1.0,
    max_iter: int = 100,
) -> FeigenbaumSolution:
    """Newton collocation for g(x) = -lam g(g(-x/lam)) with g(1) = -1.

    Unknowns are the even Chebyshev coefficients of g on
    [-half_width, half_width] and lam.
    """
    t0 = time.perf_counter()
    if degree < 20:
        warnings.warn(f"degree {degree} below 20; trailing coefficients will be large", UnderResolvedWarning, stacklevel=2)
    if half_width < 1.0:
        raise ValueError("half_width must be at least 1")
    L = float(half_width)
    nk = degree // 2 + 1
    deg = 2 * (nk - 1)

    G0 = np.polynomial.Polynomial([_SEED[0], 0.0, _SEED[1], 0.0, _SEED[2]])
    a = find_root_monotone(lambda a: G0(a) + a, Interval(1.0, 2.0))
    xs = L * np.cos(np.pi * (np.arange(4 * nk) + 0.5) / (4 * nk))
    ce = C.chebfit(xs / L, G0(a * xs) / a, deg)[::2]
    lam = 2.5

    xc = L * np.cos(np.pi * (np.arange(nk) + 0.5) / (2 * nk))
    one = C.chebvander(np.array([1.0 / L]), deg)[0, ::2]
    Tx = C.chebvander(xc / L, deg)[:, ::2]
    rnorm_prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        c = _even_full(ce)
        dc = C.chebder(c) / L
        y = -xc / lam
        gy = C.chebval(y / L, c)
        ggy = C.chebval(gy / L, c)
        r = np.r_[C.chebval(xc / L, c) + lam * ggy, C.chebval(1.0 / L, c) + 1.0]
        if not np.all(np.isfinite(r)):
            raise SolverError("Newton iteration produced non-finite residuals")
        Ty = C.chebvander(y / L, deg)[:, ::2]
        Tgy = C.chebvander(gy / L, deg)[:, ::2]
        gp_gy = C.chebval(gy / L, dc)
        gp_y = C.chebval(y / L, dc)
        J = np.empty((nk + 1, nk + 1))
        J[:nk, :nk] = Tx + lam * (gp_gy[:, None] * Ty + Tgy)
        J[:nk, nk] = ggy + lam * gp_gy * gp_y * (xc / lam**2)
        J[nk, :nk] = one
        J[nk, nk] = 0.0
        d = np.linalg.solve(J, -r)
        ce = ce + d[:nk]
        lam += d[nk]
        rnorm = float(np.max(np.abs(r)))
        step = float(np.max(np.abs(d)))
        if step < 1e-14 or (rnorm < 1e-15 and step < 1e-12):
            break
        if it > 10 and rnorm > 1e3 * rnorm_prev:
            raise SolverError(f"Newton diverging at iteration {it}: residual {rnorm:.3g}")
        rnorm_prev = min(rnorm_prev, rnorm)
    else:
        if step > 1e-8:
            raise SolverError(f"Newton did not converge in {max_iter} iterations (step {step:.3g})")

    coeffs = _even_full(ce)
    dom = Interval(-L, L)
    g = AnalyticFn(dom, coeffs)
    grid = np.linspace(-L, L, 4 * max(degree, 2))
    residual = float(np.max(np.abs(g(grid) + lam * g(g(-grid / lam)))))
    if g.trailing() > 1e-10:
        warnings.warn(f"trailing coefficients {g.trailing():.2e} exceed 1e-10", UnderResolvedWarning, stacklevel=2)
    if residual > tol:
        warnings.warn(f"functional-equation residual {residual:.2e} above tol {tol:.1e}", UnderResolvedWarning, stacklevel=2)
    gm = build_unimodal(AnalyticFn(dom, coeffs, residual), normalize_tol=1e-8)
    dg = gm.f.deriv()
    identities = {
        "g(1)+1": float(g(1.0) + 1.0),
        "critical_point": float(gm.c),
        "g(c1)+c1/lam": float(g(gm.c1) + gm.c1 / lam),
        "g'(c1)+lam": float(dg(gm.c1) + lam),
        "q0-1/lam": float(gm.q0 - 1.0 / lam),
        "max_g''_on_[-c1,c1]": float(np.max(gm.f.deriv(2)(np.linspace(-gm.c1, gm.c1, 257)))),
    }
    return FeigenbaumSolution(gm, float(lam), residual, it, degree, time.perf_counter() - t0, identities)


def backward_orbit_b(sol: FeigenbaumSolution) -> tuple[float, float]:
    """b1 in [0, c1] with g(b1) = 0 and b2 = b1 / lam."""
    g = sol.g
    try:
        b1 = find_root_monotone(g.f, Interval(0.0, g.c1))
    except BracketError as exc:
        raise SolverError(str(exc)) from exc
    return b1, b1 / sol.lam


def schwarzian(f: AnalyticFn, x):
    """f'''/f' - 3/2 (f''/f')^2."""
    d1, d2, d3 = f.deriv(1)(x), f.deriv(2)(x), f.deriv(3)(x)
    if np.any(np.asarray(d1) == 0.0):
        raise SingularityError("Schwarzian undefined where f' = 0")
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


def expansion_check(sol: FeigenbaumSolution, n: int = 512) -> float:
    """min |g'| over [q(-1), p1] and [q0, qhat(-1)]; must exceed 1."""
    g = sol.g
    qh = g.qhat_minus1()
    xs = np.r_[np.linspace(g.q_minus1, g.p1, n // 2), np.linspace(g.q0, qh, n - n // 2)]
    slopes = np.abs(g.f.deriv()(xs))
    mn = float(slopes.min())
    at_q0 = abs(float(g.f.deriv()(g.q0)))
    if not mn > 1.0:
        raise SolverError(f"expansion fails: min |g'| = {mn:.6g}")
    if abs(mn - at_q0) > 1e-6:
        raise SolverError(f"min |g'| = {mn:.12g} not attained at q0 ({at_q0:.12g})")
    return mn


def unimodal_class_check(m: UnimodalMap, kappa: float = KAPPA, n: int = 257) -> dict:
    """Sampled membership test for the unimodal class with margin ``kappa``."""
    df = m.f.deriv()
    xs = np.linspace(m.domain.lo, m.domain.hi, n)
    xs = xs[np.abs(xs - m.c) > 1e-3 * m.domain.width]
    sf = schwarzian(m.f, xs)
    checks = {
        "critical_margin": bool(m.c <= m.c1 - kappa),
        "critical_value_margin": bool(m.c1 <= 1.0 - kappa),
        "expanding_fixed_point": bool(df(m.q_minus1) > 1.0),
        "negative_multiplier": bool(df(m.q0) < 0.0),
        "negative_schwarzian": bool(np.all(sf < 0.0)),
    }
    checks["ok"] = all(checks.values())
    return checks


def functional_equation_pushforward(sol: FeigenbaumSolution, n: int, npts: int = 128) -> float:
    """sup |g^(2^n)(x/(-lam)^n) - g(x)/(-lam)^n| over ``npts`` points of [-1, 1]."""
    g = sol.g.f
    scale = (-sol.lam) ** n
    xs = np.linspace(-1.0, 1.0, npts)
    z = xs / scale
    for _ in range(2**n):
        z = g(z)
    return float(np.max(np.abs(z - g(xs) / scale)))
