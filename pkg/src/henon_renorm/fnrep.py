"""Chebyshev representations of real-analytic functions on intervals.

Everything above this module carries functions as coefficient vectors in the
Chebyshev basis of a working interval. One-variable functions are
:class:`AnalyticFn`; two-variable perturbations are :class:`AnalyticFn2`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct

__all__ = [
    "Interval",
    "AnalyticFn",
    "AnalyticFn2",
    "DomainError",
    "FitError",
    "CompositionError",
    "BracketError",
    "cheb_nodes",
    "lobatto_nodes",
    "fit",
    "interpolate",
    "interpolate2",
    "eval",
    "deriv",
    "compose_refit",
    "find_root_monotone",
    "solve_monotone",
    "nested_grid",
    "sup_norm_grid",
    "values2",
    "from_lobatto",
]

DEFAULT_DEGREE = 80
TRAILING_TOL = 1e-10
ROOT_TOL = 1e-12
ROOT_MAX_STEPS = 200
PAD_FRACTION = 1e-3


class DomainError(ValueError):
    """Evaluation point outside the domain plus its extrapolation pad."""


class FitError(ValueError):
    """Ill-posed spectral fit."""


class CompositionError(ValueError):
    """Inner function escapes the domain of the outer one."""


class BracketError(ValueError):
    """Root bracket without a sign change."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def to_unit(self, x):
        return (2.0 * np.asarray(x, dtype=float) - self.lo - self.hi) / self.width

    def from_unit(self, t):
        return self.center + 0.5 * self.width * np.asarray(t, dtype=float)

    def contains(self, x, pad: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lo - pad) & (x <= self.hi + pad)))

    def linspace(self, n: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, n)

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def cheb_nodes(n: int, domain: Interval) -> np.ndarray:
    """Chebyshev points of the first kind, in increasing order."""
    k = np.arange(n)
    return domain.from_unit(-np.cos(np.pi * (k + 0.5) / n))


def lobatto_nodes(n: int, domain: Interval) -> np.ndarray:
    """Chebyshev extreme points (endpoints included), in increasing order."""
    if n < 2:
        raise ValueError("need at least two Lobatto nodes")
    return domain.from_unit(-np.cos(np.pi * np.arange(n) / (n - 1)))


def _coeffs_first_kind(values: np.ndarray, axis: int = 0) -> np.ndarray:
    # values at increasing first-kind nodes; flip to the cos(pi(k+1/2)/n) order
    v = np.flip(values, axis=axis)
    n = v.shape[axis]
    c = dct(v, type=2, axis=axis) / n
    first = [slice(None)] * v.ndim
    first[axis] = 0
    c[tuple(first)] *= 0.5
    return c


def _coeffs_lobatto(values: np.ndarray, axis: int = 0) -> np.ndarray:
    v = np.flip(values, axis=axis)
    n = v.shape[axis]
    c = dct(v, type=1, axis=axis) / (n - 1)
    ends = [slice(None)] * v.ndim
    for idx in (0, n - 1):
        ends[axis] = idx
        c[tuple(ends)] *= 0.5
    return c


def _chop(coeffs: np.ndarray, rel: float = 1e-15) -> np.ndarray:
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        return coeffs[:1].copy()
    keep = np.flatnonzero(np.abs(coeffs) > rel * scale)
    return coeffs[: keep[-1] + 1].copy()


@dataclass(frozen=True, eq=False)
class AnalyticFn:
    """Chebyshev series on ``domain``.

    ``residual`` records the fit residual at the samples used to build the
    series; ``pad`` is the allowed extrapolation distance.
    """

    domain: Interval
    coeffs: np.ndarray
    residual: float = 0.0
    pad: float | None = None

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise FitError("coefficients must be a non-empty vector")
        if c.size == 1:
            c = np.r_[c, 0.0]
        object.__setattr__(self, "coeffs", c)
        if self.pad is None:
            object.__setattr__(self, "pad", PAD_FRACTION * self.domain.width)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def trailing(self) -> float:
        """Magnitude of the last few coefficients relative to the largest."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0:
            return 0.0
        tail = np.abs(self.coeffs[-min(3, self.coeffs.size) :])
        return float(np.max(tail) / scale)

    def _check(self, x: np.ndarray) -> None:
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite evaluation point")
        if x.size and (x.min() < self.domain.lo - self.pad or x.max() > self.domain.hi + self.pad):
            raise DomainError(
                f"evaluation at [{x.min():.6g}, {x.max():.6g}] outside "
                f"[{self.domain.lo:.6g}, {self.domain.hi:.6g}] (pad {self.pad:.3g})"
            )

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        self._check(xa)
        out = C.chebval(self.domain.to_unit(xa), self.coeffs)
        return float(out) if np.ndim(out) == 0 else out

    def deriv(self, m: int = 1) -> "AnalyticFn":
        c = C.chebder(self.coeffs, m, scl=2.0 / self.domain.width)
        return AnalyticFn(self.domain, c, pad=self.pad)

    def with_pad(self, pad: float) -> "AnalyticFn":
        return AnalyticFn(self.domain, self.coeffs, self.residual, pad)

    def __repr__(self) -> str:
        return f"AnalyticFn([{self.domain.lo:g}, {self.domain.hi:g}], degree={self.degree})"


def fit(x, y, domain: Interval, degree: int) -> AnalyticFn:
    """Least-squares Chebyshev fit of ``(x, y)`` samples on ``domain``.

    With exactly ``degree + 1`` samples this is interpolation.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if degree < 1:
        raise FitError("degree must be at least 1")
    if x.shape != y.shape:
        raise FitError("sample arrays differ in length")
    if np.unique(x).size < degree + 1:
        raise FitError(f"degree {degree} needs {degree + 1} distinct nodes, got {np.unique(x).size}")
    if not domain.contains(x, pad=1e-12 * domain.width):
        raise FitError("samples outside the fit domain")
    t = domain.to_unit(x)
    V = C.chebvander(t, degree)
    if np.linalg.cond(V) > 1e12:
        raise FitError(f"ill-conditioned fit at degree {degree}")
    coeffs, *_ = np.linalg.lstsq(V, y, rcond=None)
    resid = float(np.max(np.abs(V @ coeffs - y))) if y.size else 0.0
    return AnalyticFn(domain, coeffs, resid)


def interpolate(
    func: Callable[[np.ndarray], np.ndarray],
    domain: Interval,
    degree: int = DEFAULT_DEGREE,
    *,
    adaptive: bool = True,
    max_degree: int = 640,
    tol: float = TRAILING_TOL,
    chop: bool = True,
) -> AnalyticFn:
    """Interpolate ``func`` at first-kind Chebyshev nodes.

    When ``adaptive`` the degree is doubled until the trailing coefficients
    fall below ``tol`` relative to the largest one, up to ``max_degree``.
    """
    deg = int(degree)
    while True:
        x = cheb_nodes(deg + 1, domain)
        y = np.asarray(func(x), dtype=float)
        if not np.all(np.isfinite(y)):
            raise FitError("non-finite samples")
        coeffs = _coeffs_first_kind(y)
        fn = AnalyticFn(domain, coeffs)
        if not adaptive or fn.trailing() <= tol or 2 * deg > max_degree:
            break
        deg *= 2
    if chop:
        fn = AnalyticFn(domain, _chop(fn.coeffs), 0.0)
    return fn


def eval(f: AnalyticFn, x):  # noqa: A001 - mirrors the operation name
    return f(x)


def deriv(f: AnalyticFn) -> AnalyticFn:
    return f.deriv()


def compose_refit(
    outer: AnalyticFn | Callable,
    inner: AnalyticFn | Callable,
    domain: Interval,
    degree: int = DEFAULT_DEGREE,
    *,
    n_check: int = 64,
) -> AnalyticFn:
    """Refit ``outer(inner(x))`` on ``domain``.

    The composition residual at ``n_check`` off-node points is stored in
    ``residual``.
    """
    probe = np.linspace(domain.lo, domain.hi, 513)
    vals = np.asarray(inner(probe), dtype=float)
    if isinstance(outer, AnalyticFn) and not outer.domain.contains(vals, pad=outer.pad):
        raise CompositionError(
            f"inner range [{vals.min():.6g}, {vals.max():.6g}] escapes "
            f"[{outer.domain.lo:.6g}, {outer.domain.hi:.6g}]"
        )
    fn = interpolate(lambda x: outer(inner(x)), domain, degree)
    rng = np.random.default_rng(0)
    xs = rng.uniform(domain.lo, domain.hi, n_check)
    resid = float(np.max(np.abs(fn(xs) - outer(inner(xs)))))
    return AnalyticFn(domain, fn.coeffs, resid, fn.pad)


def find_root_monotone(
    f: AnalyticFn | Callable,
    bracket: Interval,
    *,
    tol: float = ROOT_TOL,
    max_steps: int = ROOT_MAX_STEPS,
) -> float:
    """Root of ``f`` inside a sign-changing bracket.

    Newton steps on the derivative when ``f`` is an :class:`AnalyticFn`,
    falling back to bisection whenever a step leaves the current bracket.
    """
    a, b = bracket.lo, bracket.hi
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise BracketError(f"no sign change on [{a:.6g}, {b:.6g}]: f={fa:.3g}, {fb:.3g}")
    df = f.deriv() if isinstance(f, AnalyticFn) else None
    x = 0.5 * (a + b)
    for _ in range(max_steps):
        fx = float(f(x))
        if fx == 0.0:
            return x
        if (fx < 0) == (fa < 0):
            a, fa = x, fx
        else:
            b = x
        step_ok = False
        if df is not None:
            d = float(df(x))
            if d != 0.0:
                xn = x - fx / d
                step_ok = a < xn < b
        if not step_ok:
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 4e-16 * max(1.0, abs(x)) and abs(fx) < tol:
            return xn
        x = xn
        if b - a <= 4e-16 * max(1.0, abs(x)):
            break
    if abs(float(f(x))) >= tol:
        raise BracketError(f"root not resolved to {tol:g}: |f|={abs(float(f(x))):.3g}")
    return x


def solve_monotone(
    fun: Callable[[np.ndarray], np.ndarray],
    dfun: Callable[[np.ndarray], np.ndarray],
    target,
    lo,
    hi,
    *,
    tol: float = 1e-14,
    max_steps: int = ROOT_MAX_STEPS,
) -> np.ndarray:
    """Vectorized safeguarded Newton for ``fun(x) = target`` on ``[lo, hi]``.

    ``fun`` must be monotone on each bracket and ``fun(lo) - target`` and
    ``fun(hi) - target`` must differ in sign (checked).
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    glo = fun(lo) - target
    ghi = fun(hi) - target
    bad = glo * ghi > 0
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        raise BracketError(f"target {target.ravel()[i]:.6g} not bracketed on [{lo.ravel()[i]:.6g}, {hi.ravel()[i]:.6g}]")
    rising = ghi > glo
    x = 0.5 * (lo + hi)
    for _ in range(max_steps):
        g = fun(x) - target
        below = (g < 0) == rising
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        d = dfun(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - g / d
        inside = np.isfinite(xn) & (xn > lo) & (xn < hi)
        xn = np.where(inside, xn, 0.5 * (lo + hi))
        done = np.abs(xn - x) <= tol * np.maximum(1.0, np.abs(x))
        x = xn
        if np.all(done):
            break
    return x


def nested_grid(n: int, domain: Interval) -> np.ndarray:
    """``n`` grid points whose sets are nested in ``n``.

    Endpoints first, then the van der Corput sequence; for ``n = 2**k + 1``
    this is exactly the uniform grid of ``n`` points.
    """
    if n < 2:
        raise ValueError("grid count must be at least 2")
    t = [0.0, 1.0]
    k = 1
    while len(t) < n:
        # van der Corput in base 2 skipping 0
        i, denom, v = k, 1.0, 0.0
        while i:
            denom *= 2.0
            i, r = divmod(i, 2)
            v += r / denom
        t.append(v)
        k += 1
    return np.sort(domain.lo + domain.width * np.asarray(t[:n]))


def sup_norm_grid(
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rect: tuple[Interval, Interval],
    n: int = 257,
) -> float:
    """Max of ``|fun|`` over an ``n x n`` tensor grid including the corners."""
    xs = nested_grid(n, rect[0])
    ys = nested_grid(n, rect[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return float(np.max(np.abs(fun(X, Y))))


@dataclass(frozen=True, eq=False)
class AnalyticFn2:
    """Tensor Chebyshev series ``sum c[i, j] T_i(x) T_j(y)``."""

    xdom: Interval
    ydom: Interval
    coeffs: np.ndarray
    residual: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape

    def __call__(self, x, y):
        tx = self.xdom.to_unit(x)
        ty = self.ydom.to_unit(y)
        out = C.chebval2d(tx, ty, self.coeffs)
        return float(out) if np.ndim(out) == 0 else out

    def partial(self, axis: int) -> "AnalyticFn2":
        key = ("d", axis)
        if key not in self._cache:
            dom = self.xdom if axis == 0 else self.ydom
            c = C.chebder(self.coeffs, 1, scl=2.0 / dom.width, axis=axis)
            if c.shape[axis] == 0:
                shape = list(self.coeffs.shape)
                shape[axis] = 1
                c = np.zeros(shape)
            self._cache[key] = AnalyticFn2(self.xdom, self.ydom, c)
        return self._cache[key]

    def dx(self, x, y):
        return self.partial(0)(x, y)

    def dy(self, x, y):
        return self.partial(1)(x, y)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.coeffs)) <= tol)

    def sup_norm(self, n: int = 257, rect: tuple[Interval, Interval] | None = None) -> float:
        return sup_norm_grid(self, rect or (self.xdom, self.ydom), n)

    def chopped(self, rel: float = 1e-15, abs_floor: float = 0.0) -> "AnalyticFn2":
        c = self.coeffs
        thresh = max(rel * np.max(np.abs(c)), abs_floor)
        big = np.abs(c) > thresh
        if not big.any():
            return AnalyticFn2(self.xdom, self.ydom, np.zeros((1, 1)), self.residual)
        i = np.flatnonzero(big.any(axis=1))[-1] + 1
        j = np.flatnonzero(big.any(axis=0))[-1] + 1
        return AnalyticFn2(self.xdom, self.ydom, c[:i, :j].copy(), self.residual)


def interpolate2(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    xdom: Interval,
    ydom: Interval,
    nx: int = 81,
    ny: int = 33,
) -> AnalyticFn2:
    """Interpolate a two-argument function on an ``nx x ny`` Chebyshev grid."""
    x = cheb_nodes(nx, xdom)
    y = cheb_nodes(ny, ydom)
    X, Y = np.meshgrid(x, y, indexing="ij")
    V = np.asarray(func(X, Y), dtype=float)
    if not np.all(np.isfinite(V)):
        raise FitError("non-finite samples")
    c = _coeffs_first_kind(_coeffs_first_kind(V, axis=0), axis=1)
    return AnalyticFn2(xdom, ydom, c)


def values2(V: np.ndarray, xdom: Interval, ydom: Interval) -> AnalyticFn2:
    """Series from samples ``V[i, j]`` at the tensor first-kind nodes (increasing order)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if not np.all(np.isfinite(V)):
        raise FitError("non-finite samples")
    c = _coeffs_first_kind(_coeffs_first_kind(V, axis=0), axis=1)
    return AnalyticFn2(xdom, ydom, c)


def from_lobatto(values, domain: Interval) -> AnalyticFn:
    """Interpolant through samples at :func:`lobatto_nodes` (increasing order)."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise FitError("non-finite samples")
    return AnalyticFn(domain, _coeffs_lobatto(v))
