"""Hénon-like maps F(x, y) = (f(x) - eps(x, y), x)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fnrep import (
    AnalyticFn,
    AnalyticFn2,
    BracketError,
    DomainError,
    Interval,
    interpolate,
    interpolate2,
    solve_monotone,
    sup_norm_grid,
    values2,
)

__all__ = [
    "IH_DEFAULT",
    "DELTA_DEFAULT",
    "EXAMPLE_A",
    "EXAMPLE_B",
    "HenonMap",
    "SaddlePoint",
    "InversionError",
    "FixedPointError",
    "NonHyperbolicError",
    "MapFormatError",
    "apply",
    "h_eval",
    "jacobian",
    "invert_h",
    "fixed_points",
    "quadratic",
    "example_map",
    "classical_henon",
    "load_map",
    "map_from_dict",
]

IH_DEFAULT = Interval(-1.3, 1.1)
DELTA_DEFAULT = 0.2
EXAMPLE_A = 1.7996565
EXAMPLE_B = 0.025
DEGENERATE_TOL = 1e-14
HYPERBOLIC_TOL = 1e-6


class InversionError(ValueError):
    pass


class FixedPointError(RuntimeError):
    pass


class NonHyperbolicError(FixedPointError):
    pass


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SaddlePoint:
    x: float
    y: float
    multipliers: tuple[float, float]

    @property
    def point(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def unstable(self) -> float:
        return max(self.multipliers, key=abs)


@dataclass(frozen=True, eq=False)
class HenonMap:
    """Hénon-like map on ``Ih x Iv``; ``eps=None`` is the degenerate map (f(x), x)."""

    f: AnalyticFn
    eps: AnalyticFn2 | None = None
    Ih: Interval = IH_DEFAULT
    Iv: Interval = IH_DEFAULT
    delta: float = DELTA_DEFAULT

    def __post_init__(self) -> None:
        if self.Iv.lo > self.Ih.lo + 1e-12 or self.Iv.hi < self.Ih.hi - 1e-12:
            raise ValueError("Iv must contain Ih")
        if self.eps is not None and self.eps.is_zero():
            object.__setattr__(self, "eps", None)

    @property
    def degenerate(self) -> bool:
        if self.eps is None:
            return True
        return bool(np.max(np.abs(self.eps.partial(1).coeffs)) <= DEGENERATE_TOL)

    def eps_norm(self, n: int = 257) -> float:
        if self.eps is None:
            return 0.0
        return sup_norm_grid(self.eps, (self.Ih, self.Iv), n)

    def eps_y_norm(self, n: int = 129) -> float:
        if self.eps is None:
            return 0.0
        return sup_norm_grid(self.eps.partial(1), (self.Ih, self.Iv), n)

    def _check(self, x, y) -> None:
        px = self.f.pad
        py = 1e-3 * self.Iv.width
        if not (self.Ih.contains(x, px) and self.Iv.contains(y, py)):
            raise DomainError("point outside Ih x Iv")

    def e(self, x, y):
        if self.eps is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape) if np.ndim(x) or np.ndim(y) else 0.0
        return self.eps(x, y)

    def e_x(self, x, y):
        if self.eps is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape) if np.ndim(x) or np.ndim(y) else 0.0
        return self.eps.dx(x, y)

    def e_y(self, x, y):
        if self.eps is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape) if np.ndim(x) or np.ndim(y) else 0.0
        return self.eps.dy(x, y)

    def h(self, x, y):
        self._check(x, y)
        return self.f(x) - self.e(x, y)

    def h_x(self, x, y):
        return self.f.deriv()(x) - self.e_x(x, y)

    def __call__(self, x, y):
        return self.h(x, y), (np.array(x, dtype=float, copy=True) if np.ndim(x) else float(x))

    def jacobian(self, x, y):
        return self.e_y(x, y)

    def with_eps(self, eps: AnalyticFn2 | None) -> "HenonMap":
        return HenonMap(self.f, eps, self.Ih, self.Iv, self.delta)

    def degenerate_version(self) -> "HenonMap":
        return HenonMap(self.f, None, self.Ih, self.Iv, self.delta)


def apply(F: HenonMap, z):
    x, y = z
    return F(x, y)


def h_eval(F: HenonMap, x, y):
    return F.h(x, y)


def jacobian(F: HenonMap, z):
    x, y = z
    return F.jacobian(x, y)


def invert_h(F: HenonMap, y, target, branch: Interval, *, samples: int = 65):
    """x in ``branch`` with h(x, y) = target; h(., y) must be strictly monotone there."""
    y = np.asarray(y, dtype=float)
    target = np.asarray(target, dtype=float)
    ys = np.unique(np.atleast_1d(y))
    xs = branch.linspace(samples)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    hx = F.h_x(X, Y)
    if not (np.all(hx > 0) or np.all(hx < 0)):
        raise InversionError(f"h_y not injective on [{branch.lo:.6g}, {branch.hi:.6g}]")
    yb, tb = np.broadcast_arrays(y, target)
    try:
        out = solve_monotone(
            lambda x: F.h(x, yb), lambda x: F.h_x(x, yb), tb, branch.lo, branch.hi
        )
    except BracketError as exc:
        raise InversionError(str(exc)) from exc
    return float(out) if out.ndim == 0 else out


def _fixed_point(F: HenonMap, x0: float) -> SaddlePoint:
    x = float(x0)
    for _ in range(60):
        g = F.f(x) - F.e(x, x) - x
        dg = F.f.deriv()(x) - F.e_x(x, x) - F.e_y(x, x) - 1.0
        if dg == 0.0:
            raise FixedPointError("singular Newton step")
        dx = g / dg
        x -= dx
        if abs(dx) < 1e-15 * max(1.0, abs(x)):
            break
    if abs(F.h(x, x) - x) > 1e-10:
        raise FixedPointError(f"fixed point Newton did not converge near {x0:.6g}")
    tr = float(F.h_x(x, x))
    det = float(F.e_y(x, x))
    disc = tr * tr - 4.0 * det
    if disc < 0:
        raise NonHyperbolicError("complex multipliers")
    r = np.sqrt(disc)
    mu = (float((tr + r) / 2.0), float((tr - r) / 2.0))
    big, small = sorted(mu, key=abs, reverse=True)
    if abs(big) <= 1.0 + HYPERBOLIC_TOL or abs(small) >= 1.0 - HYPERBOLIC_TOL:
        raise NonHyperbolicError(f"multipliers {big:.6g}, {small:.6g} not hyperbolic")
    return SaddlePoint(x, x, (big, small))


def fixed_points(F: HenonMap) -> tuple[SaddlePoint, SaddlePoint]:
    """p(-1) near (-1, -1) with positive expanding multiplier and p(0) with negative one."""
    from .unimodal import StructureError, build_unimodal

    try:
        m = build_unimodal(F.f, normalize_tol=None)
    except StructureError as exc:
        raise FixedPointError(str(exc)) from exc
    pm1 = _fixed_point(F, m.q_minus1)
    p0 = _fixed_point(F, m.q0)
    if not pm1.unstable > 0:
        raise FixedPointError("p(-1) multiplier is not positive")
    if not p0.unstable < 0:
        raise FixedPointError("p(0) multiplier is not negative")
    return pm1, p0


def quadratic(a: float, Ih: Interval = IH_DEFAULT) -> AnalyticFn:
    """a (1 + x)(1 - x) - 1."""
    return interpolate(lambda x: a * (1.0 + x) * (1.0 - x) - 1.0, Ih, 8)


def _linear_y(b: float, Ih: Interval, Iv: Interval) -> AnalyticFn2:
    return interpolate2(lambda x, y: b * y + 0.0 * x, Ih, Iv, 2, 2).chopped()


def example_map(b: float = EXAMPLE_B, a: float = EXAMPLE_A) -> HenonMap:
    """f(x) = a(1 + x)(1 - x) - 1 with eps = b y."""
    f = quadratic(a)
    return HenonMap(f, _linear_y(b, IH_DEFAULT, IH_DEFAULT) if b else None)


def classical_henon(a: float, b: float, Ih: Interval = IH_DEFAULT, Iv: Interval | None = None) -> HenonMap:
    """F(x, y) = (-1 + a(1 - x^2) - b y, x)."""
    Iv = Iv or Ih
    f = interpolate(lambda x: -1.0 + a * (1.0 - x * x), Ih, 8)
    return HenonMap(f, _linear_y(b, Ih, Iv) if b else None, Ih, Iv)


def _interval(v, name: str) -> Interval:
    try:
        lo, hi = (float(t) for t in v)
    except (TypeError, ValueError) as exc:
        raise MapFormatError(f"{name} must be [lo, hi]") from exc
    return Interval(lo, hi)


def map_from_dict(d: dict) -> HenonMap:
    Ih = _interval(d.get("Ih", IH_DEFAULT.as_tuple()), "Ih")
    Iv = _interval(d.get("Iv", Ih.as_tuple()), "Iv")
    delta = float(d.get("delta", DELTA_DEFAULT))
    fd = d.get("f")
    if not isinstance(fd, dict):
        raise MapFormatError("missing 'f' object")
    if fd.get("kind") == "quadratic":
        f = interpolate(lambda x: float(fd["a"]) * (1.0 + x) * (1.0 - x) - 1.0, Ih, 8)
    elif "coeffs" in fd:
        f = AnalyticFn(Ih, np.asarray(fd["coeffs"], dtype=float))
    else:
        raise MapFormatError("'f' needs kind=quadratic or coeffs")
    ed = d.get("eps")
    if ed is None:
        eps = None
    elif not isinstance(ed, dict):
        raise MapFormatError("'eps' must be an object")
    elif ed.get("kind") == "linear_y":
        eps = _linear_y(float(ed["b"]), Ih, Iv)
    elif "grid" in ed:
        eps = values2(np.asarray(ed["grid"], dtype=float), Ih, Iv)
    elif ed.get("kind") == "zero":
        eps = None
    else:
        raise MapFormatError("'eps' needs kind=linear_y, kind=zero or grid")
    return HenonMap(f, eps, Ih, Iv, delta)


def load_map(path: str | Path) -> HenonMap:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"{path}: {exc}") from exc
    return map_from_dict(d)
