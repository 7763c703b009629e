"""Exact reference computations the material is measured against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


# -- smoothing --------------------------------------------------------------------


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Centred mean over ``window`` samples, only where the window fits.

    Output element ``j`` belongs to input index ``j + window // 2``; the
    result has ``len(values) - window + 1`` elements.
    """
    y = np.asarray(values, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if window > len(y):
        raise ValueError(f"window {window} longer than series of {len(y)} samples")
    c = np.concatenate(([0.0], np.cumsum(y)))
    return (c[window:] - c[:-window]) / window


def lowpass(values: Sequence[float], alpha: float = 0.5, iterations: int = 1) -> np.ndarray:
    """Iterated 3-tap smoothing ``y_i += alpha/2 * (y_{i-1} - 2 y_i + y_{i+1})`` with fixed ends."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    y = np.array(values, dtype=float)
    half = alpha / 2.0
    for _ in range(iterations):
        y[1:-1] += half * (y[:-2] - 2.0 * y[1:-1] + y[2:])
    return y


# -- B-splines -----------------------------------------------------------------------


@dataclass(frozen=True)
class SplineSpec:
    """B-spline curve description.

    For ``closed`` specs ``control_points`` is the raw cycle; the evaluated
    polygon repeats the first point (clamped) or the first ``degree`` points
    (unclamped) so the curve closes on itself.
    """

    control_points: np.ndarray
    degree: int
    clamped: bool = False
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "control_points", pts)
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if len(self.polygon()) <= self.degree:
            raise ValueError(f"need more than {self.degree} control points for degree {self.degree}")

    def polygon(self) -> np.ndarray:
        pts = self.control_points
        if not self.closed:
            return pts
        extra = 1 if self.clamped else self.degree
        return np.concatenate([pts, pts[np.arange(extra) % len(pts)]])

    def knots(self) -> np.ndarray:
        return bspline_knots(len(self.polygon()), self.degree, self.clamped)

    def domain(self) -> tuple[float, float]:
        k = self.knots()
        return float(k[self.degree]), float(k[len(self.polygon())])


def bspline_knots(n_points: int, degree: int, clamped: bool) -> np.ndarray:
    """Uniform knot vector of length ``n_points + degree + 1``.

    Clamped vectors run over [0, 1] with ``degree + 1`` repeated end knots;
    unclamped vectors are the integers ``0 .. n_points + degree``.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if degree >= n_points:
        raise ValueError(f"degree {degree} needs more than {n_points} control points")
    if not clamped:
        return np.arange(n_points + degree + 1, dtype=float)
    inner = n_points - degree - 1
    interior = np.arange(1, inner + 1, dtype=float) / (inner + 1)
    return np.concatenate((np.zeros(degree + 1), interior, np.ones(degree + 1)))


def _span(knots: np.ndarray, degree: int, n: int, t: float) -> int:
    if t >= knots[n]:
        return n - 1
    return int(np.searchsorted(knots, t, side="right") - 1)


def bspline_eval(spec: SplineSpec, t: float) -> np.ndarray:
    """Curve point at parameter ``t`` by de Boor's recursion."""
    p = spec.degree
    ctrl = spec.polygon()
    n = len(ctrl)
    knots = spec.knots()
    lo, hi = knots[p], knots[n]
    if not lo <= t <= hi:
        raise ValueError(f"parameter {t} outside domain [{lo}, {hi}]")
    k = _span(knots, p, n, t)
    d = ctrl[k - p : k + 1].copy()
    for r in range(1, p + 1):
        for j in range(p, r - 1, -1):
            i = j + k - p
            denom = knots[i + p + 1 - r] - knots[i]
            a = 0.0 if denom == 0 else (t - knots[i]) / denom
            d[j] = (1.0 - a) * d[j - 1] + a * d[j]
    return d[p]


def basis_functions(knots: np.ndarray, degree: int, t: float, n: int) -> np.ndarray:
    """All ``n`` B-spline basis values at ``t`` by the Cox-de Boor recurrence (0/0 taken as 0)."""
    m = len(knots) - 1
    last = knots[n]
    N = np.zeros(m)
    for i in range(m):
        if knots[i] <= t < knots[i + 1]:
            N[i] = 1.0
    if t == last:
        # right end of the domain belongs to the last nonempty span
        i = max(i for i in range(m) if knots[i] < knots[i + 1] and knots[i + 1] <= last)
        N[:] = 0.0
        N[i] = 1.0
    for p in range(1, degree + 1):
        nxt = np.zeros(m - p)
        for i in range(m - p):
            left = knots[i + p] - knots[i]
            right = knots[i + p + 1] - knots[i + 1]
            v = 0.0
            if left > 0:
                v += (t - knots[i]) / left * N[i]
            if right > 0:
                v += (knots[i + p + 1] - t) / right * N[i + 1]
            nxt[i] = v
        N = nxt
    return N[:n]


def bspline_eval_basis(spec: SplineSpec, t: float) -> np.ndarray:
    """Curve point as the explicit sum of basis functions times control points."""
    ctrl = spec.polygon()
    lo, hi = spec.domain()
    if not lo <= t <= hi:
        raise ValueError(f"parameter {t} outside domain [{lo}, {hi}]")
    return basis_functions(spec.knots(), spec.degree, t, len(ctrl)) @ ctrl


def bspline_sample(spec: SplineSpec, count: int = 512) -> np.ndarray:
    lo, hi = spec.domain()
    return np.array([bspline_eval(spec, t) for t in np.linspace(lo, hi, count)])


def close_spline(points: Sequence[Sequence[float]], clamped: bool, degree: int = 3, start: int = 0) -> SplineSpec:
    """Closed B-spline through a cycle of points.

    ``start`` rotates the cycle so that a clamped curve begins and ends at
    that point, which it then passes through exactly.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 4:
        raise ValueError("a closed spline needs at least 4 points")
    return SplineSpec(np.roll(pts, -start, axis=0), degree, clamped=clamped, closed=True)


# -- convex hull --------------------------------------------------------------------------


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Sequence[float]]) -> np.ndarray:
    """Counterclockwise hull (monotone chain). Collinear input gives its two extreme points."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2).tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def in_hull(hull: np.ndarray, point: Sequence[float], tol: float = 1e-9) -> bool:
    """Point inside or on a counterclockwise hull, with distance tolerance ``tol``."""
    h = np.asarray(hull, dtype=float)
    p = np.asarray(point, dtype=float)
    if len(h) == 1:
        return bool(np.hypot(*(p - h[0])) <= tol)
    if len(h) == 2:
        from slimecurve.analysis import point_to_polyline

        return bool(point_to_polyline(p, h)[0] <= tol)
    a = h
    b = np.roll(h, -1, axis=0)
    e = b - a
    cross = e[:, 0] * (p[1] - a[:, 1]) - e[:, 1] * (p[0] - a[:, 0])
    return bool(np.all(cross / np.hypot(e[:, 0], e[:, 1]) >= -tol))
