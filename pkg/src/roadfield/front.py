"""Level-set extraction and contact geometry for computed waves.

Turns the set {v = level} of a field sampled on a tensor grid into an
ordered polyline (the front), locates the point where the front meets
the road, and fits the local shape of the front near that contact:
a straight line when the wave carries a road unknown, a parabola when
the road only enters through the boundary condition.

The polyline is a graph over depth: one abscissa per crossed row, plus
the points where the curve cuts vertical grid lines between consecutive
rows, so that consecutive vertices always lie in adjacent grid cells.
"""

from __future__ import annotations

import enum
import io
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    FrontDetachedError,
    InsufficientPointsError,
    LevelOutOfRangeError,
    MultipleComponentsError,
)
from .kernels import rightmost_crossings


class FitKind(enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class Front:
    """Ordered level-set polyline.

    points has shape (n, 2), rows are (x, y) sorted by increasing y
    (bottom of the strip first, road last).  contact is the abscissa
    where the extrapolated front meets y = 0.
    """

    points: np.ndarray
    contact: tuple[float, float]
    level: float

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]


@dataclass(frozen=True)
class ContactFit:
    """Least-squares fit of the front shape near the contact point.

    coefficient is the magnitude of the leading coefficient: the slope
    gamma for a linear fit y = -gamma (x - x0), the curvature a for a
    quadratic fit y = -a (x - x0)^2.  residual is the RMS misfit over
    the points used.  lambda_hat is mu * u(x0) when a two-species
    solution was supplied, else None.
    """

    kind: FitKind
    coefficient: float
    window: tuple[float, float]
    residual: float
    n_points: int
    lambda_hat: float | None = None


def trace_level_set(x_nodes, y_nodes, v, level: float) -> Front:
    """Extract {v = level} as an ordered polyline from raw arrays.

    v has shape (ny, nx) with v[j, i] = v(x_nodes[i], y_nodes[j]).
    The level must satisfy min(v) <= level < max(v); equality with the
    minimum is allowed so that fronts of compactly supported profiles
    can be traced at level zero.
    """
    x = np.asarray(x_nodes, dtype=float)
    y = np.asarray(y_nodes, dtype=float)
    v2 = np.asarray(v, dtype=float)
    if v2.shape != (y.shape[0], x.shape[0]):
        raise DomainError(f"field shape {v2.shape} does not match the grid "
                          f"({y.shape[0]}, {x.shape[0]})")
    vmin = float(v2.min())
    vmax = float(v2.max())
    if not (vmin <= level < vmax):
        raise LevelOutOfRangeError(
            f"level {level:g} outside the field range [{vmin:g}, {vmax:g}]")

    idx, frac, counts = rightmost_crossings(v2, level)
    if np.any(counts > 1):
        bad = int(np.count_nonzero(counts > 1))
        raise MultipleComponentsError(
            f"{bad} grid rows cross the level more than once; "
            "the level set is not a graph over depth")
    hit = np.nonzero(idx >= 0)[0]
    if hit.size == 0:
        raise MultipleComponentsError(
            "no grid row crosses the level transversally")
    if hit[-1] - hit[0] + 1 != hit.size:
        raise MultipleComponentsError(
            "rows crossing the level do not form a contiguous band")

    hx = np.diff(x)
    pts = []
    for j in hit:
        i = idx[j]
        pts.append((x[i] + frac[j] * hx[i], y[j]))
        if j == hit[-1]:
            break
        # vertical grid lines cut by the curve on its way to the next row
        i2 = idx[j + 1]
        lo, hi = (i, i2) if i <= i2 else (i2, i)
        for k in range(lo + 1, hi + 1):
            s0 = v2[j, k] - level
            s1 = v2[j + 1, k] - level
            if (s0 > 0.0) != (s1 > 0.0):
                t = s0 / (s0 - s1)
                pts.append((x[k], y[j] + t * (y[j + 1] - y[j])))

    arr = np.asarray(pts, dtype=float)
    order = np.argsort(arr[:, 1], kind="stable")
    arr = arr[order]
    contact = (_extrapolate_contact(arr), 0.0)
    return Front(points=arr, contact=contact, level=float(level))


def _extrapolate_contact(points: np.ndarray) -> float:
    xs, ys = points[-1]
    if points.shape[0] == 1 or ys >= -1e-14:
        return float(xs)
    xp, yp = points[-2]
    if ys == yp:
        return float(xs)
    return float(xs + (0.0 - ys) * (xs - xp) / (ys - yp))


def extract_front(solution, level: float) -> Front:
    """Trace {v = level} of a computed wave, ordered bottom to road."""
    g = solution.grid
    return trace_level_set(g.x_nodes, g.y_nodes, solution.v, level)


def locate_contact(front: Front, dy_top: float) -> float:
    """Abscissa where the front meets the road.

    Linear extrapolation of the top two polyline vertices to y = 0.
    Raises FrontDetachedError when the topmost vertex sits more than
    two top-row spacings below the road, in which case the level set
    never approaches y = 0 and the extrapolation would be meaningless.
    """
    if front.points.shape[0] == 0:
        raise DomainError("empty front polyline")
    top_y = float(front.points[-1, 1])
    if top_y < -2.0 * float(dy_top):
        raise FrontDetachedError(
            f"topmost front point at y = {top_y:g} is more than "
            f"2 * {dy_top:g} below the road")
    return _extrapolate_contact(front.points)


def default_fit_window(front: Front, grid) -> tuple[float, float]:
    """Fitting annulus [r_min, r_max] around the contact point.

    The outer radius stays within the region where the contact expansion
    is meaningful (a fifth of the strip depth, capped at order one); the
    inner radius skips the first few grid cells, where the extracted
    polyline carries interpolation error comparable to the signal.
    """
    depth = float(grid.y_nodes[-1] - grid.y_nodes[0])
    r_max = 0.2 * min(1.0, depth)
    x0 = front.contact[0]
    lo = np.searchsorted(grid.x_nodes, x0 - r_max)
    hi = np.searchsorted(grid.x_nodes, x0 + 1e-12)
    lo = max(int(lo) - 1, 0)
    hi = min(max(int(hi), lo + 1), grid.hx.shape[0])
    dx_local = float(grid.hx[lo:hi].max())
    r_min = 5.0 * max(dx_local, float(grid.dy_top))
    if r_min >= r_max:
        raise DomainError(
            f"degenerate fitting window: r_min = {r_min:g} >= r_max = {r_max:g}; "
            "the grid is too coarse near the contact")
    return (r_min, r_max)


def fit_contact(front: Front, kind: FitKind, window: tuple[float, float],
                *, solution=None, mu: float | None = None) -> ContactFit:
    """Fit the front shape near the contact over the annulus `window`.

    Linear: zero-intercept least squares of y against (x - x0); the
    reported coefficient is the slope magnitude.  Quadratic: least
    squares of y against (x - x0)^2 with no linear term; the reported
    coefficient is the curvature magnitude.  Fitting magnitudes keeps
    the result independent of which way the abscissa is oriented.

    When a converged two-species solution and mu are supplied with a
    linear fit, lambda_hat = mu * u(x0) is interpolated from the road
    profile and attached to the fit.
    """
    r_min, r_max = float(window[0]), float(window[1])
    if not (0.0 <= r_min < r_max):
        raise DomainError(f"bad fitting window [{r_min}, {r_max}]")
    x0 = front.contact[0]
    s = front.x - x0
    r = np.hypot(s, front.y)
    mask = (r >= r_min) & (r <= r_max)
    n = int(np.count_nonzero(mask))
    if n < 8:
        raise InsufficientPointsError(
            f"only {n} polyline points fall in the annulus "
            f"[{r_min:g}, {r_max:g}] around the contact; need at least 8")
    ss = s[mask]
    yy = front.y[mask]

    if kind is FitKind.LINEAR:
        denom = float(np.dot(ss, ss))
        slope = float(np.dot(yy, ss)) / denom
        model = slope * ss
        coeff = abs(slope)
    elif kind is FitKind.QUADRATIC:
        q = ss * ss
        denom = float(np.dot(q, q))
        a = -float(np.dot(yy, q)) / denom
        model = -a * q
        coeff = abs(a)
    else:
        raise DomainError(f"unknown fit kind {kind!r}")
    residual = float(np.sqrt(np.mean((yy - model) ** 2)))

    lam = None
    if solution is not None:
        name = type(solution).__name__
        two = solution.u is not None
        if kind is FitKind.LINEAR and not two:
            raise DomainError(
                "linear contact fit needs a two-species solution "
                f"(got {name} without a road unknown)")
        if kind is FitKind.QUADRATIC and two:
            raise DomainError(
                "quadratic contact fit applies to the single-species model, "
                f"but {name} carries a road unknown")
        if kind is FitKind.LINEAR:
            if mu is None:
                raise DomainError("mu is required to evaluate lambda_hat")
            u0 = float(np.interp(x0, solution.grid.x_nodes, solution.u))
            lam = float(mu) * u0

    return ContactFit(kind=kind, coefficient=coeff, window=(r_min, r_max),
                      residual=residual, n_points=n, lambda_hat=lam)


def arc_length(front: Front) -> float:
    """Total length of the polyline (sum of segment lengths)."""
    d = np.diff(front.points, axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def richardson(coarse: float, fine: float, eps_coarse: float,
               eps_fine: float, exponent: float = 1.0) -> float:
    """Eliminate the leading O(eps^exponent) error from two measurements.

    Assumes q(eps) = q* + C eps^p and returns q*.  The regularized front
    converges at first order in eps for speeds and slopes but only at
    order one-half for the contact curvature, hence the exponent knob.
    """
    if not (0.0 < eps_fine < eps_coarse):
        raise DomainError(
            f"need 0 < eps_fine < eps_coarse, got {eps_fine}, {eps_coarse}")
    rc = eps_coarse ** exponent
    rf = eps_fine ** exponent
    return fine + (fine - coarse) * rf / (rc - rf)


_FMT = "%.17g"


def front_to_csv(front: Front, eps: float = float("nan")) -> str:
    """Serialize as two-column CSV, headed by a comment with the
    extraction level, the regularization eps, and the contact abscissa."""
    buf = io.StringIO()
    buf.write("# level=" + _FMT % front.level
              + " eps=" + _FMT % eps
              + " contact=" + _FMT % front.contact[0] + "\n")
    buf.write("x,y\n")
    for px, py in front.points:
        buf.write(_FMT % px + "," + _FMT % py + "\n")
    return buf.getvalue()


def front_from_csv(text: str) -> tuple[Front, float]:
    """Inverse of front_to_csv; returns (front, eps)."""
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DomainError("missing front CSV header comment")
    m = re.match(r"#\s*level=(\S+)\s+eps=(\S+)\s+contact=(\S+)", lines[0])
    if m is None:
        raise DomainError(f"malformed front CSV header: {lines[0]!r}")
    level, eps, contact = (float(m.group(k)) for k in (1, 2, 3))
    body = [ln for ln in lines[1:] if ln and not ln.startswith("#")
            and not ln.lower().startswith("x,")]
    pts = np.array([[float(c) for c in ln.split(",")] for ln in body])
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("front CSV body is not two columns")
    return Front(points=pts, contact=(contact, 0.0), level=level), eps
