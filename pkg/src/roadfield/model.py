"""Physical parameters, the regularized reaction family, and closed-form
profiles used as oracles by the discrete machinery.

The reaction is the cutoff Zeldovich form f_eps(v) = (v/eps^2) phi(v/eps)
with phi(s) = A (1-s)_+ on [0,1].  The amplitude A = 3/d makes the first
moment of phi equal 1/(2d) exactly, which is what fixes the limit speed
of the one-dimensional wave at 1.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModelAssumptionWarning


class ModelKind(enum.Enum):
    SINGLE = "single"
    TWO = "two"


@dataclass(frozen=True)
class Parameters:
    """Physical and truncation constants of one problem instance.

    d and D are field and road diffusivities, mu and nu the exchange
    rates, L the strip depth, eps the regularization scale.  x_min and
    x_max truncate the ideal line to a finite interval; both tails decay
    exponentially so the window only has to be generously sized.
    """

    d: float = 1.0
    D: float = 2.0
    mu: float = 1.0
    nu: float = 1.0
    L: float = 2.0
    eps: float = 0.05
    x_min: float = -16.0
    x_max: float = 16.0
    pin_x: float = 0.0
    model_kind: ModelKind = ModelKind.SINGLE

    def __post_init__(self):
        for name in ("d", "D", "mu", "nu", "L", "eps"):
            val = getattr(self, name)
            if not (val > 0.0 and math.isfinite(val)):
                raise DomainError(f"parameter {name} must be finite and > 0, got {val}")
        if not (self.x_min < 0.0 < self.x_max):
            raise DomainError(
                f"need x_min < 0 < x_max, got [{self.x_min}, {self.x_max}]"
            )
        # the pinning abscissa is a gauge choice; it must sit inside the window
        if not (self.x_min < self.pin_x < self.x_max):
            raise DomainError(
                f"pin_x={self.pin_x} outside the window [{self.x_min}, {self.x_max}]"
            )
        if self.model_kind is ModelKind.SINGLE and self.D < self.d:
            warnings.warn(
                "single-species contact asymptotics assume D >= d; "
                f"got D={self.D} < d={self.d}",
                ModelAssumptionWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class CutoffProfile:
    """The concrete phi: linear ramp A*(1-s) on [0,1], zero beyond."""

    amplitude: float
    support: tuple = (0.0, 1.0)

    @classmethod
    def for_diffusivity(cls, d):
        """Amplitude tuned so that int_0^inf s phi(s) ds = 1/(2d)."""
        if not d > 0.0:
            raise DomainError(f"diffusivity must be > 0, got {d}")
        return cls(amplitude=3.0 / d)

    def __post_init__(self):
        if not self.amplitude > 0.0:
            raise DomainError(f"amplitude must be > 0, got {self.amplitude}")


def eval_phi(profile: CutoffProfile, s):
    """phi(s) for s >= 0; scalar or array."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise DomainError("phi is only defined for s >= 0")
    out = profile.amplitude * np.clip(1.0 - s, 0.0, None)
    return out if out.ndim else float(out)


def eval_f_eps(profile: CutoffProfile, v, eps):
    """Regularized reaction (v/eps^2) phi(v/eps); zero for v >= eps."""
    if not eps > 0.0:
        raise DomainError(f"eps must be > 0, got {eps}")
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        raise DomainError("densities are nonnegative; got v < 0")
    out = (v / eps**2) * eval_phi(profile, v / eps)
    return out if out.ndim else float(out)


def eval_F_eps(profile: CutoffProfile, v, eps):
    """Exact antiderivative of eval_f_eps; plateau A/6 for v >= eps."""
    if not eps > 0.0:
        raise DomainError(f"eps must be > 0, got {eps}")
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        raise DomainError("densities are nonnegative; got v < 0")
    a = profile.amplitude
    w = np.minimum(v, eps)
    out = (a / eps**2) * (0.5 * w**2 - w**3 / (3.0 * eps))
    return out if out.ndim else float(out)


def f_eps_with_derivative(profile: CutoffProfile, v, eps, fp_band: float = 0.0):
    """Reaction and its v-derivative, extended by zero to v < 0.

    The zero extension is a solver safeguard: Newton iterates may
    transiently undershoot and must not abort.  Converged states are
    checked nonnegative separately.

    With fp_band > 0 the returned derivative is mollified: the slope
    jumps at v = 0 and v = eps are ramped linearly over a band of width
    fp_band*eps.  The value f stays exact, so solutions of f-based
    systems are unchanged; only the local model a Newton iteration sees
    becomes continuous in v, which stops active-set cycling when many
    nodes straddle a kink at once.
    """
    v = np.asarray(v, dtype=float)
    a = profile.amplitude
    inside = (v > 0.0) & (v < eps)
    f = np.where(inside, (a / eps**2) * v * (1.0 - v / eps), 0.0)
    if fp_band > 0.0:
        t = v / eps
        ramp_on = np.clip(t / fp_band + 0.5, 0.0, 1.0)
        ramp_off = np.clip((1.0 - t) / fp_band + 0.5, 0.0, 1.0)
        fp = (a / eps**2) * (1.0 - 2.0 * np.clip(t, 0.0, 1.0)) * ramp_on * ramp_off
    else:
        fp = np.where(inside, (a / eps**2) * (1.0 - 2.0 * v / eps), 0.0)
    return f, fp


def F_eps_extended(profile: CutoffProfile, v, eps):
    """Antiderivative matching the zero extension of the reaction."""
    v = np.asarray(v, dtype=float)
    a = profile.amplitude
    w = np.clip(v, 0.0, eps)
    return (a / eps**2) * (0.5 * w**2 - w**3 / (3.0 * eps))


class AnalyticKind(enum.Enum):
    TWO_PHASE_PLANE = "two_phase_plane"
    PARABOLIC_CONTACT = "parabolic_contact"
    ONE_DIM_INNER = "one_dim_inner"


@dataclass(frozen=True)
class AnalyticProfile:
    """Closed-form global solutions used as oracles.

    TWO_PHASE_PLANE(lam): (lam*y - sqrt(1-lam^2)*x)_+ .  This is the
    x-orientation with nonincreasing profile in x; the reflected form
    solves the same equations.
    PARABOLIC_CONTACT(D): (y + x^2/(2D))_+ , the quadratic touch of a
    free boundary against the line y = 0.
    ONE_DIM_INNER(d): the one-dimensional inner layer profile at unit
    regularization scale: 1 - x/d for x <= 0, glued C^2 at x = 0 to
    (3/2) sech^2(sqrt(3)/(2d) x + artanh(1/sqrt 3)) for x > 0.  It
    satisfies -d w'' + f_1(w) = 0 on the whole line and is the only
    oracle with nonvanishing smooth curvature, so convergence orders
    are measured against it.
    """

    kind: AnalyticKind
    lam: float = 0.6
    D: float = 2.0
    d: float = 1.0

    def __post_init__(self):
        if self.kind is AnalyticKind.TWO_PHASE_PLANE:
            if not 0.0 < self.lam < 1.0:
                raise DomainError(f"plane slope parameter must be in (0,1), got {self.lam}")
        elif self.kind is AnalyticKind.PARABOLIC_CONTACT:
            if not self.D > 0.0:
                raise DomainError(f"road diffusivity must be > 0, got {self.D}")
        elif self.kind is AnalyticKind.ONE_DIM_INNER:
            if not self.d > 0.0:
                raise DomainError(f"field diffusivity must be > 0, got {self.d}")


_THETA0 = np.arctanh(1.0 / np.sqrt(3.0))


def one_dim_inner(x, d=1.0):
    """The glued linear/sech^2 layer profile; vectorized in x."""
    x = np.asarray(x, dtype=float)
    theta = (np.sqrt(3.0) / (2.0 * d)) * np.maximum(x, 0.0) + _THETA0
    sech2 = 1.0 / np.cosh(theta) ** 2
    out = np.where(x <= 0.0, 1.0 - x / d, 1.5 * sech2)
    return out if out.ndim else float(out)


def eval_analytic(profile: AnalyticProfile, point):
    """Evaluate an analytic profile at (x, y); both may be arrays."""
    x, y = point
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if profile.kind is AnalyticKind.TWO_PHASE_PLANE:
        lam = profile.lam
        out = np.clip(lam * y - np.sqrt(1.0 - lam**2) * x, 0.0, None)
    elif profile.kind is AnalyticKind.PARABOLIC_CONTACT:
        out = np.clip(y + x**2 / (2.0 * profile.D), 0.0, None)
    elif profile.kind is AnalyticKind.ONE_DIM_INNER:
        out = one_dim_inner(x, profile.d) + 0.0 * y
    else:  # pragma: no cover
        raise DomainError(f"unknown analytic kind {profile.kind}")
    return out if out.ndim else float(out)
