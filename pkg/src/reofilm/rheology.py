"""Shear-rate dependent kinematic viscosity laws.

A rheology maps the magnitude of the strain-rate invariant to a kinematic
viscosity.  Every law exposes ``viscosity(eps)`` returning the viscosity and
its first two derivatives with respect to the shear rate, which is all the
general depth-averaged momentum model needs.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, ExtrapolationError, NonInvertibleRheologyError

#: Smallest shear rate at which a viscosity law is evaluated.
EPS_FLOOR = 1e-8

SQRT2 = np.sqrt(2.0)


def _check_floor(eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < EPS_FLOOR) or np.any(~np.isfinite(eps)):
        raise DomainError(
            f"shear rate must be finite and >= EPS_FLOOR={EPS_FLOOR:g}, "
            f"got min {np.min(eps):g}"
        )
    return eps


@dataclass(frozen=True)
class PowerLaw:
    """Power-law viscosity ``nu = c_s * eps**(s - 1)``.

    Parameters
    ----------
    s : float
        Flow exponent; ``s < 1`` is shear thinning, ``s > 1`` thickening.
    c_s : float
        Consistency coefficient.
    """

    s: float
    c_s: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.s) and self.s > 0):
            raise DomainError(f"power-law exponent s must be > 0, got {self.s}")
        if not (np.isfinite(self.c_s) and self.c_s > 0):
            raise DomainError(f"power-law coefficient c_s must be > 0, got {self.c_s}")

    def viscosity(self, eps):
        eps = _check_floor(eps)
        s, c = self.s, self.c_s
        nu = c * eps ** (s - 1.0)
        nu_p = c * (s - 1.0) * eps ** (s - 2.0)
        nu_pp = c * (s - 1.0) * (s - 2.0) * eps ** (s - 3.0)
        return nu, nu_p, nu_pp


@dataclass(frozen=True)
class Newtonian:
    """Constant viscosity; the ``s = 1`` power law without 0 * inf hazards."""

    nu: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise DomainError(f"Newtonian viscosity must be > 0, got {self.nu}")

    @property
    def s(self):
        return 1.0

    @property
    def c_s(self):
        return self.nu

    def viscosity(self, eps):
        eps = _check_floor(eps)
        nu = np.full_like(eps, self.nu)
        zero = np.zeros_like(eps)
        return nu, zero, zero.copy()


@dataclass(frozen=True)
class Tabulated:
    """Viscosity interpolated from ``(eps, nu)`` samples.

    The interpolant is a natural cubic spline, so the second derivative
    exists everywhere inside the table.  Evaluation outside the sampled
    range raises :class:`ExtrapolationError`.
    """

    samples: tuple
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        table = np.asarray(self.samples, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise DomainError("tabulated rheology needs a list of [eps, nu] pairs")
        if table.shape[0] < 4:
            raise DomainError(f"tabulated rheology needs >= 4 samples, got {table.shape[0]}")
        if np.any(np.diff(table[:, 0]) <= 0):
            raise DomainError("tabulated shear rates must be strictly increasing")
        if np.any(table[:, 1] <= 0) or not np.all(np.isfinite(table)):
            raise DomainError("tabulated viscosities must be finite and > 0")
        object.__setattr__(self, "samples", tuple(map(tuple, table.tolist())))
        object.__setattr__(self, "_spline", CubicSpline(table[:, 0], table[:, 1], bc_type="natural"))

    @property
    def eps_range(self):
        return self.samples[0][0], self.samples[-1][0]

    def viscosity(self, eps):
        eps = _check_floor(eps)
        lo, hi = self.eps_range
        if np.any(eps < lo) or np.any(eps > hi):
            raise ExtrapolationError(
                f"shear rate outside tabulated range [{lo:g}, {hi:g}]: "
                f"got [{np.min(eps):g}, {np.max(eps):g}]"
            )
        sp = self._spline
        return sp(eps), sp(eps, 1), sp(eps, 2)


PRESETS = {
    "newtonian": Newtonian(1.0),
    # 0.5% hydroxyethylcellulose at 20 C; only the exponent is carried over.
    "hec": PowerLaw(1.0 / 1.96, 1.0),
    "shear-thickening-2": PowerLaw(2.0, 1.0),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown rheology preset {name!r}; choose from {sorted(PRESETS)}") from None


def viscosity(r, eps):
    """Return ``(nu, dnu/deps, d2nu/deps2)`` of rheology ``r`` at ``eps``."""
    return r.viscosity(eps)


@dataclass(frozen=True)
class RheoEval:
    """Viscosity data evaluated at the mean shear rate of a film state.

    Attributes are scalars or arrays matching the input state.
    """

    eps_bar: np.ndarray
    nu_bar: np.ndarray
    nu_p: np.ndarray
    nu_pp: np.ndarray
    r_nu: np.ndarray

    def drag_contraction(self):
        """``eps nu R^2 (2 nu' + eps nu'')``; equals ``1 - 1/s`` for power laws."""
        e = self.eps_bar
        return e * self.nu_bar * self.r_nu**2 * (2.0 * self.nu_p + e * self.nu_pp)

    def advection_contraction(self):
        """``eps R^2 (38 nu nu' + 12 eps nu'^2 + 13 eps nu nu'')``."""
        e, nu, p, pp = self.eps_bar, self.nu_bar, self.nu_p, self.nu_pp
        return e * self.r_nu**2 * (38.0 * nu * p + 12.0 * e * p**2 + 13.0 * e * nu * pp)

    def slope_contraction(self):
        """``eps^2 R^2 (2 nu'^2 - nu nu'')``."""
        e = self.eps_bar
        return e**2 * self.r_nu**2 * (2.0 * self.nu_p**2 - self.nu_bar * self.nu_pp)


def evaluate_at_state(r, eta, ubar):
    """Evaluate the viscosity law at the mean shear rate ``sqrt(2)|ubar|/eta``.

    The shear rate is clamped below at :data:`EPS_FLOOR`.  Raises
    :class:`NonInvertibleRheologyError` where ``nu + eps nu'`` is not positive.
    """
    eta = np.asarray(eta, dtype=float)
    ubar = np.asarray(ubar, dtype=float)
    if np.any(eta <= 0) or not np.all(np.isfinite(ubar)):
        raise DomainError("evaluate_at_state needs eta > 0 and finite ubar")
    eps_bar = np.maximum(SQRT2 * np.abs(ubar) / eta, EPS_FLOOR)
    nu, nu_p, nu_pp = r.viscosity(eps_bar)
    slope = nu + eps_bar * nu_p
    if np.any(slope <= 0):
        bad = np.argmin(slope) if np.ndim(slope) else None
        at = eps_bar if bad is None else eps_bar.flat[bad]
        raise NonInvertibleRheologyError(
            f"non-invertible rheology: nu + eps*nu' <= 0 at eps={float(at):g}"
        )
    return RheoEval(eps_bar, nu, nu_p, nu_pp, 1.0 / slope)
