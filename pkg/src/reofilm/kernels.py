"""Pointwise right-hand sides of the depth-averaged film models.

Three model families are provided:

* ``power_law_ubar``: thickness and mean velocity for a power-law fluid,
  evaluated at the physical value of the artificial parameter.
* ``eta_E``: thickness and shear parameter ``E`` with the artificial
  parameter ``gamma`` kept explicit.
* ``general``: thickness and mean velocity for an arbitrary viscosity law.

Every kernel accepts scalars or equal-shape numpy arrays.  The thickness
equation is always returned as a conservative flux; the discretization
takes its divergence.  Drag terms use ``sign(u) * |u|**s`` so that drag
opposes motion for either flow direction.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ThinFilmError
from .rheology import EPS_FLOOR, SQRT2, PowerLaw, evaluate_at_state

#: Thinnest admissible film.
ETA_FLOOR = 1e-6

FAMILIES = ("power_law_ubar", "eta_E", "general")


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional groups shared by all model families.

    Gravity is stored as a magnitude ``gr`` and direction ``(g_hat1, g_hat2)``
    along and normal to the bed; ``g1``/``g2`` are the products.
    """

    re: float
    gr: float = 0.0
    g_hat1: float = 0.0
    g_hat2: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.re) and self.re >= 0):
            raise DomainError(f"re must be >= 0, got {self.re}")
        if not (np.isfinite(self.gr) and self.gr >= 0):
            raise DomainError(f"gr must be >= 0, got {self.gr}")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.gr > 0 and self.g_hat1**2 + self.g_hat2**2 == 0:
            raise DomainError("gravity direction (g_hat1, g_hat2) must be nonzero when gr > 0")

    @classmethod
    def from_components(cls, re, g1, g2, gamma=1.0):
        """Build from the along-bed and normal gravity components ``g1, g2``."""
        gr = float(np.hypot(g1, g2))
        if gr == 0:
            return cls(re=re, gr=0.0, g_hat1=0.0, g_hat2=1.0, gamma=gamma)
        return cls(re=re, gr=gr, g_hat1=g1 / gr, g_hat2=g2 / gr, gamma=gamma)

    @property
    def g1(self):
        return self.gr * self.g_hat1

    @property
    def g2(self):
        return self.gr * self.g_hat2

    def reflected(self):
        """Parameters seen in the mirror frame ``x -> -x``."""
        return replace(self, g_hat1=-self.g_hat1)


class PointState(NamedTuple):
    """Local film state: thickness, velocity variable and their x-gradients.

    ``vel`` is the mean velocity for the ``ubar`` families and the shear
    parameter ``E`` for the ``eta_E`` family.
    """

    eta: np.ndarray
    vel: np.ndarray
    deta_dx: np.ndarray = 0.0
    dvel_dx: np.ndarray = 0.0


class PowerLawCoeffs(NamedTuple):
    adv: float
    grad_eta: float
    drag: float
    grav: float


def power_law_coeffs(s):
    """Coefficients of the power-law mean-velocity model for exponent ``s``."""
    if not (np.isfinite(s) and s > 0):
        raise DomainError(f"exponent s must be > 0, got {s}")
    r = 1.0 / s
    return PowerLawCoeffs(
        adv=(167.0 - 25.0 * r) / 96.0,
        grad_eta=(25.0 - 13.0 * r) / 96.0,
        drag=5.0 * (25.0 - r) / (48.0 * SQRT2),
        grav=(19.0 + r) / 24.0,
    )


def _check_state(p, mp):
    eta = np.asarray(p.eta, dtype=float)
    if np.any(~(eta >= ETA_FLOOR)):
        idx = int(np.argmin(np.where(np.isnan(eta), -np.inf, eta))) if eta.ndim else None
        raise ThinFilmError(
            f"film thickness below ETA_FLOOR={ETA_FLOOR:g}: min eta = {np.nanmin(eta):g}",
            index=idx,
        )
    if not mp.re > 0:
        raise DomainError(
            "re must be > 0 for the inertial models; use analysis.lubrication_velocity for re -> 0"
        )
    return eta


def _signed_power(v, s):
    return np.sign(v) * np.abs(v) ** s


def power_law_terms(p, mp, s, c_s, coeffs=None):
    """Split ``du/dt`` of the power-law mean-velocity model into its four terms.

    Returns a dict with keys ``drag``, ``advection``, ``slope`` and
    ``gravity`` whose values sum to ``du/dt``.
    """
    eta = _check_state(p, mp)
    u = np.asarray(p.vel, dtype=float)
    k = power_law_coeffs(s) if coeffs is None else coeffs
    shear = SQRT2 * u / eta
    return {
        "drag": -k.drag * c_s * _signed_power(shear, s) / eta / mp.re,
        "advection": -k.adv * u * p.dvel_dx,
        "slope": -k.grad_eta * u**2 * p.deta_dx / eta,
        "gravity": k.grav * (mp.g1 - mp.g2 * p.deta_dx) / mp.re,
    }


def rhs_power_law(p, mp, s, c_s):
    """Mass flux ``eta*u`` and ``du/dt`` for a power-law fluid."""
    terms = power_law_terms(p, mp, s, c_s)
    return p.eta * p.vel, sum(terms.values())


def eta_E_flux_factor(mp, s):
    return 1.0 + 5.0 * SQRT2 / (48.0 * s) * mp.gamma


def eta_E_terms(p, mp, s, c_s):
    """Split ``dE/dt`` of the thickness/shear-parameter model into four terms."""
    eta = _check_state(p, mp)
    e = np.asarray(p.vel, dtype=float)
    g = mp.gamma
    r = 1.0 / s
    drag_bracket = 2.5 * (g + 0.25 * (1.0 - r) * g**2)
    grav_bracket = 0.75 - (1.0 + r) / 16.0 * g
    return {
        "drag": -drag_bracket * c_s * _signed_power(e, s) / eta**2 / mp.re,
        "advection": -SQRT2 * (0.375 + (1.0 - 8.0 * r) / 96.0 * g) * eta * e * p.dvel_dx,
        "slope": SQRT2 * g / (6.0 * s) * e**2 * p.deta_dx,
        "gravity": mp.gr * SQRT2 * grav_bracket * (mp.g_hat1 - mp.g_hat2 * p.deta_dx) / eta / mp.re,
    }


def rhs_eta_E(p, mp, s, c_s):
    """Mass flux and ``dE/dt`` of the thickness/shear-parameter model."""
    terms = eta_E_terms(p, mp, s, c_s)
    flux = eta_E_flux_factor(mp, s) * 0.5 * p.eta**2 * p.vel
    return flux, sum(terms.values())


def _velocity_series(s):
    a1 = 5.0 / (24.0 * s)
    a2 = 5.0 * (4.0 - 1.0 / s) / (288.0 * s)
    return a1, a2


def _velocity_correction(eta, e, mp, s, c_s, de_dx, deta_dx):
    mag = np.maximum(np.abs(e), EPS_FLOOR)
    bracket = mp.re / 160.0 * e * de_dx + mp.gr / 48.0 * (mp.g_hat1 - mp.g_hat2 * deta_dx)
    return eta**2 * mag ** (1.0 - s) / (s * c_s) * bracket


def mean_velocity(eta, e, mp, s, c_s, de_dx=0.0, deta_dx=0.0):
    """Mean lateral velocity implied by thickness ``eta`` and shear parameter ``e``.

    The shear parameter magnitude is floored at ``EPS_FLOOR`` inside the
    gradient/gravity correction, whose prefactor ``|E|**(1-s)`` is singular
    at rest for ``s > 1``.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < ETA_FLOOR):
        raise ThinFilmError(f"film thickness below ETA_FLOOR={ETA_FLOOR:g}")
    a1, a2 = _velocity_series(s)
    g = mp.gamma
    lead = (1.0 + a1 * g + a2 * g**2) * eta * e / SQRT2
    return lead + _velocity_correction(eta, e, mp, s, c_s, de_dx, deta_dx)


def invert_mean_velocity(eta, ubar, mp, s, c_s, du_dx=0.0, deta_dx=0.0):
    """Shear parameter ``E`` reproducing mean velocity ``ubar``.

    The inversion is a truncated series: exact to second order in ``gamma``
    and to first order in the gradient/gravity correction, which is
    evaluated at the leading-order shear parameter.
    """
    eta = np.asarray(eta, dtype=float)
    ubar = np.asarray(ubar, dtype=float)
    if np.any(eta < ETA_FLOOR):
        raise ThinFilmError(f"film thickness below ETA_FLOOR={ETA_FLOOR:g}")
    a1, a2 = _velocity_series(s)
    g = mp.gamma
    inverse = 1.0 - a1 * g + (a1**2 - a2) * g**2
    e0 = inverse * SQRT2 * ubar / eta
    de0_dx = inverse * SQRT2 * (du_dx / eta - ubar * deta_dx / eta**2)
    correction = _velocity_correction(eta, e0, mp, s, c_s, de0_dx, deta_dx)
    return inverse * SQRT2 * (ubar - correction) / eta


def general_terms(p, mp, r):
    """Split ``du/dt`` of the general-rheology model into its four terms."""
    eta = _check_state(p, mp)
    u = np.asarray(p.vel, dtype=float)
    ev = evaluate_at_state(r, eta, u)
    g = mp.gamma
    drag_c = ev.drag_contraction()
    drag_bracket = 2.5 * g + 5.0 * g**2 / 48.0 * drag_c
    adv_bracket = 1.75 - 13.0 * g / 48.0 + g / 96.0 * ev.advection_contraction()
    slope_bracket = 0.125 - g / 16.0 + 13.0 * g / 192.0 * ev.slope_contraction()
    grav_bracket = 0.75 + g / 12.0 - g / 24.0 * drag_c
    # signed shear keeps the slope term odd under reflection
    shear = SQRT2 * u / eta
    return {
        "drag": -drag_bracket * ev.nu_bar * u / eta**2 / mp.re,
        "advection": -adv_bracket * u * p.dvel_dx,
        "slope": -SQRT2 * slope_bracket * shear * u * p.deta_dx,
        "gravity": grav_bracket * mp.gr * (mp.g_hat1 - mp.g_hat2 * p.deta_dx) / mp.re,
    }


def rhs_general(p, mp, r):
    """Mass flux ``eta*u`` and ``du/dt`` for an arbitrary viscosity law."""
    terms = general_terms(p, mp, r)
    return p.eta * p.vel, sum(terms.values())


TERM_NAMES = ("drag", "advection", "slope", "gravity")

#: Gradients and forcing used when comparing model terms pointwise.
REDUCTION_PROBE = {"deta_dx": 0.3, "du_dx": -0.2, "re": 1.7, "g1": 0.9, "g2": 1.1}

DEFAULT_REDUCTION_SAMPLES = [
    (eta, u, s, 1.0)
    for eta in (0.5, 1.0, 2.0)
    for u in (0.1, 0.5, 1.0)
    for s in (0.5, 1.0 / 1.96, 1.0, 1.5, 2.0)
]


def _rel_diff(a, b):
    a, b = float(a), float(b)
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def reduction_report(samples=None, coeffs=None, probe=None):
    """Worst relative mismatch per term between the general and power-law models.

    Each sample ``(eta, u, s, c_s)`` is evaluated with a power-law viscosity
    in the general model at ``gamma = 1`` and compared with the power-law
    model term by term.  ``coeffs`` overrides the power-law coefficients,
    which lets callers check that a corrupted coefficient is detected.
    """
    samples = DEFAULT_REDUCTION_SAMPLES if samples is None else samples
    probe = {**REDUCTION_PROBE, **(probe or {})}
    mp = ModelParams.from_components(probe["re"], probe["g1"], probe["g2"], gamma=1.0)
    worst = dict.fromkeys(TERM_NAMES, 0.0)
    for eta, u, s, c_s in samples:
        p = PointState(eta, u, probe["deta_dx"], probe["du_dx"])
        ref = power_law_terms(p, mp, s, c_s, coeffs=None if coeffs is None else coeffs(s))
        gen = general_terms(p, mp, PowerLaw(s, c_s))
        for name in TERM_NAMES:
            worst[name] = max(worst[name], _rel_diff(gen[name], ref[name]))
    return worst


def reduction_residual(samples=None, **kwargs):
    """Largest term-wise relative difference found by :func:`reduction_report`."""
    return max(reduction_report(samples, **kwargs).values())


def stiff_terms(family, p, mp, rheology):
    """Local drag and gravity contribution to the velocity tendency.

    These are the terms an implicit-drag integrator treats implicitly; they
    involve no velocity gradient.
    """
    if family == "power_law_ubar":
        t = power_law_terms(p, mp, rheology.s, rheology.c_s)
    elif family == "eta_E":
        t = eta_E_terms(p, mp, rheology.s, rheology.c_s)
    elif family == "general":
        t = general_terms(p, mp, rheology)
    else:
        raise DomainError(f"no stiff terms for family {family!r}")
    return t["drag"] + t["gravity"]
