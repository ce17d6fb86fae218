"""Uniform-film equilibria, the lubrication closure and linear growth rates."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoEquilibriumError
from .kernels import (
    ModelParams,
    PointState,
    general_terms,
    power_law_coeffs,
    rhs_general,
    rhs_power_law,
)
from .rheology import SQRT2


@dataclass(frozen=True)
class EquilibriumResult:
    ubar_eq: float
    residual: float
    iterations: int


def _check_positive(**kw):
    for name, value in kw.items():
        if not (np.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be > 0, got {value}")


def equilibrium_velocity(eta, s, c_s, g1):
    """Uniform-film mean velocity where bed drag balances along-bed gravity.

    Closed form of the power-law balance
    ``drag * c_s * X**s / eta = grav * g1`` with ``X = sqrt(2) u / eta``.
    The residual is the unscaled momentum balance ``Re * du/dt``.
    """
    _check_positive(eta=eta, s=s, c_s=c_s)
    if not np.isfinite(g1):
        raise DomainError(f"g1 must be finite, got {g1}")
    k = power_law_coeffs(s)
    x = (k.grav * abs(g1) * eta / (k.drag * c_s)) ** (1.0 / s)
    u = float(np.copysign(eta * x / SQRT2, g1)) if g1 != 0 else 0.0
    mp = ModelParams.from_components(1.0, g1, 0.0)
    _, dudt = rhs_power_law(PointState(eta, u), mp, s, c_s)
    return EquilibriumResult(u, float(dudt), 0)


def _general_balance(eta, u, r, mp):
    t = general_terms(PointState(eta, u), mp, r)
    return float((t["drag"] + t["gravity"]) * mp.re)


def equilibrium_velocity_general(eta, r, mp, rtol=1e-13, max_iter=400):
    """Uniform equilibrium of the general-rheology model by bisection.

    The upper end of the bracket ``[0, u_max]`` grows geometrically until
    the drag/gravity balance changes sign.
    """
    _check_positive(eta=eta)
    if mp.g1 == 0:
        return EquilibriumResult(0.0, _general_balance(eta, 0.0, r, mp), 0)
    sign = np.sign(mp.g1)
    f = lambda u: sign * _general_balance(eta, sign * u, r, mp)  # noqa: E731
    lo, hi = 0.0, 1e-3 * eta
    it = 0
    while f(hi) > 0:
        lo, hi = hi, 2.0 * hi
        it += 1
        if hi > 1e12 or it > max_iter:
            raise NoEquilibriumError(f"no equilibrium in range: balance stays positive up to u={hi:g}")
    while hi - lo > rtol * hi and it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    fl, fh = f(lo), f(hi)
    u = lo if abs(fl) <= abs(fh) else hi
    return EquilibriumResult(float(sign * u), _general_balance(eta, sign * u, r, mp), it)


def equilibrium_shear(eta, s, c_s, mp):
    """Uniform shear parameter balancing drag and gravity in the ``eta_E`` model."""
    _check_positive(eta=eta, s=s, c_s=c_s)
    if mp.g1 == 0:
        return 0.0
    g, r = mp.gamma, 1.0 / s
    drag = 2.5 * (g + 0.25 * (1.0 - r) * g**2)
    if drag <= 0:
        raise NoEquilibriumError(f"drag vanishes at gamma={g}; no uniform equilibrium with g1 != 0")
    grav = SQRT2 * (0.75 - (1.0 + r) / 16.0 * g)
    e = (grav * abs(mp.g1) * eta / (drag * c_s)) ** (1.0 / s)
    return float(np.copysign(e, mp.g1))


def lubrication_velocity(eta, deta_dx, s, c_s, g1, g2):
    """Mean velocity of the inertia-free limit: drag balances gravity locally."""
    _check_positive(s=s, c_s=c_s)
    eta = np.asarray(eta, dtype=float)
    k = power_law_coeffs(s)
    forcing = g1 - g2 * np.asarray(deta_dx, dtype=float)
    x = (np.abs(forcing) * k.grav * eta / (k.drag * c_s)) ** (1.0 / s)
    return np.sign(forcing) * eta * x / SQRT2


@dataclass(frozen=True)
class GrowthRates:
    k: float
    sigma: np.ndarray
    vectors: np.ndarray
    matrix: np.ndarray
    ubar_eq: float


def _fd5(f, x, h):
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def growth_rates(k, eta0, s, c_s, mp, rheology=None):
    """Complex growth rates of Fourier modes ``exp(ikx + sigma t)`` about a uniform film.

    The 2x2 system matrix is built by numerical differentiation of the
    pointwise kernels, so it tracks the kernels exactly.  The base state is
    the uniform equilibrium for ``mp.g1``.  With ``rheology`` given, the
    general-rheology model is linearized instead of the power-law one.
    """
    _check_positive(eta0=eta0)
    if rheology is None:
        u0 = equilibrium_velocity(eta0, s, c_s, mp.g1).ubar_eq

        def rhs(eta, u, ex, ux):
            return rhs_power_law(PointState(eta, u, ex, ux), mp, s, c_s)
    else:
        u0 = equilibrium_velocity_general(eta0, rheology, mp).ubar_eq
        s = getattr(rheology, "s", s)

        def rhs(eta, u, ex, ux):
            return rhs_general(PointState(eta, u, ex, ux), mp, rheology)

    if u0 == 0 and s < 1:
        raise DomainError("drag linearization is singular at rest for s < 1")
    flux = lambda e, u: rhs(e, u, 0.0, 0.0)[0]  # noqa: E731
    mom = lambda e, u, ex=0.0, ux=0.0: rhs(e, u, ex, ux)[1]  # noqa: E731
    h_eta = 1e-3 * eta0
    h_u = 1e-3 * max(abs(u0), 1e-3)
    f_eta = _fd5(lambda e: flux(e, u0), eta0, h_eta)
    f_u = _fd5(lambda u: flux(eta0, u), u0, h_u)
    m_eta = _fd5(lambda e: mom(e, u0), eta0, h_eta)
    m_u = _fd5(lambda u: mom(eta0, u), u0, h_u)
    # affine in the gradients, so a unit central difference is exact
    m_ex = 0.5 * (mom(eta0, u0, 1.0, 0.0) - mom(eta0, u0, -1.0, 0.0))
    m_ux = 0.5 * (mom(eta0, u0, 0.0, 1.0) - mom(eta0, u0, 0.0, -1.0))
    ik = 1j * k
    a = np.array([[-ik * f_eta, -ik * f_u], [m_eta + ik * m_ex, m_u + ik * m_ux]], dtype=complex)
    sigma, vectors = np.linalg.eig(a)
    scale = max(1.0, np.linalg.norm(a))
    for j in range(2):
        res = np.linalg.norm(a @ vectors[:, j] - sigma[j] * vectors[:, j])
        if res > 1e-12 * scale:
            raise ArithmeticError(f"eigenpair residual {res:g} exceeds tolerance")
    return GrowthRates(float(k), sigma, vectors, a, float(u0))
