"""Uniform 1D grid, stencils and assembly of the semi-discrete system."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ThinFilmError
from .kernels import FAMILIES, ModelParams, PointState

BOUNDARY_CONDITIONS = ("periodic", "outflow", "wall")
ALL_FAMILIES = FAMILIES + ("lubrication",)
FLUX_SCHEMES = ("central", "upwind")


@dataclass(frozen=True)
class Grid:
    """Cell-centred uniform mesh on ``[0, length]``.

    ``wall`` boundaries reflect the velocity and mirror the thickness;
    ``outflow`` boundaries use one-sided second-order stencils.
    """

    n: int
    length: float
    bc: str = "periodic"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise DomainError(f"grid needs n >= 8 cells, got {self.n}")
        if not self.length > 0:
            raise DomainError(f"grid length must be > 0, got {self.length}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise DomainError(f"unknown boundary condition {self.bc!r}; choose from {BOUNDARY_CONDITIONS}")

    @property
    def dx(self):
        return self.length / self.n

    @property
    def x(self):
        return (np.arange(self.n) + 0.5) * self.dx


@dataclass
class FilmState:
    """Thickness and velocity variable (``u`` or ``E``) on a grid at ``time``."""

    eta: np.ndarray
    vel: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)
        if self.eta.shape != self.vel.shape or self.eta.ndim != 1:
            raise DomainError("eta and vel must be 1D arrays of equal length")

    def copy(self):
        return FilmState(self.eta.copy(), self.vel.copy(), self.time)


def gradient(field, grid, parity=1):
    """Second-order x-derivative of a cell field.

    ``parity`` tells a ``wall`` boundary whether the field is mirrored (+1,
    thickness) or reflected with a sign change (-1, velocity, flux).
    """
    f = np.asarray(field, dtype=float)
    if f.shape != (grid.n,):
        raise DomainError(f"field has shape {f.shape}, grid expects ({grid.n},)")
    h2 = 2.0 * grid.dx
    if grid.bc == "periodic":
        return (np.roll(f, -1) - np.roll(f, 1)) / h2
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / h2
    if grid.bc == "wall":
        out[0] = (f[1] - parity * f[0]) / h2
        out[-1] = (parity * f[-1] - f[-2]) / h2
    else:
        out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / h2
        out[-1] = -(-3.0 * f[-1] + 4.0 * f[-2] - f[-3]) / h2
    return out


def flux_divergence(flux, grid):
    """Conservative central divergence of a cell-centred flux."""
    return gradient(flux, grid, parity=-1)


def face_divergence(face_flux, grid):
    """Divergence from the ``n + 1`` face fluxes of a finite-volume scheme."""
    return np.diff(face_flux) / grid.dx


def _upwind_faces(eta, vel, grid, flux_of):
    """Face fluxes with thickness taken from the upwind cell."""
    n = grid.n
    if grid.bc == "periodic":
        left_eta, right_eta = eta, np.roll(eta, -1)
        u_face = 0.5 * (vel + np.roll(vel, -1))
        inner = flux_of(np.where(u_face >= 0, left_eta, right_eta), u_face)
        return np.concatenate(([inner[-1]], inner))
    u_face = 0.5 * (vel[:-1] + vel[1:])
    inner = flux_of(np.where(u_face >= 0, eta[:-1], eta[1:]), u_face)
    faces = np.empty(n + 1)
    faces[1:-1] = inner
    if grid.bc == "wall":
        faces[0] = faces[-1] = 0.0
    else:
        faces[0] = flux_of(eta[0], vel[0])
        faces[-1] = flux_of(eta[-1], vel[-1])
    return faces


@dataclass(frozen=True)
class FilmModel:
    """Everything that defines the semi-discrete system besides the grid.

    Parameters
    ----------
    family : str
        One of ``power_law_ubar``, ``eta_E``, ``general`` or ``lubrication``.
    params : ModelParams
    rheology : PowerLaw, Newtonian or Tabulated
        The power-law families read ``s`` and ``c_s`` from it.
    flux_scheme : str
        ``central`` or first-order ``upwind`` thickness flux.
    implicit_drag : bool
        Treat drag and gravity implicitly, cell by cell.
    """

    family: str
    params: ModelParams
    rheology: object
    flux_scheme: str = "central"
    implicit_drag: bool = False

    def __post_init__(self):
        if self.family not in ALL_FAMILIES:
            raise DomainError(f"unknown model family {self.family!r}; choose from {ALL_FAMILIES}")
        if self.flux_scheme not in FLUX_SCHEMES:
            raise DomainError(f"unknown flux scheme {self.flux_scheme!r}; choose from {FLUX_SCHEMES}")
        if self.family != "general" and not hasattr(self.rheology, "s"):
            raise DomainError(f"family {self.family!r} needs a power-law or Newtonian rheology")
        if self.family != "lubrication" and not self.params.re > 0:
            raise DomainError("re must be > 0 for inertial model families")

    @property
    def s(self):
        return self.rheology.s

    @property
    def c_s(self):
        return self.rheology.c_s

    def point_terms(self, p):
        """Velocity tendency of state ``p`` split into named terms."""
        fam = self.family
        if fam == "power_law_ubar":
            return kernels.power_law_terms(p, self.params, self.s, self.c_s)
        if fam == "eta_E":
            return kernels.eta_E_terms(p, self.params, self.s, self.c_s)
        if fam == "general":
            return kernels.general_terms(p, self.params, self.rheology)
        raise DomainError("the lubrication family has no pointwise momentum kernel")

    def flux_of(self, eta, vel):
        if self.family == "eta_E":
            return kernels.eta_E_flux_factor(self.params, self.s) * 0.5 * eta**2 * vel
        return eta * vel

    def closure(self, eta, grid):
        """Velocity slaved to the thickness (``lubrication`` family only)."""
        from .analysis import lubrication_velocity

        mp = self.params
        return lubrication_velocity(eta, gradient(eta, grid), self.s, self.c_s, mp.g1, mp.g2)


def _check_eta(eta):
    if np.any(~(eta >= kernels.ETA_FLOOR)):
        i = int(np.nanargmin(np.where(np.isnan(eta), -np.inf, eta)))
        raise ThinFilmError(
            f"film thickness below ETA_FLOOR at cell {i}: eta={eta[i]:g}", index=i, eta=eta[i]
        )


def assemble_rhs(state, grid, model, stiff=True):
    """Semi-discrete tendencies ``(d eta/dt, d vel/dt)`` on the whole grid.

    With ``stiff=False`` the local drag and gravity terms are left out of
    the velocity tendency; an implicit-drag integrator adds them separately.
    The input state is not modified.
    """
    eta, vel = state.eta, state.vel
    if eta.shape != (grid.n,):
        raise DomainError(f"state has {eta.shape[0]} cells, grid has {grid.n}")
    _check_eta(eta)
    if model.family == "lubrication":
        vel = model.closure(eta, grid)
        dvel = np.zeros_like(vel)
        flux = eta * vel
    else:
        p = PointState(eta, vel, gradient(eta, grid), gradient(vel, grid, parity=-1))
        try:
            terms = model.point_terms(p)
            if not stiff:
                del terms["drag"], terms["gravity"]
            dvel = sum(terms.values())
            flux = model.flux_of(eta, vel)
        except ThinFilmError as exc:
            i = exc.index
            raise ThinFilmError(
                f"{exc} (cell {i}, eta={eta[i]:g}, vel={vel[i]:g})", index=i, eta=eta[i], vel=vel[i]
            ) from exc
    if model.flux_scheme == "upwind":
        deta = -face_divergence(_upwind_faces(eta, vel, grid, model.flux_of), grid)
    else:
        deta = -flux_divergence(flux, grid)
    return deta, np.asarray(dvel, dtype=float) * np.ones_like(eta)


def diagnostics(state, grid, dt_last=float("nan")):
    """Integral and extremal summaries of a state.

    ``momentum`` is the integral of ``eta * vel``; for the ``eta_E`` family
    ``vel`` is the shear parameter rather than a velocity.
    """
    dx = grid.dx
    return {
        "mass": float(np.sum(state.eta) * dx),
        "momentum": float(np.sum(state.eta * state.vel) * dx),
        "max_eta": float(np.max(state.eta)),
        "max_abs_u": float(np.max(np.abs(state.vel))),
        "dt_last": float(dt_last),
        "dx": float(dx),
    }
