"""Explicit time integration with stability-limited steps and positivity control."""

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .discretization import FilmState, assemble_rhs, diagnostics, gradient
from .errors import DomainError, PositivityError, ReofilmError, StiffnessError, ThinFilmError
from .kernels import ETA_FLOOR, PointState, power_law_coeffs
from .rheology import EPS_FLOOR, SQRT2, evaluate_at_state

log = logging.getLogger(__name__)

#: Largest relative change of total mass that flooring may cause in a step.
FLOOR_MASS_TOL = 1e-12


@dataclass(frozen=True)
class StepControl:
    t_end: float
    cfl: float = 0.4
    dt_max: float = 0.05
    dt_min: float = 1e-9
    output_every: float = None
    eta_floor: float = ETA_FLOOR

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise DomainError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not 0 < self.dt_min < self.dt_max:
            raise DomainError(f"need 0 < dt_min < dt_max, got {self.dt_min}, {self.dt_max}")
        if not self.t_end >= 0:
            raise DomainError(f"t_end must be >= 0, got {self.t_end}")
        if self.output_every is not None and not self.output_every > 0:
            raise DomainError(f"output_every must be > 0, got {self.output_every}")


def _rates(state, grid, model):
    """Per-cell advective speed, gravity-wave speed squared and drag relaxation rate."""
    eta, v = state.eta, state.vel
    mp = model.params
    g2 = max(mp.g2, 0.0)
    fam = model.family
    if fam == "power_law_ubar":
        s, k = model.s, power_law_coeffs(model.s)
        shear = SQRT2 * np.abs(v) / eta
        if s < 1:
            shear = np.maximum(shear, EPS_FLOOR)
        speed = np.abs(v)
        c2 = k.grav * g2 * eta / mp.re
        rate = s * k.drag * model.c_s * shear ** (s - 1.0) * SQRT2 / (eta**2 * mp.re)
    elif fam == "eta_E":
        s, g = model.s, mp.gamma
        a = kernels.eta_E_flux_factor(mp, s)
        b = 0.75 - (1.0 + 1.0 / s) / 16.0 * g
        drag = 2.5 * (g + 0.25 * (1.0 - 1.0 / s) * g**2)
        mag = np.abs(v) if s >= 1 else np.maximum(np.abs(v), EPS_FLOOR)
        speed = a * eta * np.abs(v)
        c2 = np.maximum(a * b * eta * g2 / (SQRT2 * mp.re), 0.0)
        rate = s * drag * model.c_s * mag ** (s - 1.0) / (eta**2 * mp.re)
    else:
        ev = evaluate_at_state(model.rheology, eta, v)
        g = mp.gamma
        drag_c = ev.drag_contraction()
        drag = 2.5 * g + 5.0 * g**2 / 48.0 * drag_c
        grav = 0.75 + g / 12.0 - g / 24.0 * drag_c
        speed = np.abs(v)
        c2 = np.maximum(grav * g2 * eta / mp.re, 0.0)
        rate = np.abs(drag) / (ev.r_nu * eta**2 * mp.re)
    return speed, c2, rate


def _lubrication_dt(state, grid, model):
    mp = model.params
    s, k = model.s, power_law_coeffs(model.s)
    eta = state.eta
    forcing = np.abs(mp.g1 - mp.g2 * gradient(eta, grid))
    if s != 1:
        forcing = np.maximum(forcing, 1e-12)
    gain = eta / SQRT2 * (k.grav * eta / (k.drag * model.c_s)) ** (1.0 / s) / s
    diffusivity = max(mp.g2, 0.0) * eta * gain * forcing ** (1.0 / s - 1.0)
    speed = (2.0 + 1.0 / s) * np.abs(state.vel)
    dx = grid.dx
    with np.errstate(divide="ignore"):
        bound = np.minimum(dx / speed, dx**2 / (2.0 * diffusivity))
    return np.min(bound)


def stable_dt(state, grid, model, control):
    """Largest explicit step allowed by advection, gravity waves and drag.

    In implicit-drag mode the drag limit is dropped and the gravity-wave
    limit relaxes to a diffusive one where drag overdamps the waves.
    Raises :class:`StiffnessError` below ``control.dt_min``.
    """
    dx = grid.dx
    if model.family == "lubrication":
        dt = control.cfl * _lubrication_dt(state, grid, model)
    else:
        speed, c2, rate = _rates(state, grid, model)
        c = np.sqrt(c2)
        with np.errstate(divide="ignore", invalid="ignore"):
            wave = dx / (speed + c)
            if model.implicit_drag:
                damped = np.where(c2 > 0, dx**2 * rate / (2.0 * c2), np.inf)
                bound = np.minimum(dx / speed, np.maximum(wave, damped))
            else:
                bound = np.minimum(wave, 1.0 / rate)
        dt = control.cfl * np.min(bound)
    dt = min(float(dt), control.dt_max)
    if not dt >= control.dt_min:
        raise StiffnessError(
            f"stable time step {dt:.3g} is below dt_min={control.dt_min:g}; "
            "try a smaller gamma, a larger Re, or implicit_drag mode"
        )
    return dt


def implicit_drag_solve(model, grid, eta, vel, tau, rtol=1e-14, max_iter=100):
    """Backward-Euler update of the local drag and gravity terms.

    Solves ``v - vel - tau * S(v) = 0`` cell by cell with thickness frozen,
    where ``S`` is the drag-plus-gravity tendency.  Newton iterations are
    safeguarded by a bracket that is valid whenever drag increases with
    velocity.
    """
    mp, rheo, fam = model.params, model.rheology, model.family
    deta = gradient(eta, grid)

    def stiff(v):
        return kernels.stiff_terms(fam, PointState(eta, v, deta, 0.0), mp, rheo)

    s0 = stiff(vel)
    guess = vel + tau * s0
    lo, hi = np.minimum(vel, guess), np.maximum(vel, guess)
    atol = 1e-15 * (np.max(np.abs(vel)) + np.max(np.abs(guess)) + 1e-300)
    v = vel.copy()
    for _ in range(max_iter):
        sv = stiff(v)
        g = v - vel - tau * sv
        lo = np.where(g < 0, v, lo)
        hi = np.where(g > 0, v, hi)
        h = 1e-7 * (np.abs(v) + atol * 1e7 + 1e-12)
        slope = 1.0 - tau * (stiff(v + h) - stiff(v - h)) / (2.0 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = v - g / slope
        outside = ~((new >= lo) & (new <= hi)) | ~np.isfinite(new)
        new = np.where(outside, 0.5 * (lo + hi), new)
        new = np.where(g == 0, v, new)
        change = np.abs(new - v)
        v = new
        if np.all((change <= rtol * np.abs(v)) | (change <= atol) | (hi - lo <= atol)):
            break
    return v


def _mass(eta):
    return float(np.sum(eta))


def rk4_step(state, dt, rhs, *, eta_floor=ETA_FLOOR, dt_min=1e-9, relax=None, closure=None):
    """One classical Runge-Kutta step with thickness flooring.

    Parameters
    ----------
    state : FilmState
    dt : float
    rhs : callable
        ``rhs(FilmState) -> (deta, dvel)``.
    relax : callable, optional
        ``relax(eta, vel, tau) -> vel``; applied for half a step before and
        after the Runge-Kutta stages (Strang splitting of stiff terms).
    closure : callable, optional
        ``closure(eta) -> vel`` recomputing a slaved velocity after the step.

    Returns
    -------
    (FilmState, float)
        The new state and the step actually taken.  When flooring the
        thickness would change the total mass by more than
        ``FLOOR_MASS_TOL`` relative, or a stage leaves the admissible
        domain, the step is retried at half the size.
    """
    while True:
        try:
            new = _attempt(state, dt, rhs, relax, closure)
        except (ThinFilmError, FloatingPointError) as exc:
            log.debug("step %.3g rejected: %s", dt, exc)
            new = None
        if new is not None:
            floored = np.maximum(new.eta, eta_floor)
            if np.all(np.isfinite(floored)) and np.all(np.isfinite(new.vel)):
                mass = _mass(new.eta)
                change = abs(_mass(floored) - mass) / abs(mass) if mass else 0.0
                if change <= FLOOR_MASS_TOL or np.array_equal(floored, new.eta):
                    new.eta = floored
                    if closure is not None:
                        new.vel = closure(new.eta)
                    return new, dt
                log.debug("step %.3g rejected: flooring changed mass by %.3g", dt, change)
        dt *= 0.5
        if dt < dt_min:
            raise PositivityError(
                f"step rejected repeatedly down to dt={dt:.3g} < dt_min={dt_min:g}", state=state
            )


def _attempt(state, dt, rhs, relax, closure):
    eta, vel = state.eta, state.vel
    if relax is not None:
        vel = relax(eta, vel, 0.5 * dt)
    with np.errstate(over="raise", invalid="raise"):
        k1 = rhs(FilmState(eta, vel, state.time))
        k2 = rhs(FilmState(eta + 0.5 * dt * k1[0], vel + 0.5 * dt * k1[1], state.time + 0.5 * dt))
        k3 = rhs(FilmState(eta + 0.5 * dt * k2[0], vel + 0.5 * dt * k2[1], state.time + 0.5 * dt))
        k4 = rhs(FilmState(eta + dt * k3[0], vel + dt * k3[1], state.time + dt))
    eta_new = eta + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    vel_new = vel + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    if relax is not None:
        if np.any(eta_new < ETA_FLOOR):
            raise ThinFilmError("thickness below floor before the stiff half step")
        vel_new = relax(eta_new, vel_new, 0.5 * dt)
    return FilmState(eta_new, vel_new, state.time + dt)


def step(state, dt, grid, model, control):
    """Advance ``state`` by one (possibly shortened) step of ``model``."""
    relax = closure = None
    if model.family == "lubrication":
        closure = lambda eta: model.closure(eta, grid)  # noqa: E731
    elif model.implicit_drag:
        relax = lambda eta, vel, tau: implicit_drag_solve(model, grid, eta, vel, tau)  # noqa: E731

    def rhs(s):
        return assemble_rhs(s, grid, model, stiff=not model.implicit_drag)

    return rk4_step(
        state, dt, rhs, eta_floor=control.eta_floor, dt_min=control.dt_min, relax=relax, closure=closure
    )


def integrate(state0, control, grid, model, observer=None):
    """Advance ``state0`` to ``control.t_end``.

    ``observer(time, state, diagnostics)`` is called at the start, every
    ``control.output_every`` time units (steps are shortened to land on
    these instants) and at the end.  The input state is not modified.
    """
    state = state0.copy()
    if model.family == "lubrication":
        state.vel = model.closure(state.eta, grid)
    t0, t_end = state.time, control.t_end
    every = control.output_every
    tol = 1e-12 * max(abs(t_end), 1.0)
    k_out = 1

    def next_output():
        # multiply rather than accumulate so output instants do not drift
        t = t0 + k_out * every if every else np.inf
        return t_end if abs(t - t_end) <= tol else t

    next_out = next_output()
    dt_last = float("nan")
    if observer is not None:
        observer(state.time, state, diagnostics(state, grid, dt_last))
    nsteps = 0
    while state.time < t_end - tol:
        dt = stable_dt(state, grid, model, control)
        target = min(t_end, next_out)
        snap = False
        if state.time + dt >= target - tol:
            dt, snap = target - state.time, True
        try:
            new, dt_taken = step(state, dt, grid, model, control)
        except ReofilmError:
            log.error("integration failed at t=%.6g after %d steps", state.time, nsteps)
            raise
        if snap and dt_taken == dt:
            new.time = target
        state, dt_last = new, dt_taken
        nsteps += 1
        if state.time >= next_out - tol:
            if observer is not None and state.time < t_end - tol:
                observer(state.time, state, diagnostics(state, grid, dt_last))
            k_out += 1
            next_out = next_output()
    if observer is not None and nsteps:
        observer(state.time, state, diagnostics(state, grid, dt_last))
    log.info("reached t=%.6g in %d steps", state.time, nsteps)
    return state
