"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible even under output
capture) before asserting.
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from reofilm.analysis import equilibrium_velocity, growth_rates, lubrication_velocity
from reofilm.discretization import FilmModel, FilmState, Grid, assemble_rhs, gradient
from reofilm.kernels import (
    ModelParams,
    PointState,
    invert_mean_velocity,
    mean_velocity,
    power_law_coeffs,
    reduction_report,
    rhs_power_law,
)
from reofilm.rheology import Newtonian, PowerLaw
from reofilm.stepping import StepControl, integrate, stable_dt, step

SQRT2 = np.sqrt(2.0)


@pytest.fixture
def report(capsys):
    def _report(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{number}] {name}: {detail}")
        assert ok, detail

    return _report


def test_01_reduction_identity(report):
    samples = [
        (eta, u, s, c)
        for eta in (0.5, 1.0, 2.0)
        for u in (0.1, 0.5, 1.0)
        for s in (0.5, 1 / 1.96, 1.0, 1.5, 2.0)
        for c in (0.5, 1.0, 2.0)
    ]
    t0 = time.perf_counter()
    worst = reduction_report(samples)
    elapsed = time.perf_counter() - t0
    residual = max(worst.values())
    report(1, "reduction identity", residual <= 1e-12 and elapsed < 1.0,
           f"max term-wise rel diff {residual:.2e} over {len(samples)} samples in {elapsed:.3f}s")


def test_02_coefficient_spot_checks(report):
    k1 = power_law_coeffs(1.0)
    exact = (71 / 48, 1 / 8, 2.5 / SQRT2, 5 / 6)
    worst = max(abs(a - b) for a, b in zip(k1, exact))
    hec = power_law_coeffs(1 / 1.96).grad_eta
    ok = worst == 0.0 and abs(hec + 0.005) <= 1e-15
    report(2, "coefficient spot checks", ok, f"s=1 max abs diff {worst:.1e}; s=1/1.96 grad_eta={hec!r}")


def test_03_newtonian_equilibrium(report):
    rng = np.random.default_rng(20240603)
    eta = 3.0 - 2.9 * rng.random(100)
    g1 = 3.0 - 2.9 * rng.random(100)
    t0 = time.perf_counter()
    rel = [abs(equilibrium_velocity(h, 1.0, 1.0, g).ubar_eq / (g * h**2 / 3) - 1) for h, g in zip(eta, g1)]
    elapsed = time.perf_counter() - t0
    worst = max(rel)
    report(3, "Newtonian equilibrium", worst <= 1e-12 and elapsed < 1.0,
           f"max rel error {worst:.2e} over 100 draws in {elapsed:.3f}s")


@pytest.mark.parametrize("s", [1 / 1.96, 1.0, 2.0], ids=["hec", "newtonian", "thickening"])
def test_04_steadiness(report, s):
    grid = Grid(128, 10.0)
    mp = ModelParams.from_components(1.0, 1.0, 1.0)
    u = equilibrium_velocity(1.0, s, 1.0, mp.g1).ubar_eq
    st0 = FilmState(np.ones(128), np.full(128, u))
    t0 = time.perf_counter()
    out = integrate(st0, StepControl(10.0), grid, FilmModel("power_law_ubar", mp, PowerLaw(s)))
    elapsed = time.perf_counter() - t0
    drift = max(np.max(np.abs(out.eta - st0.eta)), np.max(np.abs(out.vel - st0.vel)))
    report(4, f"steadiness s={s:.4g}", drift <= 1e-8 and elapsed < 10.0 and out.time == 10.0,
           f"inf-norm drift {drift:.2e} at t={out.time} in {elapsed:.2f}s")


def test_05_mass_conservation(report):
    grid = Grid(256, 10.0)
    eta = 1.0 + 0.3 * np.exp(-((grid.x - 5.0) ** 2))
    model = FilmModel("power_law_ubar", ModelParams.from_components(1.0, 0.5, 1.0), Newtonian())
    t0 = time.perf_counter()
    out = integrate(FilmState(eta, np.zeros(256)), StepControl(5.0), grid, model)
    elapsed = time.perf_counter() - t0
    drift = abs(out.eta.sum() - eta.sum()) / eta.sum()
    report(5, "mass conservation", drift <= 1e-10 and elapsed < 30.0,
           f"relative mass drift {drift:.2e} at t={out.time} in {elapsed:.2f}s")


def test_06_series_round_trip(report):
    ratios = {}
    for s in (0.6, 1.0, 2.0):
        res = []
        for g in (0.1, 0.05):
            mp = ModelParams(re=1.0, gamma=g)
            u = mean_velocity(1.1, 0.9, mp, s, 1.0)
            res.append(abs(invert_mean_velocity(1.1, u, mp, s, 1.0) - 0.9))
        ratios[s] = res[0] / res[1]
    ok = all(6.0 <= r <= 10.0 for r in ratios.values())
    report(6, "series round-trip", ok, "ratios " + ", ".join(f"s={s}: {r:.3f}" for s, r in ratios.items()))


def _manufactured_error(n):
    """Inf-norm error of the assembled tendencies on a smooth periodic state."""
    L, s, c = 10.0, 1.5, 1.0
    grid = Grid(n, L)
    k = 2 * np.pi / L
    x = grid.x
    eta, deta = 1.0 + 0.2 * np.sin(k * x), 0.2 * k * np.cos(k * x)
    u, du = 0.5 + 0.1 * np.cos(k * x), -0.1 * k * np.sin(k * x)
    mp = ModelParams.from_components(1.0, 0.7, 1.0)
    _, exact_dudt = rhs_power_law(PointState(eta, u, deta, du), mp, s, c)
    exact_deta = -(deta * u + eta * du)
    got_deta, got_dudt = assemble_rhs(FilmState(eta, u), grid, FilmModel("power_law_ubar", mp, PowerLaw(s, c)))
    return max(np.max(np.abs(got_deta - exact_deta)), np.max(np.abs(got_dudt - exact_dudt)))


def test_07_spatial_convergence(report):
    t0 = time.perf_counter()
    e128, e256 = _manufactured_error(128), _manufactured_error(256)
    elapsed = time.perf_counter() - t0
    ratio = e128 / e256
    report(7, "spatial convergence", 3.5 <= ratio <= 4.5 and elapsed < 5.0,
           f"errors {e128:.3e} -> {e256:.3e}, ratio {ratio:.3f} in {elapsed:.3f}s")


def test_08_lubrication_limit(report):
    grid = Grid(128, 10.0)
    eta = 1.0 + 0.1 * np.exp(-((grid.x - 5.0) ** 2))
    mp = ModelParams.from_components(1e-3, 1.0, 1.0)
    model = FilmModel("power_law_ubar", mp, Newtonian(), implicit_drag=True)
    t0 = time.perf_counter()
    out = integrate(FilmState(eta, np.zeros(128)), StepControl(1.0), grid, model)
    elapsed = time.perf_counter() - t0
    lub = lubrication_velocity(out.eta, gradient(out.eta, grid), 1.0, 1.0, mp.g1, mp.g2)
    worst = np.max(np.abs(out.vel - lub) / np.abs(lub))
    report(8, "lubrication limit", worst <= 0.01 and elapsed < 60.0,
           f"max pointwise rel diff {worst:.2e} at t={out.time} in {elapsed:.2f}s")


PRECURSOR = 1e-3
SPREAD_TIMES = 10.8 * np.arange(1, 11)


def _barenblatt(x, tau):
    """Self-similar solution of d_t h = d_x(h^3 d_x h) / 3 centred at x = 0."""
    return tau**-0.2 * np.maximum(1.0 - 3.0 / 40.0 * x**2 * tau**-0.4, 0.0) ** (1.0 / 3.0)


def _half_width(x, eta):
    level = PRECURSOR + 0.2 * (eta.max() - PRECURSOR)
    above = np.nonzero(eta > level)[0]
    i, j = above[0], above[-1]
    left = x[i - 1] + (level - eta[i - 1]) * (x[i] - x[i - 1]) / (eta[i] - eta[i - 1])
    right = x[j] + (level - eta[j]) * (x[j + 1] - x[j]) / (eta[j + 1] - eta[j])
    return 0.5 * (right - left)


def _fit_exponent(widths):
    tau = 1.0 + SPREAD_TIMES / 12.0
    return np.polyfit(np.log(tau), np.log(widths), 1)[0]


def _oracle_widths(grid, eta0):
    """Independent finite-volume solution of the Newtonian lubrication equation."""
    dx = grid.dx

    def rhs(_, h):
        hf = 0.5 * (h[1:] + h[:-1])
        flux = np.zeros(h.size + 1)
        flux[1:-1] = hf**3 * np.diff(h) / dx / 3.0
        return np.diff(flux) / dx

    sol = solve_ivp(rhs, (0.0, SPREAD_TIMES[-1]), eta0, method="BDF", t_eval=SPREAD_TIMES, rtol=1e-8, atol=1e-11)
    return np.array([_half_width(grid.x, sol.y[:, i]) for i in range(SPREAD_TIMES.size)])


def test_09_newtonian_spreading(report):
    grid = Grid(128, 16.0, "wall")
    eta0 = PRECURSOR + _barenblatt(grid.x - 8.0, 1.0)
    model = FilmModel("power_law_ubar", ModelParams.from_components(1e-3, 0.0, 1.0), Newtonian(), implicit_drag=True)
    widths = []
    t0 = time.perf_counter()
    integrate(
        FilmState(eta0, np.zeros(grid.n)),
        StepControl(SPREAD_TIMES[-1], output_every=10.8, dt_max=0.5),
        grid,
        model,
        observer=lambda t, s, d: widths.append(_half_width(grid.x, s.eta)) if t > 0 else None,
    )
    oracle = _oracle_widths(grid, eta0)
    elapsed = time.perf_counter() - t0
    exponent, oracle_exponent = _fit_exponent(widths), _fit_exponent(oracle)
    mismatch = np.max(np.abs(np.array(widths) / oracle - 1))
    ok = abs(exponent - 0.2) <= 0.02 and abs(oracle_exponent - 0.2) <= 0.02 and mismatch <= 0.02 and elapsed < 60.0
    report(9, "Newtonian spreading", ok,
           f"exponent {exponent:.4f} (oracle {oracle_exponent:.4f}), width mismatch {mismatch:.2e} in {elapsed:.2f}s")


def _reflect(state):
    return FilmState(state.eta[::-1].copy(), -state.vel[::-1], state.time)


@pytest.mark.parametrize("family", ["power_law_ubar", "eta_E", "general", "lubrication"])
@pytest.mark.parametrize("bc", ["periodic", "wall", "outflow"])
@pytest.mark.parametrize("scheme", ["central", "upwind"])
def test_10_reflection_symmetry(report, family, bc, scheme):
    rng = np.random.default_rng(7)
    grid = Grid(48, 6.0, bc)
    eta = 1.0 + 0.3 * rng.random(48)
    vel = 0.4 * rng.normal(size=48)
    if family == "lubrication":
        vel = np.zeros(48)
    mp = ModelParams.from_components(1.3, 0.8, 0.9)
    rheo = PowerLaw(1.4, 1.2)
    model = FilmModel(family, mp, rheo, scheme)
    mirror = FilmModel(family, mp.reflected(), rheo, scheme)
    ctl = StepControl(1.0)
    st0 = FilmState(eta, vel)
    if family == "lubrication":
        st0.vel = model.closure(eta, grid)
    dt = 0.5 * stable_dt(st0, grid, model, ctl)
    t0 = time.perf_counter()
    a, _ = step(st0, dt, grid, model, ctl)
    b, _ = step(_reflect(st0), dt, grid, mirror, ctl)
    elapsed = time.perf_counter() - t0
    rb = _reflect(b)
    err = max(np.max(np.abs(a.eta - rb.eta)), np.max(np.abs(a.vel - rb.vel)))
    report(10, f"reflection {family}/{bc}/{scheme}", err <= 1e-13 and elapsed < 1.0,
           f"max abs mismatch {err:.1e} in {elapsed:.3f}s")


@pytest.mark.parametrize("s", [1 / 1.96, 1.0, 2.0], ids=["hec", "newtonian", "thickening"])
def test_11_k0_spectrum(report, s):
    eta0, c, re = 1.3, 0.8, 2.0
    mp = ModelParams.from_components(re, 0.9, 1.0)
    gr = growth_rates(0.0, eta0, s, c, mp)
    u0 = gr.ubar_eq
    k = power_law_coeffs(s)
    # d/du of -drag c (sqrt2 u / eta)^s / eta / Re at the equilibrium
    hand = -s * k.drag * c * (SQRT2 * u0 / eta0) ** s / (u0 * eta0) / re
    sigma = sorted(gr.sigma, key=abs)
    zero_err, drag_err = abs(sigma[0]), abs(sigma[1] - hand)
    report(11, f"k=0 spectrum s={s:.4g}", zero_err <= 1e-13 and drag_err <= 1e-10,
           f"|sigma_0|={zero_err:.1e}, sigma_1={sigma[1].real:.12f} vs {hand:.12f} (diff {drag_err:.1e})")
