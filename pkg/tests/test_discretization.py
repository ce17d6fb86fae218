import numpy as np
import pytest

from reofilm.analysis import equilibrium_velocity
from reofilm.discretization import FilmModel, FilmState, Grid, assemble_rhs, diagnostics, flux_divergence, gradient
from reofilm.errors import DomainError, ThinFilmError
from reofilm.kernels import ModelParams
from reofilm.rheology import Newtonian, PowerLaw


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid(4, 1.0)
    with pytest.raises(DomainError):
        Grid(16, -1.0)
    with pytest.raises(DomainError, match="boundary"):
        Grid(16, 1.0, "open")


@pytest.mark.parametrize("bc", ["periodic", "outflow", "wall"])
def test_gradient_of_constant_is_zero(bc):
    g = Grid(32, 2.0, bc)
    np.testing.assert_array_equal(gradient(np.full(32, 3.0), g), 0.0)


def test_gradient_sine_second_order():
    errs = []
    for n in (64, 128):
        g = Grid(n, 3.0)
        k = 2 * np.pi / g.length
        errs.append(np.max(np.abs(gradient(np.sin(k * g.x), g) - k * np.cos(k * g.x))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def test_outflow_linear_exact():
    g = Grid(20, 4.0, "outflow")
    np.testing.assert_allclose(gradient(2.5 * g.x - 1.0, g), 2.5, rtol=1e-13)
    np.testing.assert_allclose(flux_divergence(g.x, g), 1.0, rtol=1e-13)


def test_periodic_divergence_sums_to_zero():
    g = Grid(64, 5.0)
    rng = np.random.default_rng(3)
    d = flux_divergence(rng.normal(size=64), g)
    assert abs(np.sum(d) * g.dx) <= 1e-13


def test_periodic_divergence_of_constant():
    g = Grid(16, 1.0)
    np.testing.assert_array_equal(flux_divergence(np.full(16, 0.3), g), 0.0)


def _model(family="power_law_ubar", g1=0.0, g2=1.0, rheology=None, **kw):
    return FilmModel(family, ModelParams.from_components(1.0, g1, g2), rheology or Newtonian(), **kw)


def test_equilibrium_rhs_vanishes():
    g = Grid(32, 4.0)
    for s in (1 / 1.96, 1.0, 2.0):
        u = equilibrium_velocity(1.0, s, 1.0, 1.0).ubar_eq
        m = _model(g1=1.0, rheology=PowerLaw(s))
        deta, dvel = assemble_rhs(FilmState(np.ones(32), np.full(32, u)), g, m)
        assert np.max(np.abs(deta)) < 1e-12
        assert np.max(np.abs(dvel)) < 1e-12


@pytest.mark.parametrize("family", ["power_law_ubar", "eta_E", "general", "lubrication"])
def test_rest_is_exactly_steady(family):
    g = Grid(16, 2.0, "wall")
    deta, dvel = assemble_rhs(FilmState(np.full(16, 0.7), np.zeros(16)), g, _model(family))
    np.testing.assert_array_equal(deta, 0.0)
    np.testing.assert_array_equal(dvel, 0.0)


def test_bump_accelerates_downhill():
    g = Grid(128, 10.0)
    eta = 1.0 + 0.3 * np.exp(-((g.x - 5.0) ** 2))
    _, dvel = assemble_rhs(FilmState(eta, np.zeros(128)), g, _model())
    slope = gradient(eta, g)
    mask = np.abs(slope) > 1e-6
    assert np.all(np.sign(dvel[mask]) == -np.sign(slope[mask]))


def test_translation_equivariance():
    g = Grid(64, 8.0)
    rng = np.random.default_rng(0)
    eta = 1.0 + 0.2 * rng.random(64)
    u = 0.3 * rng.normal(size=64)
    m = _model(g1=0.4, rheology=PowerLaw(1.5))
    d0 = assemble_rhs(FilmState(eta, u), g, m)
    d1 = assemble_rhs(FilmState(np.roll(eta, 5), np.roll(u, 5)), g, m)
    np.testing.assert_allclose(d1[0], np.roll(d0[0], 5), rtol=0, atol=1e-14)
    np.testing.assert_allclose(d1[1], np.roll(d0[1], 5), rtol=0, atol=1e-14)


@pytest.mark.parametrize("scheme", ["central", "upwind"])
@pytest.mark.parametrize("bc", ["periodic", "wall"])
def test_mass_tendency_conservative(scheme, bc):
    g = Grid(40, 4.0, bc)
    rng = np.random.default_rng(1)
    eta = 1.0 + 0.3 * rng.random(40)
    u = rng.normal(size=40)
    if bc == "wall":
        u[0] = u[-1] = 0.0
    deta, _ = assemble_rhs(FilmState(eta, u), g, _model(flux_scheme=scheme))
    assert abs(np.sum(deta)) * g.dx <= 1e-13


def test_stiff_terms_removed():
    g = Grid(16, 2.0)
    eta = 1.0 + 0.1 * np.sin(2 * np.pi * g.x / 2.0)
    st = FilmState(eta, np.full(16, 0.2))
    m = _model(g1=1.0)
    full = assemble_rhs(st, g, m)[1]
    part = assemble_rhs(st, g, m, stiff=False)[1]
    assert np.max(np.abs(full - part)) > 0.1


def test_thin_film_error_reports_cell():
    g = Grid(16, 1.0)
    eta = np.ones(16)
    eta[7] = 1e-9
    with pytest.raises(ThinFilmError) as info:
        assemble_rhs(FilmState(eta, np.zeros(16)), g, _model())
    assert info.value.index == 7


def test_model_validation():
    with pytest.raises(DomainError):
        _model(family="bogus")
    with pytest.raises(DomainError):
        _model(flux_scheme="weno")


def test_diagnostics_values():
    g = Grid(10, 5.0)
    d = diagnostics(FilmState(np.full(10, 2.0), np.full(10, -0.5)), g, 0.01)
    assert d["mass"] == pytest.approx(10.0)
    assert d["momentum"] == pytest.approx(-5.0)
    assert d["max_abs_u"] == 0.5
    assert d["dt_last"] == 0.01
