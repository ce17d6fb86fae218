"""Scenario configuration, initial conditions and record serialization.

Configurations are TOML documents with the sections ``grid``, ``model``,
``rheology``, ``params``, ``ic`` and ``run``::

    [grid]
    n = 128
    length = 10.0
    bc = "periodic"

    [model]
    family = "power_law_ubar"

    [rheology]
    preset = "newtonian"

    [params]
    re = 1.0
    g1 = 1.0
    g2 = 1.0

    [ic]
    kind = "equilibrium_perturbed"
    eta0 = 1.0
    amplitude = 0.01

    [run]
    t_end = 10.0

Unknown keys are rejected.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis, kernels
from .discretization import ALL_FAMILIES, BOUNDARY_CONDITIONS, FLUX_SCHEMES, FilmModel, FilmState, Grid
from .discretization import diagnostics as _diagnostics
from .discretization import gradient
from .errors import ConfigError, ReofilmError
from .kernels import ETA_FLOOR, ModelParams
from .rheology import PRESETS, Newtonian, PowerLaw, Tabulated
from .stepping import StepControl

_REQUIRED = object()
_NUMBER = (int, float)

SCHEMA = {
    "grid": {"n": (int, _REQUIRED), "length": (_NUMBER, _REQUIRED), "bc": (str, "periodic")},
    "model": {
        "family": (str, _REQUIRED),
        "gamma": (_NUMBER, 1.0),
        "flux_scheme": (str, "central"),
        "implicit_drag": (bool, False),
    },
    "rheology": {
        "preset": (str, None),
        "type": (str, None),
        "s": (_NUMBER, None),
        "cs": (_NUMBER, None),
        "table": (list, None),
    },
    "params": {
        "re": (_NUMBER, _REQUIRED),
        "gr": (_NUMBER, None),
        "g_hat1": (_NUMBER, None),
        "g_hat2": (_NUMBER, None),
        "g1": (_NUMBER, None),
        "g2": (_NUMBER, None),
    },
    "ic": {
        "kind": (str, _REQUIRED),
        "eta0": (_NUMBER, 1.0),
        "u0": (_NUMBER, 0.0),
        "amplitude": (_NUMBER, 0.0),
        "width": (_NUMBER, None),
        "x0": (_NUMBER, None),
        "eta_left": (_NUMBER, None),
        "eta_right": (_NUMBER, None),
        "mode": (int, 1),
    },
    "run": {
        "t_end": (_NUMBER, _REQUIRED),
        "cfl": (_NUMBER, 0.4),
        "output_every": (_NUMBER, None),
        "dt_max": (_NUMBER, 0.05),
        "dt_min": (_NUMBER, 1e-9),
        "out_path": (str, None),
        "format": (str, "ndjson"),
    },
}

IC_KINDS = ("uniform", "gaussian_bump", "dam_break", "equilibrium_perturbed")
FORMATS = ("ndjson", "csv")


@dataclass(frozen=True)
class RunConfig:
    t_end: float
    cfl: float = 0.4
    output_every: float = None
    dt_max: float = 0.05
    dt_min: float = 1e-9
    out_path: str = None
    format: str = "ndjson"

    def control(self):
        return StepControl(
            t_end=self.t_end, cfl=self.cfl, dt_max=self.dt_max, dt_min=self.dt_min, output_every=self.output_every
        )


@dataclass(frozen=True)
class ScenarioConfig:
    grid: Grid
    family: str
    params: ModelParams
    rheology: object
    ic: dict
    run: RunConfig
    flux_scheme: str = "central"
    implicit_drag: bool = False
    raw: dict = field(default=None, compare=False, repr=False)

    def model(self):
        return FilmModel(self.family, self.params, self.rheology, self.flux_scheme, self.implicit_drag)

    def with_overrides(self, family=None, gamma=None):
        cfg = self
        if family is not None:
            _check_choice("model.family", family, ALL_FAMILIES)
            cfg = replace(cfg, family=family)
        if gamma is not None:
            try:
                cfg = replace(cfg, params=replace(cfg.params, gamma=float(gamma)))
            except ReofilmError as exc:
                raise ConfigError("model.gamma", str(exc)) from None
        _check_family_rheology(cfg.family, cfg.rheology)
        return cfg


def _check_choice(key, value, choices):
    if value not in choices:
        raise ConfigError(key, f"must be one of {list(choices)}, got {value!r}")


def _check_family_rheology(family, rheology):
    if family != "general" and not isinstance(rheology, (PowerLaw, Newtonian)):
        raise ConfigError("rheology.type", f"family {family!r} needs a power-law or Newtonian rheology")


def _validate_sections(doc):
    out = {}
    for section in doc:
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
    for section, keys in SCHEMA.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(section, "must be a table")
        for key in given:
            if key not in keys:
                raise ConfigError(f"{section}.{key}", "unknown key")
        values = {}
        for key, (kind, default) in keys.items():
            name = f"{section}.{key}"
            if key not in given:
                if default is _REQUIRED:
                    raise ConfigError(name, "missing required key")
                values[key] = default
                continue
            v = given[key]
            ok = isinstance(v, kind) and not (kind is not bool and isinstance(v, bool))
            if not ok:
                want = kind.__name__ if isinstance(kind, type) else "number"
                raise ConfigError(name, f"expected {want}, got {type(v).__name__}")
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(name, "must be finite")
            values[key] = v
        out[section] = values
    return out


def _parse_rheology(r):
    try:
        if r["preset"] is not None:
            others = [k for k in ("type", "s", "cs", "table") if r[k] is not None]
            if others:
                raise ConfigError(f"rheology.{others[0]}", "cannot be combined with rheology.preset")
            if r["preset"] not in PRESETS:
                raise ConfigError("rheology.preset", f"unknown preset {r['preset']!r}; choose from {sorted(PRESETS)}")
            return PRESETS[r["preset"]]
        kind = r["type"]
        if kind is None:
            raise ConfigError("rheology.type", "missing: give rheology.preset or rheology.type")
        if kind == "power_law":
            if r["s"] is None:
                raise ConfigError("rheology.s", "missing required key for power_law")
            if not r["s"] > 0:
                raise ConfigError("rheology.s", f"must be > 0, got {r['s']}")
            cs = 1.0 if r["cs"] is None else r["cs"]
            if not cs > 0:
                raise ConfigError("rheology.cs", f"must be > 0, got {cs}")
            return PowerLaw(float(r["s"]), float(cs))
        if kind == "newtonian":
            cs = 1.0 if r["cs"] is None else r["cs"]
            if not cs > 0:
                raise ConfigError("rheology.cs", f"must be > 0, got {cs}")
            return Newtonian(float(cs))
        if kind == "tabulated":
            if r["table"] is None:
                raise ConfigError("rheology.table", "missing required key for tabulated")
            return Tabulated(tuple(tuple(row) for row in r["table"]))
        raise ConfigError("rheology.type", f"must be power_law, newtonian or tabulated, got {kind!r}")
    except ConfigError:
        raise
    except (ReofilmError, TypeError, ValueError) as exc:
        raise ConfigError("rheology.table" if r.get("type") == "tabulated" else "rheology", str(exc)) from None


def _parse_params(p, gamma):
    polar = {k: p[k] for k in ("gr", "g_hat1", "g_hat2") if p[k] is not None}
    cart = {k: p[k] for k in ("g1", "g2") if p[k] is not None}
    try:
        if polar:
            mp = ModelParams(
                re=float(p["re"]),
                gr=float(polar.get("gr", 0.0)),
                g_hat1=float(polar.get("g_hat1", 0.0)),
                g_hat2=float(polar.get("g_hat2", 1.0)),
                gamma=float(gamma),
            )
            for key, value in cart.items():
                have = getattr(mp, key)
                if abs(have - value) > 1e-12 * max(1.0, abs(value)):
                    raise ConfigError(
                        f"params.{key}", f"over-specified gravity: {key}={value} but gr*g_hat gives {have}"
                    )
            return mp
        return ModelParams.from_components(
            float(p["re"]), float(cart.get("g1", 0.0)), float(cart.get("g2", 0.0)), gamma=float(gamma)
        )
    except ConfigError:
        raise
    except ReofilmError as exc:
        msg = str(exc)
        key = next((k for k in ("re", "gr", "gamma", "g_hat") if msg.startswith(k)), "re")
        section = "model" if key == "gamma" else "params"
        raise ConfigError(f"{section}.{key}", msg) from None


def parse_config(text):
    """Parse and validate a TOML scenario description.

    Raises :class:`ConfigError` naming the offending key for any missing,
    unknown, mistyped or out-of-range entry.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"invalid TOML: {exc}") from None
    v = _validate_sections(doc)

    g = v["grid"]
    _check_choice("grid.bc", g["bc"], BOUNDARY_CONDITIONS)
    if g["n"] < 8:
        raise ConfigError("grid.n", f"must be >= 8, got {g['n']}")
    if not g["length"] > 0:
        raise ConfigError("grid.length", f"must be > 0, got {g['length']}")
    grid = Grid(g["n"], float(g["length"]), g["bc"])

    m = v["model"]
    _check_choice("model.family", m["family"], ALL_FAMILIES)
    _check_choice("model.flux_scheme", m["flux_scheme"], FLUX_SCHEMES)
    if not 0 <= m["gamma"] <= 1:
        raise ConfigError("model.gamma", f"must lie in [0, 1], got {m['gamma']}")

    rheology = _parse_rheology(v["rheology"])
    _check_family_rheology(m["family"], rheology)
    params = _parse_params(v["params"], m["gamma"])
    if m["family"] != "lubrication" and not params.re > 0:
        raise ConfigError("params.re", "must be > 0 for inertial model families")

    ic = dict(v["ic"])
    _check_choice("ic.kind", ic["kind"], IC_KINDS)
    if ic["width"] is not None and not ic["width"] > 0:
        raise ConfigError("ic.width", f"must be > 0, got {ic['width']}")
    if ic["kind"] == "dam_break":
        for key in ("eta_left", "eta_right"):
            if ic[key] is None:
                raise ConfigError(f"ic.{key}", "missing required key for dam_break")
    if not ic["eta0"] > 0:
        raise ConfigError("ic.eta0", f"must be > 0, got {ic['eta0']}")

    r = v["run"]
    _check_choice("run.format", r["format"], FORMATS)
    for key in ("t_end",):
        if not r[key] >= 0:
            raise ConfigError(f"run.{key}", f"must be >= 0, got {r[key]}")
    if not 0 < r["cfl"] <= 1:
        raise ConfigError("run.cfl", f"must lie in (0, 1], got {r['cfl']}")
    if r["output_every"] is not None and not r["output_every"] > 0:
        raise ConfigError("run.output_every", f"must be > 0, got {r['output_every']}")
    if not 0 < r["dt_min"] < r["dt_max"]:
        raise ConfigError("run.dt_min", f"need 0 < dt_min < dt_max, got {r['dt_min']}, {r['dt_max']}")
    run = RunConfig(**{k: (float(x) if isinstance(x, int) and k != "out_path" else x) for k, x in r.items()})

    cfg = ScenarioConfig(grid, m["family"], params, rheology, ic, run, m["flux_scheme"], m["implicit_drag"], doc)
    try:
        build_initial_state(cfg)
    except ConfigError:
        raise
    except ReofilmError as exc:
        raise ConfigError("ic", str(exc)) from None
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text)


def _uniform_velocity(cfg, eta):
    """Velocity variable of a uniform equilibrium film of thickness ``eta``."""
    mp, r = cfg.params, cfg.rheology
    if cfg.family == "power_law_ubar":
        return analysis.equilibrium_velocity(eta, r.s, r.c_s, mp.g1).ubar_eq
    if cfg.family == "general":
        return analysis.equilibrium_velocity_general(eta, r, mp).ubar_eq
    if cfg.family == "eta_E":
        return analysis.equilibrium_shear(eta, r.s, r.c_s, mp)
    return float(analysis.lubrication_velocity(eta, 0.0, r.s, r.c_s, mp.g1, mp.g2))


def build_initial_state(cfg, grid=None):
    """Initial :class:`FilmState` described by ``cfg.ic``.

    The ``u0`` key is always a mean velocity; for the ``eta_E`` family it is
    converted to the shear parameter by the truncated series inversion.
    """
    grid = cfg.grid if grid is None else grid
    ic = cfg.ic
    x, L = grid.x, grid.length
    eta0 = ic["eta0"]
    x0 = L / 2 if ic["x0"] is None else ic["x0"]
    u = np.full(grid.n, float(ic["u0"]))
    kind = ic["kind"]
    if kind == "uniform":
        eta = np.full(grid.n, float(eta0))
    elif kind == "gaussian_bump":
        width = 0.1 * L if ic["width"] is None else ic["width"]
        eta = eta0 + ic["amplitude"] * np.exp(-((x - x0) ** 2) / width**2)
    elif kind == "dam_break":
        width = 5 * grid.dx if ic["width"] is None else ic["width"]
        left, right = ic["eta_left"], ic["eta_right"]
        eta = right + (left - right) * 0.5 * (1.0 - np.tanh((x - x0) / width))
    else:
        k = 2 * np.pi * ic["mode"] / L
        eta = eta0 + ic["amplitude"] * np.sin(k * x)
        u = np.full(grid.n, _uniform_velocity(cfg, eta0))
    if np.any(eta < ETA_FLOOR):
        raise ConfigError("ic.amplitude", f"initial thickness drops below ETA_FLOOR={ETA_FLOOR:g}")
    if cfg.family == "eta_E" and kind != "equilibrium_perturbed":
        r = cfg.rheology
        u = kernels.invert_mean_velocity(
            eta, u, cfg.params, r.s, r.c_s, gradient(u, grid, parity=-1), gradient(eta, grid)
        )
    elif cfg.family == "lubrication":
        u = cfg.model().closure(eta, grid)
    return FilmState(eta, u, 0.0)


@dataclass
class SimRecord:
    time: float
    eta: np.ndarray
    vel: np.ndarray
    diagnostics: dict

    @classmethod
    def from_state(cls, state, grid, dt_last=float("nan")):
        return cls(state.time, state.eta.copy(), state.vel.copy(), _diagnostics(state, grid, dt_last))


DIAGNOSTIC_KEYS = ("mass", "momentum", "max_eta", "max_abs_u", "dt_last", "dx")


def _json_float(v):
    return v if math.isfinite(v) else None


def _from_json(v):
    return float("nan") if v is None else float(v)


def _diag_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".diagnostics.csv")


class RecordWriter:
    """Streams records to disk as they are produced.

    Usable directly as an ``integrate`` observer.
    """

    def __init__(self, path, fmt="ndjson"):
        _check_choice("format", fmt, FORMATS)
        self.path = Path(path)
        self.fmt = fmt
        try:
            self._fh = open(self.path, "w", newline="", encoding="utf-8")
            if fmt == "csv":
                self._dfh = open(_diag_path(self.path), "w", newline="", encoding="utf-8")
                self._rows = csv.writer(self._fh)
                self._drows = csv.writer(self._dfh)
                self._rows.writerow(("time", "x", "eta", "vel"))
                self._drows.writerow(("time",) + DIAGNOSTIC_KEYS)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write records to {self.path}: {exc.strerror}") from None
        self.last = None

    def write(self, rec):
        self.last = rec
        if self.fmt == "ndjson":
            line = {
                "time": rec.time,
                "eta": rec.eta.tolist(),
                "vel": rec.vel.tolist(),
                "diagnostics": {k: _json_float(float(rec.diagnostics[k])) for k in DIAGNOSTIC_KEYS},
            }
            self._fh.write(json.dumps(line) + "\n")
            return
        dx = rec.diagnostics["dx"]
        t = f"{rec.time:.17g}"
        for i, (e, v) in enumerate(zip(rec.eta, rec.vel)):
            self._rows.writerow((t, f"{(i + 0.5) * dx:.17g}", f"{e:.17g}", f"{v:.17g}"))
        self._drows.writerow([t] + [f"{float(rec.diagnostics[k]):.17g}" for k in DIAGNOSTIC_KEYS])

    def __call__(self, time, state, diagnostics):
        self.write(SimRecord(time, state.eta.copy(), state.vel.copy(), dict(diagnostics)))

    def close(self):
        self._fh.close()
        if self.fmt == "csv":
            self._dfh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_records(records, path, fmt="ndjson"):
    """Write ``records`` as NDJSON, or as long-format CSV plus a diagnostics sidecar."""
    with RecordWriter(path, fmt) as w:
        for rec in records:
            w.write(rec)


def read_records(path, fmt="ndjson"):
    """Inverse of :func:`write_records`."""
    _check_choice("format", fmt, FORMATS)
    path = Path(path)
    out = []
    if fmt == "ndjson":
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                diag = {k: _from_json(v) for k, v in d["diagnostics"].items()}
                out.append(SimRecord(float(d["time"]), np.array(d["eta"], float), np.array(d["vel"], float), diag))
        return out
    with open(_diag_path(path), encoding="utf-8", newline="") as fh:
        diags = [{k: float(v) for k, v in row.items() if k != "time"} for row in csv.DictReader(fh)]
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            t, x = float(row["time"]), float(row["x"])
            # a new record starts when the time changes or x wraps back to the first cell
            if not records or records[-1][0] != t or x == records[-1][1]:
                records.append((t, x, [], []))
            records[-1][2].append(float(row["eta"]))
            records[-1][3].append(float(row["vel"]))
    if len(records) != len(diags):
        raise ValueError(f"{path}: {len(records)} records but {len(diags)} diagnostics rows")
    for (t, _, e, v), diag in zip(records, diags):
        out.append(SimRecord(t, np.array(e), np.array(v), diag))
    return out
