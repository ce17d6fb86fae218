"""Command-line interface: ``reofilm {simulate,lubrication,equilibrium,growth,verify}``.

Exit codes: 0 success, 1 configuration or argument error, 2 runtime
failure (stiffness or positivity), 3 identity check failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, kernels
from .discretization import diagnostics
from .errors import ConfigError, ReofilmError
from .kernels import ModelParams, PowerLawCoeffs
from .rheology import SQRT2, PowerLaw, evaluate_at_state
from .scenarios import SCHEMA, RecordWriter, SimRecord, _parse_rheology, build_initial_state, load_config, tomllib
from .stepping import integrate

log = logging.getLogger("reofilm")

EXIT_CONFIG, EXIT_RUNTIME, EXIT_IDENTITY = 1, 2, 3
IDENTITY_TOL = 1e-12


def _setup_logging():
    level = os.environ.get("REOFILM_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(obj):
    print(json.dumps(obj))


def _run_scenario(args, family=None):
    try:
        cfg = load_config(args.config).with_overrides(family=family or args.family, gamma=args.gamma)
        if args.gamma is not None and cfg.family in ("power_law_ubar", "lubrication"):
            log.warning("--gamma has no effect on the %s family", cfg.family)
        out = args.out or cfg.run.out_path
        if out is None:
            raise ConfigError("run.out_path", "no output path: pass --out or set run.out_path")
        fmt = args.format or cfg.run.format
        model = cfg.model()
        state0 = build_initial_state(cfg)
        control = cfg.run.control()
    except (ConfigError, ReofilmError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        writer = RecordWriter(out, fmt)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with writer:
        try:
            final = integrate(state0, control, cfg.grid, model, observer=writer)
        except ReofilmError as exc:
            snap = Path(str(out) + ".snapshot.ndjson")
            state = getattr(exc, "state", None) or state0
            with RecordWriter(snap, "ndjson") as w:
                w.write(SimRecord.from_state(state, cfg.grid))
            print(f"runtime error: {exc}; snapshot written to {snap}", file=sys.stderr)
            return EXIT_RUNTIME

    d0 = diagnostics(state0, cfg.grid)
    d = diagnostics(final, cfg.grid, writer.last.diagnostics["dt_last"] if writer.last else float("nan"))
    summary = {
        "time": final.time,
        "mass": d["mass"],
        "mass_drift": (d["mass"] - d0["mass"]) / d0["mass"],
        "max_delta_eta": float(np.max(np.abs(final.eta - state0.eta))),
        "max_delta_vel": float(np.max(np.abs(final.vel - state0.vel))),
        "max_eta": d["max_eta"],
        "max_abs_u": d["max_abs_u"],
    }
    _emit(summary)
    return 0


def cmd_simulate(args):
    return _run_scenario(args)


def cmd_lubrication(args):
    return _run_scenario(args, family="lubrication")


def cmd_equilibrium(args):
    try:
        if args.rheology_config:
            try:
                doc = tomllib.loads(Path(args.rheology_config).read_text(encoding="utf-8"))
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise ConfigError("<file>", str(exc)) from None
            rheology = _parse_rheology(_rheology_section(doc))
            mp = ModelParams.from_components(1.0, args.g1, 0.0)
            res = analysis.equilibrium_velocity_general(args.eta, rheology, mp)
        else:
            res = analysis.equilibrium_velocity(args.eta, args.s, args.cs, args.g1)
    except (ConfigError, ReofilmError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit({"ubar_eq": res.ubar_eq, "residual": res.residual, "iterations": res.iterations})
    return 0


def _rheology_section(doc):
    section = doc.get("rheology")
    if not isinstance(section, dict):
        raise ConfigError("rheology", "missing [rheology] table")
    for key in section:
        if key not in SCHEMA["rheology"]:
            raise ConfigError(f"rheology.{key}", "unknown key")
    return {k: section.get(k) for k in SCHEMA["rheology"]}


def cmd_growth(args):
    try:
        mp = ModelParams.from_components(args.re, args.g1, args.g2, gamma=args.gamma)
        gr = analysis.growth_rates(args.k, args.eta0, args.s, args.cs, mp)
    except ReofilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit({
        "k": gr.k,
        "ubar_eq": gr.ubar_eq,
        "sigma": [[float(z.real), float(z.imag)] for z in gr.sigma],
    })
    return 0


def _random_samples(n, seed, newtonian):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        s = 1.0 if newtonian else float(rng.uniform(0.3, 3.0))
        out.append((float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.01, 2.0)), s, float(rng.uniform(0.2, 3.0))))
    return out


def identity_checks(samples, coeffs=None):
    """Worst residual of every closed-form identity, keyed by check name."""
    worst = {f"reduction.{k}": v for k, v in kernels.reduction_report(samples, coeffs=coeffs).items()}

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1.0)

    contractions = {"drag": 0.0, "advection": 0.0, "slope": 0.0, "r_nu": 0.0}
    for eta, u, s, c_s in samples:
        ev = evaluate_at_state(PowerLaw(s, c_s), eta, u)
        base = 1.0 - 1.0 / s
        contractions["drag"] = max(contractions["drag"], rel(float(ev.drag_contraction()), base))
        contractions["advection"] = max(contractions["advection"], rel(float(ev.advection_contraction()), 25 * base))
        contractions["slope"] = max(contractions["slope"], rel(float(ev.slope_contraction()), base))
        contractions["r_nu"] = max(contractions["r_nu"], abs(float(ev.r_nu * (ev.nu_bar + ev.eps_bar * ev.nu_p)) - 1))
    worst.update({f"contraction.{k}": v for k, v in contractions.items()})

    k1 = (coeffs or kernels.power_law_coeffs)(1.0)
    exact = PowerLawCoeffs(71 / 48, 1 / 8, 2.5 / SQRT2, 5 / 6)
    worst["coeffs.newtonian"] = max(abs(a - b) for a, b in zip(k1, exact))
    worst["coeffs.hec_grad_eta"] = abs((coeffs or kernels.power_law_coeffs)(1 / 1.96).grad_eta + 0.005)
    return worst


def cmd_verify(args):
    if args.samples < 1:
        print("error: --samples must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    newtonian = args.rheology == "newtonian"
    samples = _random_samples(args.samples, args.seed, newtonian)
    if not newtonian:
        samples = kernels.DEFAULT_REDUCTION_SAMPLES + [
            (eta, u, s, c) for eta, u, s, _ in kernels.DEFAULT_REDUCTION_SAMPLES for c in (0.5, 2.0)
        ] + samples
    coeffs = None
    if args.perturb:
        coeffs = lambda s: kernels.power_law_coeffs(s)._replace(  # noqa: E731
            adv=kernels.power_law_coeffs(s).adv * (1 + args.perturb)
        )
    worst = identity_checks(samples, coeffs)
    failed = False
    for name, value in worst.items():
        ok = value <= IDENTITY_TOL
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name} worst={value:.3e}")
    overall = max(worst.values())
    print(f"{'PASS' if not failed else 'FAIL'} max_residual={overall:.3e} samples={len(samples)}")
    return EXIT_IDENTITY if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="reofilm", description="Thin non-Newtonian film flow models.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, helptext in (("simulate", "integrate a scenario"), ("lubrication", "integrate the Re -> 0 model")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="scenario TOML file")
        sp.add_argument("--out", help="output records path (overrides run.out_path)")
        sp.add_argument("--format", choices=("ndjson", "csv"))
        if name == "simulate":
            sp.add_argument("--family", choices=("power_law_ubar", "eta_E", "general", "lubrication"))
        sp.add_argument("--gamma", type=float)
        sp.set_defaults(func=cmd_simulate if name == "simulate" else cmd_lubrication, family=None)

    sp = sub.add_parser("equilibrium", help="uniform-film equilibrium velocity")
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--cs", type=float, default=1.0)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--g1", type=float, required=True)
    sp.add_argument("--rheology-config", help="TOML file with a [rheology] table (general model)")
    sp.set_defaults(func=cmd_equilibrium)

    sp = sub.add_parser("growth", help="linear growth rates about a uniform film")
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--eta0", type=float, required=True)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--cs", type=float, default=1.0)
    sp.add_argument("--re", type=float, required=True)
    sp.add_argument("--g1", type=float, default=0.0)
    sp.add_argument("--g2", type=float, default=0.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.set_defaults(func=cmd_growth)

    sp = sub.add_parser("verify", help="check the closed-form coefficient identities")
    sp.add_argument("--samples", type=int, default=64, help="number of random samples")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rheology", choices=("mixed", "newtonian"), default="mixed")
    sp.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
