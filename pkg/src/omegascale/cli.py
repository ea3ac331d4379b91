"""Command line front end.

Each subcommand reads one JSON job description (validated against a strict
schema: unknown keys are rejected), runs the corresponding library routine,
and writes either an RFC 4180 CSV table or a single JSON object.  All
numeric cells carry 17 significant digits, and a given config produces
byte-identical output across runs.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure,
4 Monte Carlo estimate flagged as unreliable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError

from . import classical_scale as cs
from . import closed_forms as cf
from . import fluctuation as fl
from . import mc_oracle as mc
from .errors import OmegaScaleError, ConfigError
from .levy_model import BrownianDrift, CramerLundberg, Tabulated
from .omega_scale import (
    BandOmega,
    ConstantOmega,
    ExponentialOmega,
    LinearBandOmega,
    StepOmega,
    TableOmega,
    build_h_omega,
    build_w_omega,
)
from .volterra import Grid

log = logging.getLogger("omegascale")

# ---------------------------------------------------------------------------
# schemas

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}
_NUM_ARRAY = {"type": "array", "items": _NUM, "minItems": 1}


def _obj(properties, required):
    return {
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": False,
    }


_MODEL_SCHEMA = {
    "oneOf": [
        _obj({"type": {"const": "bm"}, "mu": _NUM, "sigma": _NUM},
             ["type", "mu", "sigma"]),
        _obj({"type": {"const": "cl"}, "mu": _NUM,
              "vartheta": _NUM, "rho": _NUM},
             ["type", "mu", "vartheta", "rho"]),
        _obj({"type": {"const": "table"}, "scale_csv": _STR,
              "phi_csv": _STR, "q": _NUM},
             ["type", "scale_csv", "phi_csv", "q"]),
    ]
}

_OMEGA_SCHEMA = {
    "oneOf": [
        _obj({"type": {"const": "constant"}, "q": _NUM}, ["type", "q"]),
        _obj({"type": {"const": "band"}, "p": _NUM, "q": _NUM, "a": _NUM,
              "b": _NUM}, ["type", "p", "q", "a", "b"]),
        _obj({"type": {"const": "linear_band"}, "gamma0": _NUM,
              "gamma1": _NUM, "d": _NUM}, ["type", "gamma0", "gamma1", "d"]),
        _obj({"type": {"const": "exponential"}, "varrho": _NUM, "xi": _NUM},
             ["type", "varrho", "xi"]),
        _obj({"type": {"const": "step"}, "levels": _NUM_ARRAY,
              "thresholds": {"type": "array", "items": _NUM}},
             ["type", "levels", "thresholds"]),
        _obj({"type": {"const": "table"}, "x": _NUM_ARRAY,
              "values": _NUM_ARRAY, "floor_value": _NUM},
             ["type", "x", "values"]),
    ]
}

_GRID_SCHEMA = _obj({"x_max": _NUM, "h": _NUM}, ["x_max", "h"])

_SIM_SCHEMA = _obj(
    {"dt": _NUM, "n_paths": _INT, "seed": _INT, "horizon_cap": _NUM,
     "estimator": {"enum": ["exponential_weight", "poisson_thinning"]}},
    [],
)

_SCHEMAS = {
    "scale": _obj(
        {"model": _MODEL_SCHEMA, "omega": _OMEGA_SCHEMA, "grid": _GRID_SCHEMA,
         "delta": _NUM, "q": _NUM, "with_h": {"type": "boolean"}},
        ["model", "omega", "grid"],
    ),
    "exit": _obj(
        {"model": _MODEL_SCHEMA, "omega": _OMEGA_SCHEMA,
         "kind": {"enum": ["a", "b", "one_sided_up", "one_sided_down",
                           "reflected_up", "reflected_dual"]},
         "x": _NUM, "c": _NUM, "lower": _NUM, "h": _NUM},
        ["model", "omega", "kind", "x"],
    ),
    "resolvent": _obj(
        {"model": _MODEL_SCHEMA, "omega": _OMEGA_SCHEMA,
         "which": {"enum": ["u", "l", "l_hat", "xi", "theta"]},
         "x": _NUM, "c": _NUM, "h": _NUM, "n_y": _INT, "y_min": _NUM,
         "max_columns": _INT, "ys": _NUM_ARRAY},
        ["model", "omega", "which", "x"],
    ),
    "occupation": _obj(
        {"model": _MODEL_SCHEMA, "p": _NUM, "q": _NUM, "a": _NUM, "b": _NUM,
         "c": _NUM, "xs": _NUM_ARRAY,
         "x_grid": _obj({"x_max": _NUM, "n": _INT}, ["x_max", "n"])},
        ["model", "p", "q", "a", "b", "c"],
    ),
    "omega-ruin": _obj(
        {"mu": _NUM, "sigma": _NUM, "gamma0": _NUM, "gamma1": _NUM, "d": _NUM,
         "xs": _NUM_ARRAY,
         "x_grid": _obj({"x_max": _NUM, "n": _INT}, ["x_max", "n"])},
        ["mu", "sigma", "gamma0", "gamma1", "d"],
    ),
    "mc-check": _obj(
        {"model": _MODEL_SCHEMA, "omega": _OMEGA_SCHEMA,
         "quantity": {"enum": ["exit_a", "exit_b", "one_sided_up",
                               "reflected_up", "reflected_dual",
                               "bankruptcy"]},
         "x": _NUM, "c": _NUM, "z": _NUM, "h": _NUM,
         "gamma0": _NUM, "gamma1": _NUM, "d": _NUM, "sim": _SIM_SCHEMA},
        ["model", "quantity", "x", "sim"],
    ),
}


# ---------------------------------------------------------------------------
# builders and formatting


def _build_model(cfg):
    kind = cfg["type"]
    if kind == "bm":
        return BrownianDrift(mu=cfg["mu"], sigma=cfg["sigma"])
    if kind == "cl":
        return CramerLundberg(mu=cfg["mu"], vartheta=cfg["vartheta"],
                              rho=cfg["rho"])
    table = cs.load_scale_table(cfg["scale_csv"], q=cfg["q"])
    phi_grid, phi_values = cs.load_phi_table(cfg["phi_csv"])
    return Tabulated(scale_table=table, phi_grid=phi_grid,
                     phi_values=phi_values)


def _build_omega(cfg):
    kind = cfg["type"]
    if kind == "constant":
        return ConstantOmega(q=cfg["q"])
    if kind == "band":
        return BandOmega(p=cfg["p"], q=cfg["q"], a=cfg["a"], b=cfg["b"])
    if kind == "linear_band":
        return LinearBandOmega(gamma0=cfg["gamma0"], gamma1=cfg["gamma1"],
                               d=cfg["d"])
    if kind == "exponential":
        return ExponentialOmega(varrho=cfg["varrho"], xi=cfg["xi"])
    if kind == "step":
        return StepOmega(levels=tuple(cfg["levels"]),
                         thresholds=tuple(cfg["thresholds"]))
    return TableOmega(x=tuple(cfg["x"]), values=tuple(cfg["values"]),
                      floor_value=cfg.get("floor_value"))


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else _fmt(cell)
                         for cell in row])
    return buf.getvalue()


def _json_text(pairs) -> str:
    parts = []
    for key, value in pairs:
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, int):
            rendered = str(value)
        elif isinstance(value, float):
            rendered = _fmt(value)
        else:
            rendered = json.dumps(value)
        parts.append(f"{json.dumps(key)}: {rendered}")
    return "{" + ", ".join(parts) + "}\n"


def _xs_from(cfg, default_max=2.0, default_n=101):
    if "xs" in cfg:
        return np.asarray(cfg["xs"], dtype=float)
    if "x_grid" in cfg:
        g = cfg["x_grid"]
        return np.linspace(0.0, g["x_max"], g["n"])
    return np.linspace(0.0, default_max, default_n)


# ---------------------------------------------------------------------------
# subcommands: each returns (output_text, flagged)


def cmd_scale(cfg):
    model = _build_model(cfg["model"])
    omega = _build_omega(cfg["omega"])
    grid = Grid(x_max=cfg["grid"]["x_max"], h=cfg["grid"]["h"])
    table = build_w_omega(model, omega, grid, delta=cfg.get("delta"))
    q_ref = cfg.get("q", table.delta)
    header = ["x", "w_q", "z_q", "w_omega", "z_omega"]
    columns = [
        table.x,
        np.asarray(cs.w_q(model, q_ref, table.x)),
        np.asarray(cs.z_q(model, q_ref, table.x)),
        table.w,
        table.z,
    ]
    if cfg.get("with_h", False):
        htab = build_h_omega(model, omega, grid)
        header.append("h_omega")
        columns.append(np.asarray(htab.h_omega(table.x)))
    rows = list(zip(*columns))
    log.info("scale table: %d rows on [0, %s]", len(rows), _fmt(grid.x_max))
    return _csv_text(header, rows), False


def cmd_exit(cfg):
    model = _build_model(cfg["model"])
    omega = _build_omega(cfg["omega"])
    kind = cfg["kind"]
    x = cfg["x"]
    h = cfg.get("h", 1e-3)
    if kind == "one_sided_down":
        res = fl.one_sided_down(model, omega, x, h=h)
        return _json_text([
            ("kind", kind), ("x", float(x)),
            ("survive", res.survive), ("ruin", res.ruin),
            ("c_used", res.c_used),
        ]), False
    if "c" not in cfg:
        raise ConfigError(f"exit kind {kind!r} needs an upper level c")
    c = cfg["c"]
    if kind == "a":
        value = fl.exit_a(model, omega, x, c, lower=cfg.get("lower", 0.0), h=h)
    elif kind == "b":
        value = fl.exit_b(model, omega, x, c, lower=cfg.get("lower", 0.0), h=h)
    elif kind == "one_sided_up":
        value = fl.one_sided_up(model, omega, x, c, h=h)
    elif kind == "reflected_up":
        value = fl.reflected_up(model, omega, x, c, h=h)
    else:
        value = fl.reflected_dual(model, omega, x, c, h=h)
    return _json_text([
        ("kind", kind), ("x", float(x)), ("c", float(c)), ("value", value),
    ]), False


def cmd_resolvent(cfg):
    model = _build_model(cfg["model"])
    omega = _build_omega(cfg["omega"])
    which = cfg["which"]
    x = cfg["x"]
    kwargs = {"h": cfg.get("h", 1e-3)}
    if "ys" in cfg:
        kwargs["ys"] = np.asarray(cfg["ys"], dtype=float)
    if "n_y" in cfg:
        kwargs["n_y"] = cfg["n_y"]
    if "max_columns" in cfg:
        kwargs["max_columns"] = cfg["max_columns"]
    if which == "theta":
        if "y_min" in cfg:
            kwargs["y_min"] = cfg["y_min"]
        density = fl.resolvent_theta(model, omega, x, **kwargs)
    else:
        if "c" not in cfg:
            raise ConfigError(f"resolvent {which!r} needs an upper level c")
        c = cfg["c"]
        if which == "u":
            density = fl.resolvent_u(model, omega, x, c, **kwargs)
        elif which == "l":
            density = fl.resolvent_l(model, omega, x, c, **kwargs)
        elif which == "l_hat":
            density = fl.resolvent_l_hat(model, omega, x, c, **kwargs)
        else:
            if "y_min" in cfg:
                kwargs["y_min"] = cfg["y_min"]
            density = fl.resolvent_xi(model, omega, x, c, **kwargs)
    rows = [("density", y, v) for y, v in zip(density.y, density.values)]
    if density.atom is not None:
        rows.append(("atom", density.atom[0], density.atom[1]))
    log.info("resolvent %s: %d grid points, total mass %s",
             which, density.y.size, _fmt(density.mass()))
    return _csv_text(["kind", "y", "value"], rows), False


def cmd_occupation(cfg):
    """Two-sided exit transforms of the time spent in a band, tabulated in
    the start point via the exact composite forms."""
    model = _build_model(cfg["model"])
    p, q, a, b, c = (cfg[k] for k in ("p", "q", "a", "b", "c"))
    wmix = cf.band_w_composite_mix(model, p, q, a, b)
    zmix = cf.band_z_composite_mix(model, p, q, a, b)
    xs = _xs_from(cfg, default_max=c)
    if np.any(xs > c) or np.any(xs < 0.0):
        raise ConfigError("start points must sit inside [0, c]")
    wc, zc = float(wmix(c)), float(zmix(c))
    rows = []
    for x in xs:
        wx, zx = float(wmix(x)), float(zmix(x))
        rows.append((x, wx / wc, zx - wx * zc / wc))
    return _csv_text(["x", "reach_upper", "pass_lower"], rows), False


def cmd_omega_ruin(cfg):
    sol = cf.OmegaModelSolution(cfg["gamma0"], cfg["gamma1"], cfg["d"],
                                cfg["mu"], cfg["sigma"])
    xs = _xs_from(cfg)
    rows = [(x, sol.varphi(float(x))) for x in xs]
    return _csv_text(["x", "bankruptcy"], rows), False


def cmd_mc_check(cfg):
    model = _build_model(cfg["model"])
    omega = _build_omega(cfg["omega"]) if "omega" in cfg else None
    quantity = cfg["quantity"]
    x = cfg["x"]
    h = cfg.get("h", 1e-3)
    sim = cfg.get("sim", {})
    sim_cfg = mc.SimConfig(
        model=model,
        omega=omega if omega is not None else ConstantOmega(q=0.0),
        dt=sim.get("dt", 1e-3),
        n_paths=sim.get("n_paths", 100_000),
        seed=sim.get("seed", 1),
        horizon_cap=sim.get("horizon_cap", 1e3),
        estimator=sim.get("estimator", "exponential_weight"),
    )

    if quantity == "bankruptcy":
        for key in ("gamma0", "gamma1", "d"):
            if key not in cfg:
                raise ConfigError("bankruptcy check needs gamma0, gamma1, d")
        if not isinstance(model, BrownianDrift):
            raise ConfigError("the bankruptcy model is Brownian")
        formula = cf.omega_model_bankruptcy(
            cfg["gamma0"], cfg["gamma1"], cfg["d"], model.mu, model.sigma, x)
        est = mc.simulate_bankruptcy(sim_cfg, cfg["gamma0"], cfg["gamma1"],
                                     cfg["d"], x)
    else:
        if omega is None:
            raise ConfigError(f"{quantity} check needs an omega specification")
        if "c" not in cfg:
            raise ConfigError(f"{quantity} check needs an upper level c")
        c = cfg["c"]
        if quantity in ("exit_a", "exit_b"):
            z = cfg.get("z", 0.0)
            formula = (fl.exit_a if quantity == "exit_a" else fl.exit_b)(
                model, omega, x, c, lower=z, h=h)
            est_a, est_b = mc.simulate_exit(sim_cfg, x, c, z)
            est = est_a if quantity == "exit_a" else est_b
        elif quantity == "one_sided_up":
            formula = fl.one_sided_up(model, omega, x, c, h=h)
            est = mc.simulate_one_sided_up(sim_cfg, x, c)
        elif quantity == "reflected_up":
            formula = fl.reflected_up(model, omega, x, c, h=h)
            est = mc.simulate_reflected(sim_cfg, x, c, dual=False)
        else:
            formula = fl.reflected_dual(model, omega, x, c, h=h)
            est = mc.simulate_reflected(sim_cfg, x, c, dual=True)

    z_score = (est.mean - formula) / max(est.stderr, 1e-300)
    print(
        f"{quantity}: formula {_fmt(formula)}, "
        f"mc {_fmt(est.mean)} +/- {_fmt(est.stderr)}, z = {z_score:.2f}",
        file=sys.stderr,
    )
    text = _json_text([
        ("quantity", quantity),
        ("formula", formula),
        ("mean", est.mean),
        ("stderr", est.stderr),
        ("z_score", z_score),
        ("n", sim_cfg.n_paths),
        ("seed", sim_cfg.seed),
        ("truncated_fraction", est.truncated_fraction),
    ])
    return text, est.flagged


_COMMANDS = {
    "scale": cmd_scale,
    "exit": cmd_exit,
    "resolvent": cmd_resolvent,
    "occupation": cmd_occupation,
    "omega-ruin": cmd_omega_ruin,
    "mc-check": cmd_mc_check,
}


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omegascale",
        description="Scale functions and exit laws under state-dependent killing",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("scale", "tabulate scale functions on a grid"),
        ("exit", "one two-sided or one-sided exit value"),
        ("resolvent", "occupation density panel"),
        ("occupation", "band occupation transforms from the exact forms"),
        ("omega-ruin", "bankruptcy probabilities for the linear-rate model"),
        ("mc-check", "compare a formula against Monte Carlo"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON job description")
        p.add_argument("--output", help="write the result here instead of stdout")
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        Draft202012Validator(_SCHEMAS[args.command]).validate(cfg)
        text, flagged = _COMMANDS[args.command](cfg)
    except (ConfigError, ValidationError, OSError, json.JSONDecodeError) as exc:
        message = getattr(exc, "message", None) or str(exc)
        print(f"config error: {message}", file=sys.stderr)
        return 2
    except OmegaScaleError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 4 if flagged else 0


if __name__ == "__main__":
    sys.exit(main())
