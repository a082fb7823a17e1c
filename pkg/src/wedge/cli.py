"""Command-line front end: classify, solve, curves, sweep, simulate.

Exit codes: 0 ok, 2 bad input, 3 boundary case, 4 ill-posed for this xi,
5 ill-posed for every xi, 10 solver failure.  Numbers are written with 17
significant digits so every output reproduces the computed doubles.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import _backend
from .boundary import solve_boundaries, thresholds
from .errors import (
    BoundaryCase,
    ConfigInvalid,
    HitZero,
    IllPosedAlways,
    IllPosedForThisXi,
    InvalidParams,
    WedgeError,
)
from .ode import ToleranceOptions, integrate_curve
from .params import (
    Boundary,
    DimensionlessParams,
    MarketParams,
    classify,
    dimensionless,
    geometry,
    reduce_params,
    wellposedness,
)
from .policy import build_policy
from .simulate import SimConfig, compare, dt_study, simulate_policy
from .statics import sweep_drift, sweep_xi

EXIT_OK, EXIT_INPUT, EXIT_BOUNDARY, EXIT_ILLPOSED_XI, EXIT_ILLPOSED, EXIT_SOLVER = 0, 2, 3, 4, 5, 10

PARAM_KEYS = ("eps", "delta", "R", "xi", "mu", "sigma", "beta", "lam", "gamma")


def load_schema(name):
    text = resources.files("wedge").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def fmt(v):
    """Float text with 17 significant digits; None/NaN/inf become null."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def dumps(obj, indent=2, level=0):
    """JSON text with floats written by :func:`fmt`."""
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None or isinstance(obj, (bool, int, float, np.integer, np.floating)):
        return fmt(obj)
    return json.dumps(str(obj))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _floats(text):
    if text is None:
        return None
    text = text.strip()
    if not text:
        return []
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


class CliError(Exception):
    def __init__(self, code, kind, message, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_INPUT, "ConfigInvalid", f"cannot read config {path}: {exc}")
    try:
        jsonschema.validate(data, load_schema("config"))
    except jsonschema.ValidationError as exc:
        raise CliError(EXIT_INPUT, "ConfigInvalid", f"config {path}: {exc.message}")
    return data


def _settings(args):
    """Merge config file values with command-line flags (flags win)."""
    cfg = _load_config(args.config)
    for k, v in vars(args).items():
        if k in ("config", "command", "func") or v is None:
            continue
        cfg[k] = v
    return cfg


def _options(cfg):
    base = ToleranceOptions()
    return ToleranceOptions(
        rtol=cfg.get("rtol", base.rtol), atol=cfg.get("atol", base.atol),
        event_tol=cfg.get("event_tol", base.event_tol),
    )


def _shape_problems(eps, delta, R):
    out = {}
    for name, v in (("eps", eps), ("delta", delta), ("R", R)):
        if v is None:
            out[name] = "required"
        elif not math.isfinite(v):
            out[name] = "must be finite"
    if out:
        return out
    if delta <= 0:
        out["delta"] = "must be > 0"
    if R <= 0:
        out["R"] = "must be > 0"
    elif R == 1:
        out["R"] = "R = 1 (log utility) is not supported"
    return out


def _params(cfg, need_costs=True) -> DimensionlessParams:
    natural = any(cfg.get(k) is not None for k in ("mu", "sigma"))
    if natural:
        mp = MarketParams(
            mu=cfg.get("mu", math.nan), sigma=cfg.get("sigma", math.nan),
            beta=cfg.get("beta", 1.0), R=cfg.get("R", math.nan),
            lam=cfg.get("lam", 0.0), gamma=cfg.get("gamma", 0.0),
        )
        if not need_costs and mp.lam + mp.gamma <= 0:
            mp = MarketParams(mp.mu, mp.sigma, mp.beta, mp.R, lam=1.0, gamma=0.0)
        return reduce_params(mp)
    eps, delta, R = cfg.get("eps"), cfg.get("delta"), cfg.get("R")
    problems = _shape_problems(eps, delta, R)
    if problems:
        raise InvalidParams(problems)
    beta = cfg.get("beta", 1.0)
    xi, lam, gamma = cfg.get("xi"), cfg.get("lam"), cfg.get("gamma", 0.0)
    if xi is None and lam is None:
        if need_costs:
            raise InvalidParams({"xi": "give xi, or lam/gamma"})
        return DimensionlessParams(eps=eps, delta=delta, R=R, xi=math.nan)
    if lam is not None:
        return dimensionless(eps, delta, R, lam=lam, gamma=gamma, beta=beta)
    return dimensionless(eps, delta, R, xi=xi, gamma=gamma, beta=beta)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args):
    cfg = _settings(args)
    d = _params(cfg, need_costs=False)
    g = geometry(d)
    label = classify(g)
    if isinstance(label, Boundary):
        raise BoundaryCase(label.which)
    wp = wellposedness(g)
    under, bar = thresholds(g, _options(cfg))
    out = {
        "eps": d.eps, "delta": d.delta, "R": d.R, "case": str(label),
        "wellposedness": wp.kind.value, "q_M": g.qM, "m_M": g.mM,
        "thresholds": {"xi_under": under, "xi_bar": bar},
    }
    sys.stdout.write(dumps(out) + "\n")
    return EXIT_OK


def wedge_record(w, spec, d):
    return {
        "case": str(w.case), "regime": str(w.regime),
        "eps": d.eps, "delta": d.delta, "R": d.R, "xi": d.xi, "lam": d.lam, "gamma": d.gamma,
        "q_star": w.q_star, "q_upper": w.q_upper, "z_star": spec.z_star, "z_upper": spec.z_upper,
        "p_star": spec.p_star, "p_upper": spec.p_upper, "Lambda": w.lambda_value,
        "xi_under": w.xi_under, "xi_bar": w.xi_bar, "A_star": spec.A_star, "A_upper": spec.A_upper,
    }


VALUE_COLUMNS = ("q", "p", "n", "m", "ell", "G", "C_coeff")


def cmd_solve(args):
    cfg = _settings(args)
    d = _params(cfg)
    w = solve_boundaries(d, _options(cfg))
    spec = build_policy(w, d)
    rec = wedge_record(w, spec, d)
    out = Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    (out / "wedge.json").write_text(dumps(rec) + "\n")
    t = spec.table
    rows = zip(t.q, t.p, t.n, t.m, t.ell, t.G, t.coef)
    (out / "value.csv").write_text(_csv_text(VALUE_COLUMNS, rows))
    sys.stdout.write(dumps(rec) + "\n")
    return EXIT_OK


CURVE_COLUMNS = ("r", "q", "n", "m", "ell", "status")


def cmd_curves(args):
    cfg = _settings(args)
    d = _params(cfg, need_costs=False)
    g = geometry(d)
    label = classify(g)
    if isinstance(label, Boundary):
        raise BoundaryCase(label.which)
    rs = cfg.get("r", [])
    if isinstance(rs, str):
        rs = _floats(rs)
    opts = _options(cfg)
    rows = []
    for r in rs:
        try:
            c = integrate_curve(float(r), g, opts)
            status = "ok"
        except HitZero as exc:
            c = getattr(exc, "curve", None)
            status = "HitZero"
            if c is None:
                rows.append((r, exc.q, 0.0, g.m(exc.q), g.ell(exc.q), status))
                continue
        except WedgeError as exc:
            rows.append((r, math.nan, math.nan, math.nan, math.nan, type(exc).__name__))
            continue
        for q, n in zip(c.q, c.n):
            rows.append((r, q, n, g.m(q), g.ell(q), status))
    _write(cfg.get("out"), _csv_text(CURVE_COLUMNS, rows))
    return EXIT_OK


SWEEP_COLUMNS = ("value", "status", "case", "wellposedness", "q_star", "q_upper", "p_star",
                 "p_upper", "z_star", "z_upper", "Lambda", "regime")


def cmd_sweep(args):
    cfg = _settings(args)
    axis = cfg.get("axis", "xi")
    grid = cfg.get("grid")
    if isinstance(grid, str):
        grid = _floats(grid)
    if grid is None:
        raise InvalidParams({"grid": "required"})
    opts = _options(cfg)
    if axis == "xi":
        d = _params(cfg, need_costs=False)
        res = sweep_xi(d, grid, gamma=cfg.get("gamma", 0.0), opts=opts)
    else:
        if cfg.get("eps") is None and cfg.get("mu") is None:
            cfg = dict(cfg, eps=1.0)  # placeholder; drift comes from the grid
        d = _params(cfg)
        res = sweep_drift(d, grid, opts=opts)
    rows = [tuple(getattr(r, c) for c in SWEEP_COLUMNS) for r in res.rows]
    _write(cfg.get("out"), _csv_text(SWEEP_COLUMNS, rows))
    for note in res.notes:
        sys.stderr.write(note + "\n")
    return EXIT_OK


def cmd_simulate(args):
    cfg = _settings(args)
    d = _params(cfg)
    if d.original is None:
        raise InvalidParams({"mu": "simulation needs natural parameters"})
    w = solve_boundaries(d, _options(cfg))
    spec = build_policy(w, d)
    if cfg.get("x0") is None and cfg.get("y0") is None:
        mid = 0.5 * (spec.p_star + spec.p_upper)
        cfg = dict(cfg, x0=1.0 - mid, y0=mid)
    sc = SimConfig(
        paths=int(cfg.get("paths", 10_000)), dt=float(cfg.get("dt", 1e-3)),
        horizon=float(cfg.get("horizon", 40.0)), seed=int(cfg.get("seed", 20240607)),
        x0=float(cfg.get("x0", 0.0)), y0=float(cfg.get("y0", 0.0)),
    )
    res = simulate_policy(spec, d, sc)
    study = None
    out = {"result": res.summary()}
    if cfg.get("dt_study"):
        study = dt_study(spec, d, sc)
        out["dt_study"] = {
            "dts": list(study.dts), "means": list(study.means),
            "std_errors": list(study.std_errors), "biases": list(study.biases),
            "increments": list(study.increments),
            "increment_std_errors": list(study.increment_std_errors),
            "extrapolated": study.extrapolated, "extrapolated_z": study.extrapolated_z,
            "trend": str(study.trend), "raw_trend": str(study.raw_trend),
        }
    v = compare(res, study)
    out["verdict"] = {"passed": v.passed, "z_score": v.z_score, "within_noise": v.within_noise,
                      "trend": v.trend, "raw_trend": v.raw_trend}
    _write(cfg.get("out"), dumps(out) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_params(p, costs=True):
    g = p.add_argument_group("parameters (reduced or natural units)")
    g.add_argument("--eps", type=float, help="drift over discount rate, mu/beta")
    g.add_argument("--delta", type=float, help="volatility over sqrt(beta)")
    g.add_argument("--R", type=float, help="relative risk aversion (> 0, != 1)")
    g.add_argument("--mu", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--beta", type=float)
    if costs:
        g.add_argument("--xi", type=float, help="round-trip cost (lam+gamma)/(1-gamma)")
        g.add_argument("--lam", type=float, help="cost on purchases")
        g.add_argument("--gamma", type=float, help="cost on sales")
    p.add_argument("--config", help="JSON file with defaults for any flag")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="wedge",
        description="Optimal consumption and investment with proportional transaction costs.",
    )
    ap.add_argument("--version", action="store_true", help="print backend and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("classify", help="case label, well-posedness and thresholds")
    _add_params(p, costs=False)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="solve the wedge; writes wedge.json and value.csv")
    _add_params(p)
    p.add_argument("--out", help="output directory (default: current)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curves", help="candidate curves n_r as long-format CSV")
    _add_params(p, costs=False)
    p.add_argument("--r", help="comma-separated start points")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("sweep", help="re-solve across a grid of xi or eps")
    _add_params(p)
    p.add_argument("--axis", choices=("xi", "eps"))
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo check of the value function")
    _add_params(p)
    p.add_argument("--paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--x0", type=float, help="initial cash (default: wedge midpoint, W = 1)")
    p.add_argument("--y0", type=float, help="initial risky holding")
    p.add_argument("--dt-study", dest="dt_study", action="store_true", default=None,
                   help="also run the dt-halving bias study")
    p.add_argument("--out", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_simulate)
    return ap


def _fail(code, kind, message, **extra):
    sys.stderr.write(f"wedge: {message}\n")
    rec = {"error": kind, "message": message, "exit_code": code}
    rec.update(extra)
    sys.stdout.write(dumps(rec) + "\n")
    return code


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.version:
        sys.stdout.write(f"wedge backend: {_backend.NAME}\n")
        return EXIT_OK
    if args.command is None:
        ap.print_help()
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, exc.kind, str(exc), **exc.extra)
    except (InvalidParams, ConfigInvalid) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except BoundaryCase as exc:
        return _fail(EXIT_BOUNDARY, "BoundaryCase", str(exc))
    except IllPosedForThisXi as exc:
        return _fail(EXIT_ILLPOSED_XI, "IllPosedForThisXi", str(exc), xi_under=exc.xi_under)
    except IllPosedAlways as exc:
        return _fail(EXIT_ILLPOSED, "IllPosedAlways", str(exc))
    except WedgeError as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, str(exc))
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); not an error
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
