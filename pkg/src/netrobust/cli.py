"""Command-line front end.

Every subcommand can be driven by flags, by a JSON config file
(``--config``) or both; flags win.  Outputs carry the resolved
configuration for provenance and are written atomically.  Exit codes are
0 on success, 1 on computational errors and 2 on usage errors; errors are
reported as one JSON object per line on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from ._io import atomic_write, compact_json, fmt, to_json
from .errors import (
    BadConfig,
    BadShock,
    BadSpec,
    DimensionMismatch,
    NegativeEntry,
    NetrobustError,
    ParseError,
    PatternTooLarge,
    ZeroRow,
)

__all__ = ["RunConfig", "UsageError", "parse_args", "execute", "main"]

SCHEMA_VERSION = 1

TOPOLOGY_KEYS = ("topology", "gamma", "sigma", "lambda", "eps_feedback", "adjacency", "dl_orientation")

DEFAULTS: Dict[str, dict] = {
    "energy": {"n_grid": None, "matrix": None, "format": "json"},
    "balance": {
        "epsilon_grid": "0.1:0.9:0.1",
        "gamma_mode": "random-diagonal",
        "seeds": None,
        "n": 40,
        "rho": 0.9,
        "matrix": None,
        "format": "csv",
    },
    "tailrisk": {
        "n_grid": None,
        "dist": "gaussian",
        "samples": 100_000,
        "z": 0.5,
        "tau": 3.0,
        "z_grid": None,
        "histogram": None,
        "bins": 80,
        "format": "json",
    },
    "controller": {"mode": "half-line", "n_grid": None, "budget": 20_000, "lambda": 0.5, "format": "csv"},
    "scaling": {"n_grid": "8:256:x2", "measure": None, "seeds": None, "format": "csv"},
    "economy": {
        "action": "assess",
        "table": None,
        "dist": "logistic",
        "samples": 100_000,
        "z": 0.5,
        "tau": 3.0,
        "histogram": None,
        "bins": 80,
        "normalize": False,
        "mean_shift": 0.0,
        "n": 379,
        "mu": 0.51,
        "hub_share": 0.35,
        "n_hubs": 8,
        "format": "json",
    },
}
for _cmd in ("energy", "tailrisk", "scaling"):
    DEFAULTS[_cmd].update({k: None for k in TOPOLOGY_KEYS})
    DEFAULTS[_cmd]["dl_orientation"] = "subdiagonal"
for _cmd in DEFAULTS:
    DEFAULTS[_cmd].update({"seed": None, "out": None})

# bad input rather than a failed computation
USAGE_ERRORS = (BadConfig, BadShock, BadSpec, DimensionMismatch, NegativeEntry, ParseError, PatternTooLarge, ZeroRow)

# keys that never enter the provenance block: output locations and
# scheduling cannot change results
NON_PROVENANCE = ("threads", "out", "config", "histogram")


class UsageError(Exception):
    def __init__(self, messages):
        self.messages = [messages] if isinstance(messages, str) else list(messages)
        super().__init__("; ".join(self.messages))


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    threads: int = 1

    def provenance(self) -> dict:
        return {"subcommand": self.subcommand,
                **{k: v for k, v in sorted(self.params.items()) if k not in NON_PROVENANCE}}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _topology_flags(p):
    p.add_argument("--topology", help="network family")
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda", dest="lambda", type=float, help="platoon diagonal value")
    p.add_argument("--eps-feedback", dest="eps_feedback", type=float, help="platoon superdiagonal value")
    p.add_argument("--adjacency", help="adjacency CSV for degree-normalized networks")
    p.add_argument("--dl-orientation", dest="dl_orientation", choices=("subdiagonal", "superdiagonal"))


def _build_parser():
    sup = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=sup)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"))

    parser = _Parser(prog="netrobust", description="Robustness scaling of linear network dynamics.")
    parser.add_argument("--version", action="version", version=f"netrobust {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("energy", parents=[common], argument_default=sup, help="energy measures")
    _topology_flags(p)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--matrix", help="matrix CSV instead of a topology")

    p = sub.add_parser("balance", parents=[common], argument_default=sup, help="spectral balancing sweep")
    p.add_argument("--epsilon-grid", dest="epsilon_grid")
    p.add_argument("--gamma-mode", dest="gamma_mode")
    p.add_argument("--seeds")
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--matrix", help="balance this matrix instead of seeded Gaussian networks")

    p = sub.add_parser("tailrisk", parents=[common], argument_default=sup, help="tail-risk reports")
    _topology_flags(p)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--dist", choices=("gaussian", "logistic"))
    p.add_argument("--samples", type=float)
    p.add_argument("--z", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--z-grid", dest="z_grid")
    p.add_argument("--histogram", help="histogram CSV path")
    p.add_argument("--bins", type=int)

    p = sub.add_parser("controller", parents=[common], argument_default=sup, help="platoon controllers")
    p.add_argument("--mode", choices=("sym", "asm", "half-line", "platoon"))
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--budget", type=int)
    p.add_argument("--lambda", dest="lambda", type=float)

    p = sub.add_parser("scaling", parents=[common], argument_default=sup, help="scaling-law study")
    _topology_flags(p)
    p.add_argument("--measure")
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--seeds")

    p = sub.add_parser("economy", parents=[common], argument_default=sup, help="input-output tables")
    p.add_argument("action", nargs="?", choices=("assess", "surrogate"))
    p.add_argument("--table")
    p.add_argument("--dist", choices=("gaussian", "logistic"))
    p.add_argument("--samples", type=float)
    p.add_argument("--z", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--histogram")
    p.add_argument("--bins", type=int)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--mean-shift", dest="mean_shift", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--hub-share", dest="hub_share", type=float)
    p.add_argument("--n-hubs", dest="n_hubs", type=int)
    return parser


def _parse_seeds(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    text = str(value)
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _parse_float_grid(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    text = str(value)
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("step must be positive")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(count)]
    return [float(t) for t in text.split(",") if t.strip()]


def _parse_int_grid(value):
    from .scaling import parse_grid

    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return sorted({int(v) for v in value})
    return list(parse_grid(str(value)))


def _load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def parse_args(argv: Optional[List[str]] = None) -> RunConfig:
    """Resolve defaults, config file and flags into a validated :class:`RunConfig`."""
    ns = vars(_build_parser().parse_args(argv))
    cmd = ns.pop("subcommand", None)
    if cmd is None:
        raise UsageError("a subcommand is required")
    params = dict(DEFAULTS[cmd])
    errors = []
    if "config" in ns:
        data = _load_config(ns["config"])
        target = data.pop("subcommand", cmd)
        if target != cmd:
            errors.append(f"config is for subcommand {target!r}, not {cmd!r}")
        threads_cfg = data.pop("threads", None)
        for key in data:
            if key not in params:
                errors.append(f"unknown config key {key!r}")
        params.update({k: v for k, v in data.items() if k in params})
        if threads_cfg is not None:
            ns.setdefault("threads", threads_cfg)
    threads = ns.pop("threads", None)
    ns.pop("config", None)
    params.update({k: v for k, v in ns.items() if k in params})
    if threads is None:
        threads = os.cpu_count() or 1
    if not isinstance(threads, int) or threads < 1:
        errors.append("threads must be a positive integer")
    errors += _validate(cmd, params)
    if errors:
        raise UsageError(errors)
    return RunConfig(cmd, params, int(threads) if isinstance(threads, int) else 1)


def _validate(cmd, p):
    errs = []

    def convert(key, fn):
        try:
            p[key] = fn(p[key])
        except (ValueError, TypeError, NetrobustError) as exc:
            errs.append(f"bad {key}: {exc}")

    if "samples" in p:
        convert("samples", lambda v: _as_count(v))
    for key in ("n_grid",):
        if key in p and p[key] is not None:
            convert(key, _parse_int_grid)
    if "seeds" in p:
        convert("seeds", _parse_seeds)
    if "epsilon_grid" in p:
        convert("epsilon_grid", _parse_float_grid)
    if "z_grid" in p:
        convert("z_grid", _parse_float_grid)
    if p.get("seed") is not None and not isinstance(p["seed"], int):
        errs.append("seed must be an integer")

    stochastic = False
    if "topology" in p and cmd != "economy":
        if p["topology"] is None and not (cmd == "energy" and p.get("matrix")):
            errs.append("--topology is required")
        elif p["topology"] is not None:
            try:
                _topology_spec(p)
            except NetrobustError as exc:
                errs.append(str(exc))
            if p["topology"] == "wigner":
                stochastic = True
    if cmd in ("energy", "tailrisk") and not p.get("matrix") and not p.get("n_grid"):
        errs.append("--n-grid is required")
    if cmd == "tailrisk":
        stochastic = True
        if p["format"] != "json":
            errs.append("tailrisk writes JSON only")
        if p["z"] is None or p["z"] <= 0 or p["tau"] is None or p["tau"] <= 0:
            errs.append("z and tau must be positive")
    if cmd == "balance":
        stochastic = True
        if p["gamma_mode"] == "random":
            p["gamma_mode"] = "random-diagonal"
        if p["gamma_mode"] not in ("scaled-identity", "random-diagonal"):
            errs.append("gamma_mode must be scaled-identity or random-diagonal")
        if p["seeds"] is None and p["seed"] is not None:
            p["seeds"] = [p["seed"]]
        if not p.get("epsilon_grid") or any(not 0 < e <= 1 for e in p["epsilon_grid"]):
            errs.append("epsilon grid values must lie in (0, 1]")
        if p.get("matrix") is None and (not isinstance(p["n"], int) or p["n"] < 2):
            errs.append("n must be an integer >= 2")
        if p["rho"] is None or not 0 < p["rho"] < 1:
            errs.append("rho must lie in (0, 1)")
    if cmd == "controller":
        if p["mode"] not in ("sym", "asm", "half-line", "platoon"):
            errs.append("mode must be sym, asm, half-line or platoon")
        if not p.get("n_grid"):
            errs.append("--n-grid is required")
        if p["mode"] in ("sym", "asm"):
            stochastic = True
        if p["mode"] == "platoon" and not (0 < (p["lambda"] or 0) < 1):
            errs.append("lambda must lie in (0, 1)")
        if not isinstance(p["budget"], int) or p["budget"] < 1:
            errs.append("budget must be a positive integer")
    if cmd == "scaling":
        from .scaling import MEASURES

        if p["measure"] not in MEASURES:
            errs.append(f"--measure must be one of {', '.join(MEASURES)}")
        if p["seeds"] is None and p["seed"] is not None and p.get("topology") == "wigner":
            p["seeds"] = [p["seed"]]
    if cmd == "economy":
        stochastic = True
        if p["action"] not in ("assess", "surrogate"):
            errs.append("economy action must be assess or surrogate")
        if p["action"] == "assess" and not p["table"]:
            errs.append("--table is required for economy assess")
        if p["action"] == "assess" and p["format"] != "json":
            errs.append("economy assess writes JSON only")
        if p["action"] == "surrogate" and not p["out"]:
            errs.append("--out is required for economy surrogate")
    if "format" in p and p["format"] not in ("csv", "json"):
        errs.append("format must be csv or json")
    if stochastic and p.get("seed") is None and not p.get("seeds"):
        errs.append("--seed is required for stochastic runs")
    return errs


def _as_count(v):
    x = float(v)
    if not x.is_integer() or x < 1:
        raise ValueError(f"{v!r} is not a positive integer")
    return int(x)


def _topology_spec(p):
    from .topologies import TopologySpec

    kind = p["topology"]
    seed = p.get("seed")
    if seed is None and p.get("seeds"):
        seed = p["seeds"][0]  # run_study replaces it per seed
    return TopologySpec(
        kind=kind,
        gamma=p.get("gamma"),
        sigma=p.get("sigma"),
        seed=seed if kind == "wigner" else None,
        lambda_values=(p["lambda"],) if p.get("lambda") is not None else None,
        epsilon_values=(p["eps_feedback"],) if p.get("eps_feedback") is not None else None,
        adjacency_path=p.get("adjacency"),
        dl_orientation=p.get("dl_orientation") or "subdiagonal",
    )


# ---------------------------------------------------------------------------
# execution


def _csv_text(cfg, columns, rows, footer=None):
    buf = io.StringIO()
    buf.write(f"# netrobust schema_version={SCHEMA_VERSION} config={compact_json(cfg.provenance())}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    if footer is not None:
        buf.write(f"# fit: {compact_json(footer)}\n")
    return buf.getvalue()


def _json_text(cfg, results, **extra):
    doc = {"schema_version": SCHEMA_VERSION, "netrobust_version": __version__, "config": cfg.provenance()}
    doc.update(extra)
    doc["results"] = results
    return to_json(doc)


def _table_output(cfg, columns, rows, footer=None):
    if cfg.params.get("format") == "json":
        recs = [dict(zip(columns, r)) for r in rows]
        extra = {"fit": footer} if footer is not None else {}
        return _json_text(cfg, recs, **extra)
    return _csv_text(cfg, columns, rows, footer)


def _networks(cfg):
    from .matrix_core import read_matrix_csv
    from .topologies import network_sequence

    p = cfg.params
    if p.get("matrix"):
        return [read_matrix_csv(p["matrix"])]
    return network_sequence(_topology_spec(p), p["n_grid"])


def _run_energy(cfg):
    from .energy import energy_report

    reports = [energy_report(a).to_dict() for a in _networks(cfg)]
    if cfg.params["format"] == "csv":
        cols = list(reports[0].keys())
        return _csv_text(cfg, cols, [[r[c] for c in cols] for r in reports])
    return _json_text(cfg, reports)


def _run_balance(cfg):
    from .balancing import BalanceConfig, balancing_bound_report, balancing_sweep
    from .matrix_core import read_matrix_csv

    p = cfg.params
    cols = ["seed", "epsilon", "h2_before", "h2_after", "cap", "sigma1_before", "sigma1_after",
            "sigma1_cap", "rho_after", "rho_cap", "pass"]
    rows = []
    if p.get("matrix"):
        a = read_matrix_csv(p["matrix"])
        for seed in p["seeds"]:
            for eps in p["epsilon_grid"]:
                r = balancing_bound_report(a, BalanceConfig(epsilon=eps, gamma_mode=p["gamma_mode"], seed=seed))
                rows.append([seed, eps, r.trace_before, r.trace_after, r.trace_cap, r.sigma1_before,
                             r.sigma1_after, r.sigma1_cap, r.rho_after, r.rho_cap, r.passed])
        fraction = float(np.mean([r[3] < r[2] for r in rows]))
    else:
        sweep, fraction = balancing_sweep(p["seeds"], p["epsilon_grid"], p["n"], p["rho"], p["gamma_mode"])
        rows = [[r.seed, r.epsilon, r.h2_before, r.h2_after, r.cap, r.sigma1_before, r.sigma1_after,
                 r.sigma1_cap, r.rho_after, r.rho_cap, r.passed] for r in sweep]
    footer = {"strict_decrease_fraction": fraction, "all_pass": all(r[-1] for r in rows)}
    return _table_output(cfg, cols, rows, footer)


def _run_tailrisk(cfg):
    from .tailrisk import ShockDistribution, assess_sequence

    p = cfg.params
    nets = _networks(cfg)
    reports, verdict = assess_sequence(
        nets, p["z"], p["tau"], ShockDistribution(p["dist"]), p["samples"], p["seed"], cfg.threads,
        z_grid=p["z_grid"], histogram_bins=p["bins"] if p["histogram"] else None,
    )
    side = []
    if p["histogram"]:
        rows = []
        for r in reports:
            rows += [[r.n, *h] for h in r.histogram]
            r.histogram = None
        side.append((p["histogram"], _csv_text(cfg, ["n", "bin_center", "density", "normal_density"], rows)))
    return _json_text(cfg, [r.to_dict() for r in reports], verdict=verdict), side


def _run_controller(cfg):
    from .controllers import eval_half_line_controller, optimize_asymmetric, optimize_symmetric, platoon_energy
    from .errors import InsufficientGrid
    from .scaling import fit_values

    p = cfg.params
    rows = []
    for n in p["n_grid"]:
        if p["mode"] == "sym":
            r = optimize_symmetric(n, p["budget"], p["seed"])
        elif p["mode"] == "asm":
            r = optimize_asymmetric(n, p["budget"], p["seed"])
        elif p["mode"] == "half-line":
            r = eval_half_line_controller(n)
        else:
            e = platoon_energy(p["lambda"], n)
            if e.report is None:
                raise NetrobustError(f"platoon energy overflowed at n={n}")
            rows.append([n, e.report.h2, e.report.scaled_h2, e.report.rho])
            continue
        rows.append([n, r.h2, r.scaled_h2, r.rho_closed_loop])
    try:
        footer = fit_values([r[0] for r in rows], [r[1] for r in rows]).to_dict()
    except InsufficientGrid as exc:
        footer = {"error": str(exc)}
    return _table_output(cfg, ["n", "h2", "scaled_h2", "rho"], rows, footer)


def _run_scaling(cfg):
    from .errors import InsufficientGrid
    from .scaling import run_study

    p = cfg.params
    study = run_study(_topology_spec(p), p["n_grid"], p["measure"], p["seeds"], cfg.threads)
    rows = [list(r) for r in zip(study.n_grid, study.values, study.values_min, study.values_max)]
    try:
        footer = study.fit().to_dict()
    except InsufficientGrid as exc:
        footer = {"error": str(exc)}
    if study.failed:
        footer["failed"] = {str(k): v for k, v in study.failed.items()}
    return _table_output(cfg, ["n", "value", "value_min", "value_max"], rows, footer)


def _run_economy(cfg):
    from .economic import assess_network, load_io_csv, normalize_returns, surrogate_table
    from .matrix_core import format_float
    from .tailrisk import ShockDistribution

    p = cfg.params
    if p["action"] == "surrogate":
        t = surrogate_table(p["n"], p["mu"], p["hub_share"], p["n_hubs"], seed=p["seed"])
        lines = [f"# netrobust schema_version={SCHEMA_VERSION} config={compact_json(cfg.provenance())}",
                 "# labels: " + ",".join(t.sector_labels), f"mu={format_float(t.mu)}", f"n={t.n}"]
        lines += [",".join(format_float(v) for v in row) for row in t.A.entries]
        return "\n".join(lines) + "\n", []
    table = load_io_csv(p["table"])
    if p["normalize"]:
        table = normalize_returns(table)
    rep = assess_network(table, ShockDistribution(p["dist"]), p["samples"], p["seed"], p["z"], p["tau"],
                         cfg.threads, p["bins"], p["mean_shift"])
    side = []
    if p["histogram"]:
        side.append((p["histogram"], _csv_text(cfg, ["bin_center", "density", "normal_density"], rep.histogram)))
    rep.histogram = None
    return _json_text(cfg, rep.to_dict(), verdict=rep.verdict), side


_RUNNERS = {
    "energy": _run_energy,
    "balance": _run_balance,
    "tailrisk": _run_tailrisk,
    "controller": _run_controller,
    "scaling": _run_scaling,
    "economy": _run_economy,
}


def _emit_error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def execute(config: RunConfig) -> int:
    """Run the configured pipeline; returns the process exit code."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = _RUNNERS[config.subcommand](config)
    except NetrobustError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 2 if isinstance(exc, USAGE_ERRORS) else 1
    except (OverflowError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    except OSError as exc:
        _emit_error("IOError", f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc))
        return 2
    text, side = out if isinstance(out, tuple) else (out, [])
    try:
        for path, body in side:
            atomic_write(path, body)
        if config.params.get("out"):
            atomic_write(config.params["out"], text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        _emit_error("IOError", f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc))
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    try:
        config = parse_args(argv)
    except UsageError as exc:
        for msg in exc.messages:
            _emit_error("UsageError", msg)
        return 2
    return execute(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
