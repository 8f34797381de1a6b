"""Command-line entry point: one subcommand per experiment, deterministic reports."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .action_entropy import ActionModel
from .collapse import (
    ToyModelSpec,
    born_statistics,
    channel_probability,
    components_from_probabilities,
    entropy_deficit_scan,
    log_odds_statistic,
    simulate_collapse,
    tanh_response,
    toy_entropies,
    toy_exact_counts,
)
from .complex_core import boundary_matrix, load_complex, to_fraction
from .errors import BranchPathError, ConfigError, InfeasibleError, InputError
from .paths import DEFAULT_PATH_CAP, enumerate_paths, incidence_matrix
from .propagator import propagate
from .weights import DEFAULT_BUDGET, WeightConfiguration, count_lattice_configs, feasible_region, null_space, weight_entropy

SUBCOMMANDS = (
    "check", "nullspace", "count", "paths", "propagate",
    "toy01", "collapse", "born", "deficit", "nonlinearity",
)
FORMATS = ("json", "csv")
SUMMARIES = {
    "check": "validate weights on a complex, or find a feasible weighting",
    "nullspace": "exact rank and null space of the boundary matrix",
    "count": "count lattice weight configurations and their entropy",
    "paths": "enumerate paths and print the incidence matrix",
    "propagate": "lattice propagator by enumeration, transfer matrix and Monte Carlo",
    "toy01": "entropies and collapse threshold of the two-branch sample model",
    "collapse": "one trajectory of the weight-exchange collapse walk",
    "born": "outcome statistics of many collapse walks against |psi_r|^2",
    "deficit": "null-space deficit of blocked against connected clusters",
    "nonlinearity": "saturating response and log-odds statistic on a grid",
}


def _floats(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip()]


def _ints(raw: str) -> list[int]:
    """Comma list with optional inclusive ranges, e.g. ``2..10`` or ``1,3,5``."""
    out: list[int] = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _number(raw: str) -> str:
    to_fraction(raw)  # validate early; kept as text so rationals stay exact
    return raw


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str


# Every tunable constant, per subcommand. Drives argparse, --dump-defaults and validation.
PARAMS: dict[str, tuple[Param, ...]] = {
    "check": (
        Param("weights", _floats, None, "override simplex weights, in column order"),
        Param("w_T", _number, None, "per-cell total weight (default: from the file)"),
    ),
    "nullspace": (
        Param("basis", bool, False, "include the basis vectors"),
    ),
    "count": (
        Param("L", _number, None, "lower weight bound (default: from the file)"),
        Param("w_T", _number, None, "per-cell total weight (default: from the file)"),
        Param("dw", _number, "1", "weight resolution"),
    ),
    "paths": (
        Param("cap", int, DEFAULT_PATH_CAP, "maximum number of paths to enumerate"),
        Param("list", bool, False, "include the path listing (json)"),
    ),
    "propagate": (
        Param("model", str, "free_particle", "free_particle or harmonic_oscillator"),
        Param("m", float, 1.0, "particle mass"),
        Param("omega", float, 0.0, "oscillator frequency"),
        Param("eps", float, 1.0, "time step"),
        Param("a", float, 1.0, "lattice spacing"),
        Param("k", float, 0.0, "entropic damping"),
        Param("hbar", float, 1.0, "phase scale (inf disables the phase)"),
        Param("w_E", float, 1.0, "ensemble weight"),
        Param("zeta", float, None, "normalization (default 1/number of paths)"),
        Param("sites", int, 5, "lattice sites"),
        Param("steps", int, 4, "time steps"),
        Param("source", int, 2, "initial site"),
        Param("sink", int, 2, "final site"),
        Param("n_samples", int, 10_000, "Monte Carlo samples (0 disables)"),
        Param("cap", int, DEFAULT_PATH_CAP, "enumeration cap"),
    ),
    "toy01": (
        Param("b", float, math.log(2), "field entropy rate, nats per step"),
        Param("L", float, 1.0, "lower weight bound"),
        Param("w_T", float, 6.0, "total weight"),
        Param("T", int, 3, "time steps"),
        Param("dw", float, 1.0, "weight resolution"),
        Param("max_run", int, 1, "layers coupled branches may disagree for"),
        Param("exact", bool, False, "also count microstates exactly"),
    ),
    "collapse": (
        Param("weights", _floats, [0.25, 0.75], "initial outcome weights"),
        Param("L_threshold", float, 0.0, "absorption threshold"),
        Param("step_scale", float, 0.02, "transfer size as a fraction of the total"),
        Param("max_steps", int, 10**6, "step limit"),
    ),
    "born": (
        Param("p", _floats, [0.25, 0.75], "outcome probabilities |psi_r|^2"),
        Param("n", int, 100_000, "trials"),
        Param("w_T", float, 1.0, "total weight"),
        Param("L_threshold", float, 0.0, "absorption threshold"),
        Param("step_scale", float, 0.02, "transfer size as a fraction of the total"),
    ),
    "deficit": (
        Param("volumes", _ints, list(range(2, 11)), "layer counts, e.g. 2..10"),
        Param("width", int, 1, "cluster width"),
    ),
    "nonlinearity": (
        Param("u0", float, 1.0, "saturation scale"),
        Param("coupling", float, 1.0, "channel coupling"),
        Param("d0", float, 0.0, "baseline log-odds"),
        Param("u_min", float, -5.0, "grid start"),
        Param("u_max", float, 5.0, "grid end"),
        Param("u_points", int, 101, "grid size"),
    ),
}
NEEDS_INPUT = {"check", "nullspace", "count", "paths"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def defaults() -> dict[str, dict[str, Any]]:
    common = {"seed": 0, "format": "json", "budget": DEFAULT_BUDGET}
    return {"common": common, **{sub: {p.name: p.default for p in ps} for sub, ps in PARAMS.items()}}


@dataclass
class RunConfig:
    subcommand: str
    parameters: dict[str, Any] = field(default_factory=dict)
    input_path: str | None = None
    format: str = "json"
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    threads: int = 1
    output_path: str | None = None

    def __post_init__(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.budget < 1 or self.threads < 1:
            raise ConfigError("budget and threads must be >= 1")
        known = {p.name for p in PARAMS[self.subcommand]}
        extra = set(self.parameters) - known
        if extra:
            raise ConfigError(f"unknown parameters for {self.subcommand}: {sorted(extra)}")
        full = {p.name: p.default for p in PARAMS[self.subcommand]}
        full.update(self.parameters)
        self.parameters = full
        if self.subcommand in NEEDS_INPUT and not self.input_path:
            raise ConfigError(f"{self.subcommand} needs --input")

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration. Thread count and output path are execution
        details that never change the result, so they are not echoed."""
        return {
            "subcommand": self.subcommand,
            "input_path": self.input_path,
            "format": self.format,
            "seed": self.seed,
            "budget": self.budget,
            "parameters": _jsonable(self.parameters),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        return cls(
            subcommand=data["subcommand"],
            parameters=_restore(data.get("parameters", {})),
            input_path=data.get("input_path"),
            format=data.get("format", "json"),
            seed=int(data.get("seed", 0)),
            budget=int(data.get("budget", DEFAULT_BUDGET)),
        )


def _jsonable(value: Any) -> Any:
    """Plain JSON types only; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, complex):
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return value


def _restore(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _restore(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_restore(v) for v in value]
    if value in ("inf", "-inf", "nan"):
        return float(value)
    return value


# -- reports -------------------------------------------------------------------------

@dataclass
class Report:
    result: dict[str, Any]
    rows: list[dict[str, Any]] | None = None
    exit_code: int = 0


def _envelope(cfg: RunConfig, result: dict[str, Any]) -> dict[str, Any]:
    return {"config": cfg.to_dict(), "seed": cfg.seed, "version": __version__, "result": result}


def render(cfg: RunConfig, report: Report) -> str:
    env = _jsonable(_envelope(cfg, report.result))
    if cfg.format == "json" or report.rows is None:
        return json.dumps(env, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    meta = {k: v for k, v in env.items() if k != "result"}
    meta["summary"] = {k: v for k, v in env["result"].items() if k != "rows"}
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    rows = _jsonable(report.rows)
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# -- subcommands -------------------------------------------------------------------------

def _cmd_check(cfg: RunConfig) -> Report:
    p = cfg.parameters
    cx = load_complex(cfg.input_path)
    if p["weights"] is not None:
        cx = cx.with_weights(p["weights"])
    w_T = to_fraction(p["w_T"]) if p["w_T"] is not None else cx.total_weight
    result: dict[str, Any] = {"simplices": len(cx.simplices), "faces": len(cx.faces)}
    if cx.weights is None:
        if w_T is None:
            raise ConfigError("no weights and no total weight: nothing to check")
        rep = feasible_region(cx, w_T=w_T)
        result.update(feasible=rep.feasible, dimension=rep.dimension, reason=rep.reason)
        if rep.witness is not None:
            result["witness"] = {k: rep.witness.values[k] for k in cx.simplex_ids}
        return Report(result, exit_code=0 if rep.feasible else InfeasibleError.exit_code)
    values = dict(zip(cx.simplex_ids, cx.weight_vector()))
    if w_T is None:
        w_T = sum(values[s] for s in cx.first_layer())
    D = boundary_matrix(cx)
    violations = WeightConfiguration(values, w_T, cx.lower_bound).violations(cx)
    result.update(
        conservation="PASS" if D.annihilates(cx.weight_vector()) else "FAIL",
        residual=D.apply(cx.weight_vector()),
        w_T=w_T,
        violations=violations,
        status="PASS" if not violations else "FAIL",
    )
    return Report(result, exit_code=0 if not violations else InfeasibleError.exit_code)


def _cmd_nullspace(cfg: RunConfig) -> Report:
    cx = load_complex(cfg.input_path)
    ns = null_space(boundary_matrix(cx))
    result: dict[str, Any] = {"rank": ns.rank, "nullity": ns.nullity, "columns": list(ns.col_ids)}
    if cfg.parameters["basis"]:
        result["basis"] = [list(v) for v in ns.basis_vectors]
    rows = [{"vector": i, **dict(zip(ns.col_ids, v))} for i, v in enumerate(ns.basis_vectors)]
    return Report(result, rows)


def _cmd_count(cfg: RunConfig) -> Report:
    p = cfg.parameters
    cx = load_complex(cfg.input_path)
    n = count_lattice_configs(cx, p["L"], p["w_T"], p["dw"], budget=cfg.budget)
    return Report({"count": n, "entropy_nats": weight_entropy(n)})


def _cmd_paths(cfg: RunConfig) -> Report:
    cx = load_complex(cfg.input_path)
    ps = enumerate_paths(cx, cap=cfg.parameters["cap"])
    A = incidence_matrix(ps)
    result: dict[str, Any] = {"count": len(ps), "A": A.to_list(), "rows": list(A.row_ids)}
    if cfg.parameters["list"]:
        result["paths"] = [list(q) for q in ps.paths]
    rows = [{"simplex": sid, **{f"p{j + 1}": int(v) for j, v in enumerate(r)}}
            for sid, r in zip(A.row_ids, A.entries.tolist())]
    return Report(result, rows)


def _cmd_propagate(cfg: RunConfig) -> Report:
    p = cfg.parameters
    if p["model"] not in ("free_particle", "harmonic_oscillator"):
        raise ConfigError("propagate supports free_particle and harmonic_oscillator")
    model = ActionModel(p["model"], m=p["m"], omega=p["omega"], eps=p["eps"], a=p["a"])
    rep = propagate(
        model, p["sites"], p["steps"], p["source"], p["sink"], k=p["k"], hbar=p["hbar"],
        n_samples=p["n_samples"], seed=cfg.seed, w_E=p["w_E"], zeta=p["zeta"], cap=p["cap"],
        threads=cfg.threads,
    )
    return Report(rep.to_dict(), rep.contributions or None)


def _cmd_toy01(cfg: RunConfig) -> Report:
    p = cfg.parameters
    spec = ToyModelSpec(p["b"], p["L"], p["w_T"], p["T"], p["dw"])
    e = toy_entropies(spec)
    result: dict[str, Any] = {
        "s_A": e.s_A,
        "s_B_weight": e.s_B_weight,
        "s_B_weight_continuum": e.s_B_weight_continuum,
        "s_B_field_bounds": list(e.s_B_field_bounds),
        "threshold": e.threshold,
        "discrete_threshold": e.discrete_threshold,
        "verdict": "collapsed favorable" if e.favorable else "uncollapsed favorable",
        "verdict_continuum": "collapsed favorable" if e.favorable_continuum else "uncollapsed favorable",
    }
    if p["exact"]:
        c = toy_exact_counts(spec, p["max_run"], budget=cfg.budget)
        result["exact"] = {
            "a_weight": c.a_weight, "a_field": c.a_field,
            "b_weight": c.b_weight, "b_field": c.b_field,
            "s_A": c.s_A, "s_B": c.s_B_weight + c.s_B_field,
        }
    return Report(result)


def _cmd_collapse(cfg: RunConfig) -> Report:
    p = cfg.parameters
    run = simulate_collapse(p["weights"], p["L_threshold"], p["step_scale"], cfg.seed, p["max_steps"])
    rows = [{"step": i, **{f"w_{r + 1}": float(v) for r, v in enumerate(w)}}
            for i, w in enumerate(run.trajectory)]
    result = {
        "outcome": None if run.outcome is None else run.outcome + 1,
        "steps": run.steps,
        "trajectory": run.trajectory.tolist(),
    }
    return Report(result, rows)


def _cmd_born(cfg: RunConfig) -> Report:
    p = cfg.parameters
    rep = born_statistics(
        components_from_probabilities(p["p"]), p["n"], seed=cfg.seed, w_T=p["w_T"],
        step_scale=p["step_scale"], L_threshold=p["L_threshold"], threads=cfg.threads,
    )
    rows = rep.rows()
    result = {"rows": rows, "n_trials": rep.n_trials, "unresolved": rep.unresolved,
              "chi2": rep.chi2, "p_value": rep.p_value}
    return Report(result, rows)


def _cmd_deficit(cfg: RunConfig) -> Report:
    p = cfg.parameters
    scan = entropy_deficit_scan(p["volumes"], p["width"])
    rows = scan.rows()
    return Report({"rows": rows, "slope": scan.slope, "intercept": scan.intercept, "r2": scan.r2}, rows)


def _cmd_nonlinearity(cfg: RunConfig) -> Report:
    p = cfg.parameters
    if p["u_points"] < 2:
        raise ConfigError("u_points must be >= 2")
    u = np.linspace(p["u_min"], p["u_max"], p["u_points"])
    P = lambda x: channel_probability(x, p["u0"], p["coupling"], p["d0"])  # noqa: E731
    D, J = log_odds_statistic(P, u)
    f = tanh_response(u, p["u0"])
    rows = [{"u": a, "f": b, "D": c, "J": d} for a, b, c, d in zip(u.tolist(), f.tolist(), D.tolist(), J.tolist())]
    return Report({"rows": rows, "max_abs_f": float(np.max(np.abs(f)))}, rows)


COMMANDS: dict[str, Callable[[RunConfig], Report]] = {
    "check": _cmd_check,
    "nullspace": _cmd_nullspace,
    "count": _cmd_count,
    "paths": _cmd_paths,
    "propagate": _cmd_propagate,
    "toy01": _cmd_toy01,
    "collapse": _cmd_collapse,
    "born": _cmd_born,
    "deficit": _cmd_deficit,
    "nonlinearity": _cmd_nonlinearity,
}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one configured experiment; returns (exit code, rendered report)."""
    report = COMMANDS[cfg.subcommand](cfg)
    return report.exit_code, render(cfg, report)


# -- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchpath",
        description="Branched-complex path ensembles, weight counting and collapse experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--dump-defaults", action="store_true", help="print every default as JSON and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="complex-description JSON file")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=FORMATS, default="json", help="report format (default: json)")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                        help=f"search-node budget for counting (default: {DEFAULT_BUDGET})")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common], help=SUMMARIES[name], description=SUMMARIES[name])
        for prm in PARAMS[name]:
            if prm.parse is bool:
                sp.add_argument(_flag(prm.name), dest=prm.name, action="store_true", help=prm.help)
            else:
                sp.add_argument(_flag(prm.name), dest=prm.name, type=prm.parse, default=prm.default,
                                help=f"{prm.help} (default: {prm.default})")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {p.name: getattr(args, p.name) for p in PARAMS[args.subcommand]}
    return RunConfig(
        subcommand=args.subcommand,
        parameters=params,
        input_path=args.input,
        format=args.format,
        seed=args.seed,
        budget=args.budget,
        threads=args.threads,
        output_path=args.output,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_defaults:
        sys.stdout.write(json.dumps(_jsonable(defaults()), indent=2, sort_keys=True) + "\n")
        return 0
    if not args.subcommand:
        parser.print_usage(sys.stderr)
        return ConfigError.exit_code
    try:
        cfg = config_from_args(args)
        code, text = run(cfg)
    except BranchPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    if cfg.output_path:
        Path(cfg.output_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code
