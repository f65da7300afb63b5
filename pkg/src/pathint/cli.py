"""Command-line front end: ``pathint <command> [flags]``.

Flags override keys of the ``--config`` JSON document, which override the
defaults. The effective configuration is echoed into every JSON report.
Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

import numpy as np

from .controlled import controlled_from_c2, pathwise_integral
from .errors import NumericalError, ValidationError
from .grid_paths import (
    DEFAULT_POINTS,
    SamplePath,
    TimeGrid,
    gen_brownian,
    gen_deterministic,
    gen_fbm,
    gen_ito_euler,
    read_path_csv,
    write_path_csv,
)
from .partitions import (
    PartitionSequence,
    dyadic_sequence,
    equidistant_sequence,
    lebesgue_sequence,
    time_control,
)
from .riemann import SCHEMA_VERSION, cauchy_report, levy_area_sum, quadratic_variation
from .rough_path import rie_check
from .roughness import RoughnessConfig, invariance_experiment, roughness_report

COMMANDS = ("generate", "integrate", "qv", "levy", "rie-check", "roughness", "invariance")
GENERATORS = ("brownian", "fbm", "ito", "linear", "circle", "zigzag", "monomial")
INTEGRANDS = ("identity", "sin", "cos", "exp")

DEFAULTS = {
    "path": None,
    "kind": "brownian",
    "dim": 1,
    "seed": 0,
    "grid_points": DEFAULT_POINTS,
    "grid_union": None,
    "t_max": 1.0,
    "hurst": 0.5,
    "x0": 1.0,
    "gamma": "0",
    "p": 2.5,
    "levels": "8:14",
    "partition": "dyadic",
    "levels_a": None,
    "partition_a": "dyadic",
    "control": "pvar",
    "epsilon": 0.1,
    "tol": 1e-3,
    "threshold": 50.0,
    "f": "identity",
    "times": None,
    "out": None,
}


# -- configuration ------------------------------------------------------------------------


def _parse_levels(text: str, name: str = "levels") -> list[int]:
    try:
        a, b = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise ValidationError(f"expected a:b, got {text!r}", name) from None
    if a < 0 or b < a:
        raise ValidationError(f"invalid level range {text!r}", name)
    return list(range(a, b + 1))


def _parse_gammas(text) -> list[float]:
    vals = [text] if isinstance(text, (int, float)) else [v for v in str(text).split(",") if v.strip()]
    try:
        out = [float(v) for v in vals]
    except ValueError:
        raise ValidationError(f"not a number list: {text!r}", "gamma") from None
    for g in out:
        if not 0.0 <= g <= 1.0:
            raise ValidationError(f"gamma = {g} outside [0, 1]", "gamma")
    return out


def _parse_partition(text: str, name: str = "partition") -> tuple[str, tuple]:
    text = str(text)
    if text in ("dyadic", "lebesgue"):
        return text, ()
    if text.startswith("equidistant:"):
        try:
            n0, k = (int(v) for v in text.split(":", 1)[1].split(","))
        except ValueError:
            raise ValidationError(f"expected equidistant:N0,k, got {text!r}", name) from None
        if n0 < 1 or k < 2:
            raise ValidationError("need N0 >= 1 and k >= 2", name)
        return "equidistant", (n0, k)
    raise ValidationError(f"unknown partition {text!r}", name)


def validate_config(cfg: dict) -> dict:
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ValidationError(f"unknown configuration keys: {sorted(unknown)}", sorted(unknown)[0])
    if cfg["kind"] not in GENERATORS:
        raise ValidationError(f"unknown kind {cfg['kind']!r}", "kind")
    if not 0.0 < float(cfg["hurst"]) < 1.0:
        raise ValidationError(f"H = {cfg['hurst']} outside (0, 1)", "hurst")
    if not 2.0 < float(cfg["p"]) < 3.0:
        raise ValidationError(f"p = {cfg['p']} outside (2, 3)", "p")
    if int(cfg["dim"]) < 1:
        raise ValidationError("must be positive", "dim")
    if int(cfg["grid_points"]) < 2:
        raise ValidationError("need at least two points", "grid_points")
    if not float(cfg["t_max"]) > 0:
        raise ValidationError("must be positive", "t_max")
    if not float(cfg["epsilon"]) > 0:
        raise ValidationError("must be positive", "epsilon")
    if not float(cfg["tol"]) > 0:
        raise ValidationError("must be positive", "tol")
    if cfg["control"] not in ("pvar", "hoelder"):
        raise ValidationError(f"unknown control {cfg['control']!r}", "control")
    if cfg["f"] not in INTEGRANDS:
        raise ValidationError(f"unknown integrand {cfg['f']!r}", "f")
    _parse_gammas(cfg["gamma"])
    _parse_levels(cfg["levels"])
    if cfg["levels_a"] is not None:
        _parse_levels(cfg["levels_a"], "levels_a")
    _parse_partition(cfg["partition"])
    _parse_partition(cfg["partition_a"], "partition_a")
    return cfg


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}", "config") from exc
        if not isinstance(doc, dict):
            raise ValidationError("config must be a flat JSON object", "config")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown configuration keys: {sorted(unknown)}", sorted(unknown)[0])
        cfg.update(doc)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return validate_config(cfg)


# -- building blocks ------------------------------------------------------------------------


def _required_counts(cfg: dict) -> list[int]:
    counts = []
    for pkey, lkey in (("partition", "levels"), ("partition_a", "levels_a")):
        kind, args = _parse_partition(cfg[pkey], pkey)
        levels = _parse_levels(cfg[lkey] or cfg["levels"], lkey)
        if kind == "dyadic":
            counts.append(2 ** max(levels))
        elif kind == "equidistant":
            counts.append(args[0] * args[1] ** max(levels))
    return counts


def build_grid(cfg: dict, with_partitions: bool = True) -> TimeGrid:
    t_max = float(cfg["t_max"])
    n_cells = int(cfg["grid_points"]) - 1
    extra = [int(v) for v in str(cfg["grid_union"]).split(",")] if cfg["grid_union"] else []
    if with_partitions:
        extra += [c for c in _required_counts(cfg) if n_cells % c]
    if extra:
        return TimeGrid.union(t_max, [n_cells] + extra)
    return TimeGrid.uniform(t_max, n_cells + 1)


def build_path(cfg: dict, with_partitions: bool = True) -> SamplePath:
    if cfg["path"]:
        return read_path_csv(cfg["path"])
    grid = build_grid(cfg, with_partitions)
    kind, dim, seed = cfg["kind"], int(cfg["dim"]), int(cfg["seed"])
    if kind == "brownian":
        return gen_brownian(grid, dim, seed)
    if kind == "fbm":
        return gen_fbm(grid, float(cfg["hurst"]), seed, dim)
    if kind == "ito":
        x0 = np.full(dim, float(cfg["x0"]))
        return gen_ito_euler(grid, lambda t, x: np.zeros_like(x), lambda t, x: np.diag(x), x0, seed)
    return gen_deterministic(kind, grid, dim)


def build_sequence(cfg: dict, X: SamplePath, which: str = "") -> PartitionSequence:
    pkey, lkey = ("partition_a", "levels_a") if which == "a" else ("partition", "levels")
    kind, args = _parse_partition(cfg[pkey], pkey)
    levels = _parse_levels(cfg[lkey] or cfg["levels"], lkey)
    if kind == "dyadic":
        return dyadic_sequence(X.grid, levels[-1], levels[0])
    if kind == "equidistant":
        n0, k = args
        return equidistant_sequence(X.grid, [n0 * k**n for n in levels], levels)
    return lebesgue_sequence(X, levels)


def _integrand(name: str, d: int):
    if name == "identity":
        return (lambda x: np.asarray(x, dtype=float)), (lambda x: np.eye(d)[None])
    funcs = {"sin": (np.sin, np.cos), "cos": (np.cos, lambda x: -np.sin(x)), "exp": (np.exp, np.exp)}
    f, df = funcs[name]
    return (lambda x: f(np.asarray(x, dtype=float))), (lambda x: np.diag(df(np.asarray(x, dtype=float)))[None])


def _control(cfg: dict, X: SamplePath):
    return "pvar" if cfg["control"] == "pvar" else time_control(X.grid)


# -- commands -------------------------------------------------------------------------------


def cmd_generate(cfg: dict) -> dict:
    X = build_path(cfg, with_partitions=False)
    if cfg["out"]:
        write_path_csv(X, cfg["out"])
    else:
        write_path_csv(X, sys.stdout)
    grid = X.grid
    print(
        f"grid: {grid.n_points} points on [0, {grid.t_max:g}], uniform={grid.is_uniform}, dim={X.dim}",
        file=sys.stderr,
    )
    return {"n_points": grid.n_points, "t_max": grid.t_max, "dim": X.dim, "uniform": grid.is_uniform}


def cmd_integrate(cfg: dict) -> dict:
    X = build_path(cfg)
    seq = build_sequence(cfg, X)
    f, df = _integrand(cfg["f"], X.dim)
    cp = controlled_from_c2(f, df, X)
    results = []
    for g in _parse_gammas(cfg["gamma"]):
        res = pathwise_integral(cp, X, seq, g, tol=float(cfg["tol"]), p=float(cfg["p"]))
        d = res.to_dict()
        d["diagnostics"] = {"rough": res.diagnostics["rough"].to_dict()}
        results.append(d)
    return {"integrand": cfg["f"], "results": results}


def _ladder(cfg: dict, fn) -> dict:
    X = build_path(cfg)
    seq = build_sequence(cfg, X)
    rep = cauchy_report([fn(X, part) for part in seq], tol=float(cfg["tol"]), labels=seq.labels)
    return rep.to_dict()


def cmd_qv(cfg: dict) -> dict:
    return _ladder(cfg, quadratic_variation)


def cmd_levy(cfg: dict) -> dict:
    return _ladder(cfg, levy_area_sum)


def cmd_rie_check(cfg: dict) -> dict:
    X = build_path(cfg)
    seq = build_sequence(cfg, X)
    reports = [
        rie_check(X, seq, g, float(cfg["p"]), _control(cfg, X), float(cfg["threshold"]), float(cfg["tol"])).to_dict()
        for g in _parse_gammas(cfg["gamma"])
    ]
    return reports[0] if len(reports) == 1 else {"reports": reports}


def _times(cfg: dict):
    return None if not cfg["times"] else [float(t) for t in str(cfg["times"]).split(",")]


def cmd_roughness(cfg: dict) -> dict:
    X = build_path(cfg)
    seq = build_sequence(cfg, X)
    rc = RoughnessConfig(float(cfg["p"]), seq, float(cfg["epsilon"]), time_control(X.grid))
    return roughness_report(X, rc, _times(cfg)).to_dict()


def cmd_invariance(cfg: dict) -> dict:
    X = build_path(cfg)
    seq_a = build_sequence(cfg, X, "a")
    seq_b = build_sequence(cfg, X)
    rep = invariance_experiment(X, seq_a, seq_b, float(cfg["p"]), float(cfg["epsilon"]), _times(cfg))
    return rep.to_dict()


HANDLERS = {
    "generate": cmd_generate,
    "integrate": cmd_integrate,
    "qv": cmd_qv,
    "levy": cmd_levy,
    "rie-check": cmd_rie_check,
    "roughness": cmd_roughness,
    "invariance": cmd_invariance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathint", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    add = parser.add_argument
    add("--config", help="flat JSON document of defaults for the flags below")
    add("--path", help="input path CSV (t,x1,...,xd); overrides the generator")
    add("--kind", help=f"generator: {', '.join(GENERATORS)}")
    add("--dim", type=int)
    add("--seed", type=int)
    add("--grid-points", dest="grid_points", type=int)
    add("--grid-union", dest="grid_union", help="extra equidistant cell counts merged into the grid, e.g. 19683")
    add("--t-max", dest="t_max", type=float)
    add("--hurst", type=float, help="Hurst parameter for --kind fbm")
    add("--x0", type=float, help="initial value for --kind ito")
    add("--gamma", help="comma separated list of γ in [0, 1]")
    add("--p", type=float)
    add("--levels", help="level range a:b")
    add("--partition", help="dyadic | equidistant:N0,k | lebesgue")
    add("--levels-a", dest="levels_a", help="levels of the first sequence (invariance)")
    add("--partition-a", dest="partition_a", help="first sequence (invariance)")
    add("--control", choices=("pvar", "hoelder"))
    add("--epsilon", type=float)
    add("--tol", type=float)
    add("--threshold", type=float, help="flag threshold for rie-check ratios")
    add("--f", help=f"integrand: {', '.join(INTEGRANDS)}")
    add("--times", help="comma separated evaluation times for roughness statistics")
    add("--out", help="output file (stdout if absent)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        body = HANDLERS[args.command](cfg)
        if args.command == "generate":
            return 0
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "config": cfg,
            **{k: v for k, v in body.items() if k != "schema_version"},
        }
        text = json.dumps(doc, indent=2, default=_json_default)
        if cfg["out"]:
            with open(cfg["out"], "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
