"""Command-line entry point: ``ldzeta <subcommand> [flags]``.

Every run produces a RunRecord (JSON) holding the resolved configuration,
the ladder when one is involved, a build identifier, wall time and the
results payload. The payload depends only on the configuration and seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import subprocess
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, constants, dirichlet, kernel, primes, randmodel
from .errors import ConfigError, LdzetaError
from .params import LadderConfig, build_ladder, ladder_from_cutoffs, toy_ladder

CSV_SCHEMAS = {
    "tails": ("tails/v1", ["T", "sigma", "V", "n", "hits", "p_hat", "se", "prediction", "ratio"]),
    "moments": ("moments/v1", ["T", "k", "n", "moment", "se", "scale", "ratio", "ratio_se"]),
    "mollify": ("mollify/v1", ["delta", "sigma", "estimate", "se", "bound_shape"]),
    "model": ("model-levels/v1", ["ell", "inside", "below", "above", "mean", "var", "exceed_V", "surrogate"]),
    "kernel": ("kernel-grid/v1", ["x", "h_minus", "h_plus", "D_minus_sq", "D_plus_sq"]),
    "primes": ("primes-checkpoints/v1", ["limit", "count", "largest", "sum_reciprocal", "mertens_product"]),
}


# -- helpers ----------------------------------------------------------------------------

def _build_id() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if rev.returncode == 0:
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def _load_json(text_or_path: str) -> dict:
    p = Path(text_or_path)
    raw = p.read_text() if p.exists() else text_or_path
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("JSON config must be an object")
    return data


def ladder_from_json(data: dict):
    fields = set(LadderConfig.__dataclass_fields__)
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown ladder keys: {sorted(unknown)}")
    try:
        return build_ladder(LadderConfig(**data))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _table(rows: list[dict], columns: list[str]) -> str:
    out = io.StringIO()
    widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in columns}
    out.write("  ".join(c.ljust(widths[c]) for c in columns) + "\n")
    for r in rows:
        out.write("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in columns) + "\n")
    return out.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else str(v)


def _write_csv(path: str | None, kind: str, rows: list[dict], stream=None):
    _, cols = CSV_SCHEMAS[kind]
    target = open(path, "w", newline="") if path else stream
    try:
        w = csv.DictWriter(target, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: _jsonable(r.get(c)) for c in cols})
    finally:
        if path:
            target.close()


# -- handlers -------------------------------------------------------------------------------
# each returns (results, checks, csv_rows, ladder_or_None)

def handle_tails(cfg):
    rows = []
    for T in cfg["T"]:
        for alpha in cfg["alpha"]:
            sigma = 0.5 + cfg["sigma_delta"] / math.log(T)
            V = alpha * math.log(math.log(T))
            est = dirichlet.empirical_tail(sigma, V, T, cfg["n"], cfg["seed"], cfg["workers"])
            rows.append({"T": T, "sigma": sigma, "V": V, "alpha": alpha, "n": est.n, "hits": est.hits,
                         "p_hat": est.p_hat, "se": est.std_err, "prediction": est.prediction, "ratio": est.ratio})
    return {"rows": rows}, {}, rows, None


def handle_moments(cfg):
    rows = []
    checks = {}
    for T in cfg["T"]:
        for k in cfg["k"]:
            if k == 0:
                r = {"T": T, "k": 0.0, "n": cfg["n"], "moment": 1.0, "se": 0.0, "scale": 1.0, "ratio": 1.0, "ratio_se": 0.0}
            else:
                r = dirichlet.moments_experiment(T, k, cfg["n"], cfg["seed"], cfg["workers"])
                r["C_k"] = constants.moment_constant(k)
                r["shape_constant"] = constants.moment_shape_constant(k)
                r["shape_scale"] = r["shape_constant"] * math.log(T) ** (k * k)
            rows.append(r)
            if k == 1:
                checks[f"second_moment_T{T:g}"] = bool(0.8 <= r["ratio"] <= 1.25)
    return {"rows": rows}, checks, rows, None


def _pedagogical_ladder(cfg):
    if cfg.get("ladder"):
        return ladder_from_json(cfg["ladder"])
    return ladder_from_cutoffs(cfg["T0"], cfg["cutoffs"], delta=1.0, t=math.log(math.log(cfg["T"])))


def handle_mollify(cfg):
    lad = _pedagogical_ladder(cfg)
    table = primes.PrimeTable(int(lad.cutoff(lad.L)) + 1)
    rep = dirichlet.mollification_check(lad, cfg["n"], cfg["seed"], cfg["T"], table, tuple(cfg["deltas"]), cfg["workers"])
    tau = dirichlet.sample_tau(cfg["T"], min(cfg["n"], 1000), cfg["seed"], cfg["workers"])
    resid = [dirichlet.molli_residual(tau, ell, lad, table, cfg["A"]).summary() for ell in range(1, lad.L + 1)]
    checks = {"finite": rep["finite"], "nonincreasing_in_delta": rep["nonincreasing"],
              "residual_violations_zero": all(r["violations"] == 0 for r in resid)}
    return {"mollification": rep, "residual": resid, "label": "pedagogical"}, checks, rep["rows"], lad


def handle_model(cfg):
    lad = ladder_from_json(cfg["ladder"]) if cfg.get("ladder") else toy_ladder(alpha=cfg["alpha"])
    V = cfg["V"] if cfg["V"] is not None else lad.alpha * lad.t
    est, path = randmodel.model_run(cfg["event"], lad, cfg["n"], cfg["seed"], V, cfg["backend"], workers=cfg["workers"])
    levels = randmodel.level_diagnostics(path, lad, V)
    return {"estimate": est.to_dict(), "V": V, "levels": levels}, {}, levels, lad


def handle_constants(cfg):
    cs = constants.constant_set(tuple(cfg["k"]), tuple(cfg["alpha"]))
    tails = [{"alpha": a, "delta": d, "C_alpha_delta": constants.tail_constant(a, d)}
             for a in cfg["alpha"] for d in cfg["delta"]]
    bounds = {str(k): constants.arithmetic_factor(k).truncation_bound for k in cfg["k"]}
    res = cs.to_dict()
    res["a_k_truncation_bound"] = bounds
    res["tail_constants"] = tails
    return res, {}, [], None


def handle_kernel(cfg):
    spec = kernel.KernelSpec(Delta=cfg["delta"], a=cfg["a_exp"], order=cfg["order"], family=cfg["family"])
    n = cfg["grid"]
    grid = kernel.default_grid(spec, n_core=n - n // 10, n_far=n // 10, X=cfg["x_max"])
    rep = kernel.verify_sandwich(spec, grid, X=cfg["x_max"])
    ker = kernel.cached_kernel(spec)
    res = {"sandwich": rep.to_dict(), "support": kernel.support_check(ker), "tails": kernel.tail_requirements(spec),
           "normalization_error": ker.normalization_error(), "degree": kernel.approx_degree(spec, cfg["x_max"])}
    checks = {"zero_violations": rep.total_violations == 0, "support_certified": res["support"]["certified"]}
    if spec.family == "uniform":
        res["parseval"] = kernel.parseval_check(ker)
        checks["parseval"] = res["parseval"]["passed"]
    tab = kernel.sandwich_table(spec, grid, X=cfg["x_max"])
    rows = [{"x": x, "h_minus": a, "h_plus": b, "D_minus_sq": c, "D_plus_sq": d}
            for x, a, b, c, d in zip(tab["x"], tab["h_minus"], tab["h_plus"], tab["D_minus_sq_upper"], tab["D_plus_sq_upper"])]
    return res, checks, rows, None


def handle_ladder(cfg):
    if cfg.get("ladder"):
        lad = ladder_from_json(cfg["ladder"])
    else:
        lad = build_ladder(LadderConfig(T=cfg["T"], t=cfg["t"], alpha=cfg["alpha"], delta=cfg["delta"],
                                        s_exponent=cfg["s"]))
    from .params import validation_report

    return {"ladder": lad.describe(), "validation": validation_report(lad)}, {}, [], lad


def handle_primes(cfg):
    rows = [primes.prime_stats(int(x)) for x in cfg["limit"]]
    return {"checkpoints": rows}, {}, rows, None


HANDLERS = {"tails": handle_tails, "moments": handle_moments, "mollify": handle_mollify, "model": handle_model,
            "constants": handle_constants, "kernel": handle_kernel, "ladder": handle_ladder, "primes": handle_primes}

DEFAULTS = {
    "tails": {"T": [1e5], "sigma_delta": 1.0, "alpha": [1.0], "n": 2000},
    "moments": {"T": [1e5], "k": [1.0], "n": 2000},
    "mollify": {"T": 1e5, "T0": 100.0, "cutoffs": [1000.0], "deltas": [0.5, 1.0, 2.0], "n": 500, "A": 10.0},
    "model": {"event": "gauss-tail", "V": None, "n": 10000, "backend": "gauss", "alpha": 0.2},
    "constants": {"k": [0.0, 1.0, 2.0, 3.0], "alpha": [0.5, 1.0, 2.0], "delta": [1.0]},
    "kernel": {"delta": 4.0, "a_exp": 2.5, "x_max": 2.0, "grid": 10_000, "order": 100, "family": "uniform"},
    "ladder": {"T": None, "t": None, "alpha": 1.0, "delta": 1.0, "s": None},
    "primes": {"limit": [1e3, 1e4, 1e5, 1e6, 1e7]},
}
STOCHASTIC = {"tails", "moments", "mollify", "model"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldzeta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file or inline JSON; flags override its keys")
    common.add_argument("--record", help="write the RunRecord JSON here")
    common.add_argument("--csv", help="write per-row diagnostics here")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--format", choices=["table", "json", "both"], default=None)
    sub = p.add_subparsers(dest="command", required=True)

    def stochastic(sp):
        sp.add_argument("--n", type=int)
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("tails", parents=[common], help="P(log|zeta| > V) over tau in [T, 2T]")
    sp.add_argument("--T", type=float, nargs="+")
    sp.add_argument("--sigma-delta", type=float, dest="sigma_delta")
    sp.add_argument("--V-over-loglogT", type=float, nargs="+", dest="alpha")
    sp.add_argument("--out", choices=["csv", "json"])
    stochastic(sp)

    sp = sub.add_parser("moments", parents=[common], help="E|zeta(1/2 + i tau)|^{2k}")
    sp.add_argument("--T", type=float, nargs="+")
    sp.add_argument("--k", type=float, nargs="+")
    sp.add_argument("--out", choices=["csv", "json"])
    stochastic(sp)

    sp = sub.add_parser("mollify", parents=[common], help="E|zeta M - 1|^2 and the level residual envelope")
    sp.add_argument("--T", type=float)
    sp.add_argument("--T0", type=float)
    sp.add_argument("--cutoffs", type=float, nargs="+")
    sp.add_argument("--deltas", type=float, nargs="+")
    sp.add_argument("--A", type=float)
    sp.add_argument("--ladder", help="ladder JSON (file or inline)")
    sp.add_argument("--out", choices=["csv", "json"])
    stochastic(sp)

    sp = sub.add_parser("model", parents=[common], help="random-model event probabilities")
    sp.add_argument("--event", choices=list(randmodel.EVENTS))
    sp.add_argument("--V", type=float)
    sp.add_argument("--alpha", type=float, help="alpha of the default toy ladder")
    sp.add_argument("--backend", choices=["gauss", "phase"])
    sp.add_argument("--ladder", help="ladder JSON (file or inline)")
    stochastic(sp)

    sp = sub.add_parser("constants", parents=[common], help="a_k, f_k, C_k, delta*(alpha)")
    sp.add_argument("--k", type=float, nargs="+")
    sp.add_argument("--alpha", type=float, nargs="+")
    sp.add_argument("--delta", type=float, nargs="+")

    sp = sub.add_parser("kernel", parents=[common], help="sandwich inequalities for h and D")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--a-exp", type=float, dest="a_exp")
    sp.add_argument("--x-max", type=float, dest="x_max")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--order", type=int)
    sp.add_argument("--family", choices=list(kernel.FAMILIES))

    sp = sub.add_parser("ladder", parents=[common], help="parameter schedule")
    sp.add_argument("action", choices=["describe"])
    sp.add_argument("--T", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--s", type=float, help="explicit exponent (derived when omitted)")
    sp.add_argument("--ladder", help="ladder JSON (file or inline)")

    sp = sub.add_parser("primes", parents=[common], help="prime counts and Mertens checks")
    sp.add_argument("action", choices=["stats"])
    sp.add_argument("--limit", type=float, nargs="+")
    return p


_META = {"command", "config", "record", "csv", "format", "out", "action"}


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then JSON config keys, then explicitly given flags."""
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    cfg.update({"workers": 1})
    if args.config:
        data = _load_json(args.config)
        for k, v in data.items():
            if k not in cfg and k not in ("seed", "ladder"):
                raise ConfigError(f"unknown config key {k!r} for {cmd}")
            cfg[k] = v
    for k, v in vars(args).items():
        if k in _META or v is None:
            continue
        cfg[k] = v
    if isinstance(cfg.get("ladder"), str):
        cfg["ladder"] = _load_json(cfg["ladder"])
    if cmd in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError("--seed is mandatory for stochastic runs")
    if cfg["workers"] < 1:
        raise ConfigError("--workers must be >= 1")
    return cfg


def run(args: argparse.Namespace) -> tuple[dict, list[dict]]:
    cfg = resolve_config(args)
    start = time.perf_counter()
    results, checks, rows, lad = HANDLERS[args.command](cfg)
    record = {
        "command": args.command,
        "config": {k: v for k, v in cfg.items() if k != "workers"},
        "workers": cfg["workers"],
        "ladder": None if lad is None else {"config": asdict(lad.config), "resolved": lad.describe()},
        "build": _build_id(),
        "wall_time_s": time.perf_counter() - start,
        "payload": {"results": results, "checks": checks},
    }
    if args.command in CSV_SCHEMAS:
        record["csv_schema"] = {"name": CSV_SCHEMAS[args.command][0], "columns": CSV_SCHEMAS[args.command][1]}
    return _jsonable(record), rows


def _print_table(command: str, record: dict, rows: list[dict], stream):
    res = record["payload"]["results"]
    if command == "ladder":
        lines = [("mode", res["ladder"]["mode"]), ("t", res["ladder"]["t"]), ("t0", res["ladder"]["t0"]),
                 ("L", res["ladder"]["L"]), ("s", res["ladder"]["s"]), ("sigma", res["ladder"]["sigma"])]
        for lv in res["ladder"]["levels"]:
            lines.append((f"t_{lv['ell']}", lv["t"]))
            lines.append((f"log T_{lv['ell']}", lv["log_T"]))
        w = max(len(a) for a, _ in lines)
        stream.write("".join(f"{a.ljust(w)}  {_fmt(b)}\n" for a, b in lines))
    elif command == "constants":
        ks = list(res["a_k"])
        table_rows = [{"k": k, "a_k": res["a_k"][k], "f_k": res["f_k"].get(k), "C_k": res["C_k"].get(k)} for k in ks]
        stream.write(_table(table_rows, ["k", "a_k", "f_k", "C_k"]))
        stream.write(_table([{"alpha": a, "delta_star": d} for a, d in res["delta_star"].items()], ["alpha", "delta_star"]))
        stream.write(f"gamma  {res['gamma']:.16g}\n")
    elif rows and command in CSV_SCHEMAS and command != "kernel":
        stream.write(_table(rows, CSV_SCHEMAS[command][1]))
    else:
        stream.write(json.dumps(record["payload"]["checks"]) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        record, rows = run(args)
    except LdzetaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.record:
        Path(args.record).write_text(json.dumps(record, indent=2))
    if args.csv:
        _write_csv(args.csv, args.command, rows)
    out = getattr(args, "out", None)
    fmt = args.format or ("json" if out == "json" else "both" if args.command in ("ladder", "constants") else "json")
    if out == "csv":
        _write_csv(None, args.command, rows, sys.stdout)
        return 0
    if fmt in ("table", "both"):
        _print_table(args.command, record, rows, sys.stdout)
    if fmt in ("json", "both"):
        sys.stdout.write(json.dumps(record, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
