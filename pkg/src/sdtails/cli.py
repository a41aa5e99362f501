"""Command-line front end: ``python -m sdtails <command> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .calibration import Observation, bootstrap_q_se, fit_price_function
from .core_model import (
    Independent,
    Conditional,
    LegParams,
    QuotientModel,
    digest,
    model_from_dict,
    model_to_dict,
)
from .correlation import JumpLevelCorrelation, rho_t_range_report, total_correlation
from .density_exact import AntiCorrParams, full_mixture_density
from .density_series import quotient_density_asymptotic, quotient_density_values
from .pricepath import PathConfig, simulate_basic, simulate_grid
from .sampler import RngStream, sample_pair_batch, write_batch
from .tail_estimation import hill_estimator, loglog_survival_fit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO, EXIT_USAGE = 0, 2, 3, 4, 64
COMMANDS = ("simulate", "density", "tail", "corr", "path", "calibrate")

DEFAULT_MODEL = QuotientModel(
    demand=LegParams(1.0, 2.0, 0.1, 0.5),
    supply=LegParams(1.0, 2.0, 0.1, 0.5),
    jumps=Independent(0.5, 0.5),
    corr=Conditional(0.3),
)


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: str
    seed: int | None
    tool_version: str
    started: str
    finished: str


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _read_json(path: str) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _load(builder, data):
    try:
        return builder(data)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_model(path: str | None, required: bool = True) -> QuotientModel:
    if path is None:
        if required:
            raise ConfigError("--config is required")
        return DEFAULT_MODEL
    return _load(model_from_dict, _read_json(path))


def _read_csv_columns(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ConfigError(f"{path}: needs a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric data ({exc})") from exc
    return header, data


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv_text(header: list[str], rows, fmt: list[str]) -> str:
    buf = io.StringIO()
    np.savetxt(buf, rows, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return buf.getvalue()


def _json_text(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# Each command returns the config dict it actually used, so the manifest digest matches it.


def cmd_simulate(args) -> dict:
    model = _load_model(args.config, required=False)
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    batch = sample_pair_batch(model, args.n, RngStream(args.seed), threads=args.threads)
    if args.out is None:
        cols = np.column_stack([batch.r1, batch.r2, batch.k1, batch.k2])
        sys.stdout.write(_csv_text(["r1", "r2", "k1", "k2"], cols, ["%.17g", "%.17g", "%d", "%d"]))
    else:
        write_batch(batch, args.out)
    return {"model": model_to_dict(model), "n": args.n}


def cmd_density(args) -> dict:
    model = _load_model(args.config)
    x = np.asarray(args.x, dtype=float)
    err = np.zeros_like(x)
    if args.method == "exact":
        params = _load(AntiCorrParams.from_model, model)
        val = np.atleast_1d(full_mixture_density(x, params))
    elif args.method == "asymptotic":
        ev = _load(lambda m: quotient_density_asymptotic(x, m, w_min=args.w_min), model)
        val, err = np.atleast_1d(ev.value), np.atleast_1d(ev.abs_error_estimate)
    else:
        conditioned = args.method == "conditional"
        val, err = _load(lambda m: quotient_density_values(x, m, conditioned=conditioned), model)
    lines = ["w,value,abs_error,method"]
    lines += [f"{w:.17g},{v:.17g},{e:.3g},{args.method}" for w, v, e in zip(x, val, err)]
    _emit("\n".join(lines) + "\n", args.out)
    return {"model": model_to_dict(model), "method": args.method, "x": x.tolist()}


def cmd_tail(args) -> dict:
    header, data = _read_csv_columns(args.input)
    col = header.index(args.column) if args.column in header else 0
    samples = data[:, col]
    if args.estimator == "hill":
        fit = hill_estimator(samples, top_k=args.top_k, side=args.side)
    else:
        if args.x_min is None or args.x_max is None:
            raise ConfigError("loglog_survival needs --x-min and --x-max")
        fit = loglog_survival_fit(samples, args.x_min, args.x_max, side=args.side)
    _emit(_json_text(fit.to_dict()), args.out)
    return {
        "input_digest": digest(samples.tolist()),
        "estimator": args.estimator,
        "top_k": args.top_k,
        "side": args.side,
        "x_min": args.x_min,
        "x_max": args.x_max,
    }


def cmd_corr(args) -> dict:
    model = _load_model(args.config)
    if args.table is None:
        rho = _load(lambda m: m.rho, model)
        jlc = JumpLevelCorrelation.constant(rho)
        jump_corr = {"kind": "constant", "rho": rho}
    else:
        table = _read_json(args.table).get("table")
        jlc = _load(JumpLevelCorrelation.from_table, table)
        jump_corr = {"kind": "table", "table": jlc.table.tolist()}
    rho_t = total_correlation(model, jlc)
    lo, hi = rho_t_range_report(model)
    _emit(_json_text({"rho_t": rho_t, "band_min": lo, "band_max": hi, "jump_corr": jump_corr}), args.out)
    return {"model": model_to_dict(model), "jump_corr": jump_corr}


def cmd_path(args) -> dict:
    if args.config is None:
        raise ConfigError("--config is required")
    config = _load(PathConfig.from_dict, _read_json(args.config))
    simulate = simulate_basic if config.mode == "basic" else simulate_grid
    rngs = [RngStream(args.seed, i) for i in range(args.paths)]
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        paths = list(pool.map(lambda rng: simulate(config, rng), rngs))
    steps = np.arange(config.steps + 1)
    if args.paths == 1:
        p = paths[0]
        rows = np.column_stack([steps, p.prices, p.snapped.astype(int)])
        text = _csv_text(["step", "price", "snapped"], rows, ["%d", "%.17g", "%d"])
    else:
        rows = np.vstack(
            [np.column_stack([np.full_like(steps, i), steps, p.prices, p.snapped.astype(int)]) for i, p in enumerate(paths)]
        )
        text = _csv_text(["path", "step", "price", "snapped"], rows, ["%d", "%d", "%.17g", "%d"])
    _emit(text, args.out)
    rejections = sum(p.rejections for p in paths)
    if rejections:
        print(f"rejected {rejections} non-positive factors", file=sys.stderr)
    return {"path_config": config.to_dict(), "paths": args.paths}


def cmd_calibrate(args) -> dict:
    header, data = _read_csv_columns(args.input)
    try:
        idx = [header.index(c) for c in ("demand", "supply", "rel_change")]
    except ValueError as exc:
        raise ConfigError("calibration CSV needs columns demand,supply,rel_change") from exc
    obs = [_load(lambda r: Observation(*r), tuple(row[idx])) for row in data]
    result = fit_price_function(obs, epsilon=args.epsilon)
    out = result.to_dict()
    if args.bootstrap:
        if args.seed is None:
            raise ConfigError("--bootstrap needs --seed")
        out["q_std_err"] = bootstrap_q_se(obs, args.bootstrap, args.seed, args.epsilon)
    _emit(_json_text(out), args.out)
    return {"input_digest": digest(data.tolist()), "epsilon": args.epsilon, "bootstrap": args.bootstrap}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdtails", description="Fat tails from supply/demand quotients.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, seed_required=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config")
        p.add_argument("--seed", type=int, required=seed_required)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "draw (R1, R2, k1, k2) samples", seed_required=True)
    p.add_argument("--n", type=int, default=1000)

    p = add("density", cmd_density, "evaluate the quotient density")
    p.add_argument("--method", choices=["quadrature", "asymptotic", "exact", "conditional"], default="quadrature")
    p.add_argument("--x", type=float, nargs="+", required=True)
    p.add_argument("--w-min", type=float, default=10.0)

    p = add("tail", cmd_tail, "estimate a tail exponent from a CSV column")
    p.add_argument("--input", required=True)
    p.add_argument("--column", default="value")
    p.add_argument("--estimator", choices=["hill", "loglog_survival"], default="hill")
    p.add_argument("--top-k", type=int)
    p.add_argument("--side", choices=["both", "upper", "lower"], default="both")
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)

    p = add("corr", cmd_corr, "total demand/supply correlation")
    p.add_argument("--table", help="JSON file with a 'table' of jump-level correlations")

    p = add("path", cmd_path, "simulate a price path", seed_required=True)
    p.add_argument("--paths", type=int, default=1)

    p = add("calibrate", cmd_calibrate, "fit q and the scale of G")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--bootstrap", type=int, default=0)
    return parser


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        parser.print_usage(sys.stderr)
        print(f"unknown command {argv[0]!r}; choose from {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    started = _now()
    try:
        used = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out is not None:
        manifest = RunManifest(args.command, digest(used), args.seed, __version__, started, _now())
        try:
            Path(args.out + ".manifest.json").write_text(_json_text(asdict(manifest)))
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
