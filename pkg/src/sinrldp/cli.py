"""Command-line entry point: generate / measure / rate / estimate / detect /
experiment subcommands over the library.

Configuration comes from an optional ``key = value`` file plus flags; flags
win.  Unknown config keys are rejected.  The resolved configuration is
written next to every output so artifacts are self-describing.  Exit codes:
0 success (detect: typical), 1 detect: anomalous, >= 2 errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import io as io_mod
from .connectivity import (
    ConnectivityKernel,
    ConstantKernel,
    ExpDistanceKernel,
    calibrated_kernel,
)
from .detection import calibrate_threshold, detect, estimate
from .errors import SinrError
from .harness import (
    DEFAULT_LADDER,
    ExperimentPlan,
    run_aep,
    run_calibration,
    run_decay,
    run_wlln,
)
from .information import rate_report
from .measures import BinGrid, empirical_measures, kernel_table, reference_measure
from .model import ConstantMarkFunction, Domain, ModelParams, ScalingSchedule, validate
from .sampler import replicate_seed
from .simulate import generate_realization

_CONFIG_KEYS = {
    "lambda", "gamma", "c", "alpha", "n0", "iota", "zeta", "mode", "t",
    "spatial_bins", "mark_bins", "seed", "replicates", "out", "threads",
    "level", "calib_draws", "ladder", "delta", "tol",
}

_DEFAULTS = {
    "lambda": 100.0, "gamma": 1.5, "c": 1.0, "alpha": 2.0, "n0": 0.0,
    "iota": 1.0, "zeta": 1.0, "mode": "quenched", "t": None,
    "spatial_bins": 8, "mark_bins": 8, "seed": None, "replicates": 1,
    "out": ".", "threads": 1, "level": 0.95, "calib_draws": 1000,
    "ladder": "100,400,1600", "delta": None, "tol": 1e-9,
}


class CliError(Exception):
    pass


@dataclass
class CliConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]


def _parse_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise CliError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val.strip()
    return values


_COERCE = {
    "lambda": float, "gamma": float, "c": float, "alpha": float, "n0": float,
    "iota": float, "zeta": float, "spatial_bins": int, "mark_bins": int,
    "seed": int, "replicates": int, "threads": int, "level": float,
    "calib_draws": int, "delta": float, "tol": float,
}


def resolve_config(args: argparse.Namespace) -> CliConfig:
    values = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, raw in _parse_config_file(args.config).items():
            values[key] = _COERCE[key](raw) if key in _COERCE else raw
    for key in _CONFIG_KEYS:
        flag = getattr(args, key.replace("lambda", "lam"), None)
        if flag is not None:
            values[key] = flag
    if values["seed"] is None:
        env = os.environ.get("SINRLDP_SEED")
        values["seed"] = int(env) if env else 0
    return CliConfig(values)


def _build_model(cfg: CliConfig):
    params = ModelParams(
        lam=float(cfg["lambda"]),
        c=float(cfg["c"]),
        alpha=float(cfg["alpha"]),
        n0=float(cfg["n0"]),
        iota=ConstantMarkFunction(float(cfg["iota"])),
        zeta=ConstantMarkFunction(float(cfg["zeta"])),
    )
    domain = Domain()
    sched = ScalingSchedule(gamma_a=float(cfg["gamma"]))
    result = validate(params, domain, sched)
    if not result.ok:
        raise CliError("invalid configuration: " + "; ".join(result.violations))
    return params, domain, sched


def _build_kernel(cfg: CliConfig, params, domain, sched):
    spec = cfg["t"]
    if spec is None:
        return None
    kind, _, arg = str(spec).partition(":")
    if kind == "const":
        return ConstantKernel(float(arg or 0.7))
    if kind == "expdist":
        return ExpDistanceKernel(float(arg or 1.0))
    if kind == "calibrated":
        lam_ref = float(arg or cfg["lambda"])
        base = ConnectivityKernel(params, domain)
        return calibrated_kernel(base, sched, lam_ref)
    raise CliError(f"unknown kernel spec {spec!r} (use const:V, expdist:S, calibrated:LAM)")


def _grid(cfg: CliConfig, domain, c: float) -> BinGrid:
    return BinGrid(
        domain=domain,
        spatial_bins=int(cfg["spatial_bins"]),
        mark_bins=int(cfg["mark_bins"]),
        c=c,
    )


def _write_resolved_config(cfg: CliConfig, out_dir: str, name: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    record = {k: cfg.values[k] for k in sorted(cfg.values)}
    io_mod.atomic_write_text(
        os.path.join(out_dir, f"{name}-config.json"),
        json.dumps(record, sort_keys=True, indent=2, default=str) + "\n",
    )


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(cfg: CliConfig) -> int:
    params, domain, sched = _build_model(cfg)
    kernel = _build_kernel(cfg, params, domain, sched)
    mode = cfg["mode"]
    if mode == "annealed" and kernel is None:
        raise CliError("annealed mode needs --t (limit kernel)")
    out = cfg["out"]
    _write_resolved_config(cfg, out, "generate")
    master = int(cfg["seed"])
    for r in range(int(cfg["replicates"])):
        seed = replicate_seed(master, r) if int(cfg["replicates"]) > 1 else master
        real = generate_realization(params, domain, sched, seed, mode, kernel, check=False)
        path = os.path.join(out, f"realization-r{r:03d}.sinr")
        io_mod.save_realization(real, path)
        print(f"realization seed={seed} n={real.n_nodes} edges={real.n_edges} file={path}")
    return 0


def cmd_measure(cfg: CliConfig, inputs: list[str]) -> int:
    out = cfg["out"]
    _write_resolved_config(cfg, out, "measure")
    for path in inputs:
        real = io_mod.load_realization(path)
        grid = _grid(cfg, real.domain, real.params.c)
        one, two = empirical_measures(real, grid)
        stem = os.path.splitext(os.path.basename(path))[0]
        io_mod.save_measure(one, os.path.join(out, f"{stem}.m1.json"))
        io_mod.save_measure(two, os.path.join(out, f"{stem}.m2.json"))
        one.to_csv(os.path.join(out, f"{stem}.m1.csv"))
        two.to_csv(os.path.join(out, f"{stem}.m2.csv"))
        print(f"measured {path}: mass_m1={one.mass!r} mass_m2={two.mass!r}")
    return 0


def cmd_rate(cfg: CliConfig, inputs: list[str]) -> int:
    out = cfg["out"]
    records = []
    for path in inputs:
        real = io_mod.load_realization(path)
        kernel = _build_kernel(cfg, real.params, real.domain, real.sched) or real.kernel
        if kernel is None:
            raise CliError(f"{path}: no limit kernel stored; pass --t")
        grid = _grid(cfg, real.domain, real.params.c)
        one, two = empirical_measures(real, grid)
        reference = reference_measure(grid, real.params)
        table = kernel_table(kernel, grid)
        report = rate_report(
            one, two, reference, table,
            tol_consistency=float(cfg["tol"]),
            seed=real.seed, lam=real.params.lam,
        )
        line = io_mod.json_line(report.to_record())
        print(line)
        records.append(report.to_record())
    if out:
        _write_resolved_config(cfg, out, "rate")
        io_mod.write_json_lines(os.path.join(out, "rate-reports.jsonl"), records)
    return 0


def cmd_estimate(cfg: CliConfig, inputs: list[str]) -> int:
    if not inputs:
        raise CliError("estimate needs at least one realization file")
    replicates = [io_mod.load_realization(path) for path in inputs]
    first = replicates[0]
    grid = _grid(cfg, first.domain, first.params.c)
    model = estimate(replicates, grid)
    threshold = calibrate_threshold(
        model, first.params, first.sched,
        level=float(cfg["level"]), b=int(cfg["calib_draws"]), seed=int(cfg["seed"]),
    )
    out = cfg["out"]
    _write_resolved_config(cfg, out, "estimate")
    meta = {
        "gamma_a": first.sched.gamma_a,
        "level": float(cfg["level"]),
        "threshold": threshold,
        "calibration_draws": int(cfg["calib_draws"]),
        "calibration_seed": int(cfg["seed"]),
        "c": first.params.c,
        "alpha": first.params.alpha,
        "n0": first.params.n0,
    }
    path = os.path.join(out, "model.json")
    io_mod.save_estimated_model(model, path, meta)
    print(f"estimated model from k={model.k_used} replicates, "
          f"threshold={threshold!r} at level {cfg['level']}, file={path}")
    return 0


def cmd_detect(cfg: CliConfig, model_path: str, input_path: str) -> int:
    model, meta = io_mod.load_estimated_model(model_path)
    real = io_mod.load_realization(input_path)
    if model.lam != real.params.lam:
        raise CliError(
            f"lambda mismatch: model {model.lam:g}, realization {real.params.lam:g}"
        )
    if "gamma_a" in meta and meta["gamma_a"] != real.sched.gamma_a:
        raise CliError(
            f"gamma_a mismatch: model {meta['gamma_a']:g}, realization {real.sched.gamma_a:g}"
        )
    report = detect(real, model, meta["threshold"], level=meta.get("level"))
    print(io_mod.json_line(report.to_record()))
    return 0 if report.decision == "typical" else 1


def cmd_experiment(cfg: CliConfig, check: str) -> int:
    params, domain, sched = _build_model(cfg)
    kernel = _build_kernel(cfg, params, domain, sched)
    ladder = tuple(float(x) for x in str(cfg["ladder"]).split(","))
    grid = _grid(cfg, domain, params.c)
    plan = ExperimentPlan(
        params=params, domain=domain, sched=sched, grid=grid, kernel=kernel,
        ladder=ladder, replicates=int(cfg["replicates"]), mode=cfg["mode"],
        seed=int(cfg["seed"]), out=cfg["out"], threads=int(cfg["threads"]),
        checks=(check,),
    )
    if check == "wlln":
        result = run_wlln(plan)
    elif check == "aep":
        result = run_aep(plan)
    elif check == "decay":
        delta = cfg["delta"]
        if delta is None:
            raise CliError("decay needs --delta")
        result = run_decay(plan, float(delta))
    elif check == "calibration":
        result = run_calibration(plan)
    else:
        raise CliError(f"unknown check {check!r}")
    _write_resolved_config(cfg, cfg["out"], f"experiment-{check}")
    result.write(cfg["out"])
    for key, verdict in sorted(result.verdicts.items()):
        print(f"{result.name}.{key}: {'pass' if verdict else 'fail'}")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--lambda", dest="lam", type=float, help="PPP intensity multiplier")
    parser.add_argument("--gamma", type=float, help="scaling exponent gamma_a in (1, 2)")
    parser.add_argument("--c", type=float, help="exponential mark rate")
    parser.add_argument("--alpha", type=float, help="path loss exponent")
    parser.add_argument("--n0", type=float, help="noise power")
    parser.add_argument("--iota", type=float, help="constant SINR threshold")
    parser.add_argument("--zeta", type=float, help="constant interference scale")
    parser.add_argument("--mode", choices=("quenched", "annealed"), help="edge construction mode")
    parser.add_argument("--t", help="limit kernel: const:V, expdist:S, or calibrated:LAM")
    parser.add_argument("--spatial-bins", dest="spatial_bins", type=int, help="bins per axis")
    parser.add_argument("--mark-bins", dest="mark_bins", type=int, help="mark bins")
    parser.add_argument("--seed", type=int, help="master seed (default: $SINRLDP_SEED or 0)")
    parser.add_argument("--replicates", type=int, help="number of replicates")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker cap for replicate-level parallelism")
    parser.add_argument("--level", type=float, help="null quantile for calibration")
    parser.add_argument("--calib-draws", dest="calib_draws", type=int,
                        help="Monte Carlo draws for threshold calibration")
    parser.add_argument("--ladder", help="comma-separated lambda ladder")
    parser.add_argument("--delta", type=float, help="sup-distance threshold for decay")
    parser.add_argument("--tol", type=float, help="consistency tolerance for rate functions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinrldp",
        description="Simulate and analyze sub-critical SINR random networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample realizations and write them to files")
    _add_common(p)

    p = sub.add_parser("measure", help="compute binned M1/M2 for stored realizations")
    _add_common(p)
    p.add_argument("--input", nargs="+", required=True, help="realization files")

    p = sub.add_parser("rate", help="evaluate the rate functions on stored realizations")
    _add_common(p)
    p.add_argument("--input", nargs="+", required=True, help="realization files")

    p = sub.add_parser("estimate", help="estimate the null model from replicates and calibrate")
    _add_common(p)
    p.add_argument("--input", nargs="+", required=True, help="replicate realization files")

    p = sub.add_parser("detect", help="typicality test of a realization against a model")
    _add_common(p)
    p.add_argument("--model", required=True, help="estimated model file")
    p.add_argument("--input", required=True, help="realization file to test")

    p = sub.add_parser("experiment", help="run a trend experiment over a lambda ladder")
    _add_common(p)
    p.add_argument("--check", required=True, choices=("wlln", "aep", "decay", "calibration"),
                   help="which trend to run")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "measure":
            return cmd_measure(cfg, args.input)
        if args.command == "rate":
            return cmd_rate(cfg, args.input)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.input)
        if args.command == "detect":
            return cmd_detect(cfg, args.model, args.input)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.check)
        raise CliError(f"unknown command {args.command!r}")
    except (CliError, SinrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
