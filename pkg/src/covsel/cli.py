"""Command-line front end: gen / select / analyze / surrogate / adaptive.

Machine-readable JSON goes to stdout (deterministic for a fixed flag set,
seeds included); human-oriented progress notes go to stderr.  Exit status
is 0 iff the operation completed and every internal invariant held.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .outliers import build_coverage_matrix, build_outlier_model, compute_thresholds
from .profiles import load_profile, save_profile
from .selection import (
    attach_objective,
    brute_force_optimal,
    coverage_report,
    greedy_select,
    select_max_actvar,
    select_max_ppl,
    select_random,
    select_stratified,
    write_index_list,
)
from .surrogate import adaptive_refine, check_surrogate_bound, simulate_deficits, surrogate_loss
from .synthgen import POOL_PRESETS, PoolConfig, config_from_mapping, generate_pool, measured_outlier_fraction

CLI_METHODS = ("greedy", "random", "max_ppl", "max_actvar", "stratified", "oracle")


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in _text_lines(payload):
            print(line)


def _text_lines(payload: dict, prefix: str = "") -> list[str]:
    lines = []
    for key in sorted(payload):
        value = payload[key]
        if isinstance(value, dict):
            lines.append(f"{prefix}{key}:")
            lines.extend(_text_lines(value, prefix + "  "))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{prefix}{key}:")
            for item in value:
                lines.append(prefix + "  " + "  ".join(f"{k}={item[k]}" for k in sorted(item)))
        else:
            lines.append(f"{prefix}{key}: {value}")
    return lines


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_config_file(path: Path) -> dict:
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return json.loads(text)
    mapping = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (want key=value): {line!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _pool_config(args) -> PoolConfig:
    base = POOL_PRESETS[args.preset] if args.preset else None
    if args.config:
        base = config_from_mapping(base, _parse_config_file(Path(args.config)))
    overrides = {}
    if args.samples is not None:
        overrides["num_samples"] = args.samples
    if args.layer_dims is not None:
        overrides["layer_dims"] = tuple(int(x) for x in args.layer_dims.split(","))
    if args.outlier_fraction is not None:
        overrides["outlier_fraction"] = args.outlier_fraction
    if args.sparsity is not None:
        overrides["activation_sparsity"] = args.sparsity
    if args.redundancy is not None:
        overrides["redundancy"] = args.redundancy
    if args.scenario is not None:
        overrides["scenario"] = args.scenario
    if args.magnitude_range is not None:
        lo, hi = (float(x) for x in args.magnitude_range.split(","))
        overrides["magnitude_range"] = (lo, hi)
    if args.dominant_layer is not None:
        overrides["dominant_layer"] = args.dominant_layer
    if args.dominant_boost is not None:
        overrides["dominant_boost"] = args.dominant_boost
    overrides["seed"] = args.seed
    if base is None:
        if "num_samples" not in overrides or "layer_dims" not in overrides:
            raise ValueError("without --preset/--config, --samples and --layer-dims are required")
        return PoolConfig(**overrides)
    return replace(base, **overrides)


def cmd_gen(args) -> int:
    config = _pool_config(args)
    profile = generate_pool(config)
    nbytes = save_profile(profile, args.output)
    fraction = measured_outlier_fraction(profile, k_sigma=args.k_sigma)
    _note(
        f"wrote {args.output}: N={profile.num_samples} L={profile.num_layers} "
        f"measured outlier fraction {fraction:.4f} at k={args.k_sigma:g}"
    )
    _emit(
        {
            "path": str(args.output),
            "bytes": nbytes,
            "num_samples": profile.num_samples,
            "num_layers": profile.num_layers,
            "layer_dims": list(profile.layer_dims),
            "scenario": config.scenario,
            "seed": config.seed,
            "measured_outlier_fraction": fraction,
        },
        args.format,
    )
    return 0


def _run_method(args, profile, cov):
    if args.method == "greedy":
        return greedy_select(cov, args.budget)
    if args.method == "oracle":
        return brute_force_optimal(cov, args.budget)
    if args.method == "random":
        return attach_objective(select_random(profile.num_samples, args.budget, args.seed), cov)
    if args.method == "max_ppl":
        return attach_objective(select_max_ppl(profile, args.budget), cov)
    if args.method == "max_actvar":
        return attach_objective(select_max_actvar(profile, args.budget, mode=args.actvar_mode), cov)
    if args.method == "stratified":
        return attach_objective(select_stratified(profile, args.budget, args.bins, args.seed), cov)
    raise ValueError(f"unknown method {args.method!r}")


def cmd_select(args) -> int:
    profile = load_profile(args.input)
    thresholds = compute_thresholds(profile, args.k_sigma)
    model = build_outlier_model(profile, thresholds)
    cov = build_coverage_matrix(profile, model)
    result = _run_method(args, profile, cov)

    payload = result.to_dict(budget=args.budget)
    out = Path(args.output)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    indices_path = Path(args.indices_out) if args.indices_out else out.with_suffix(".txt")
    write_index_list(result, indices_path)
    _note(
        f"{args.method}: selected {result.size} of {profile.num_samples} samples, "
        f"objective {result.objective:.6g}; wrote {out} and {indices_path}"
    )
    _emit(payload, args.format)
    return 0


def _load_selection(path: Path) -> np.ndarray:
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return np.asarray(json.loads(text)["selected"], dtype=np.int64)
    return np.asarray([int(line) for line in text.split()], dtype=np.int64)


def cmd_analyze(args) -> int:
    profile = load_profile(args.input)
    thresholds = compute_thresholds(profile, args.k_sigma)
    model = build_outlier_model(profile, thresholds)
    cov = build_coverage_matrix(profile, model)
    selected = _load_selection(Path(args.selection))
    report = coverage_report(selected, cov)
    payload = report.to_dict()
    payload["num_selected"] = int(selected.size)
    payload["model"] = model.summary_dict(thresholds)
    _emit(payload, args.format)
    return 0


def cmd_surrogate(args) -> int:
    profile = load_profile(args.input)
    thresholds = compute_thresholds(profile, args.k_sigma)
    model = build_outlier_model(profile, thresholds)
    cov = build_coverage_matrix(profile, model)
    selected = _load_selection(Path(args.selection))
    deficits = simulate_deficits(model, cov, selected, seed=args.seed, mode=args.mode)
    report = surrogate_loss(deficits, model)
    slack = check_surrogate_bound(report, model, cov, selected)  # raises if slack < 0
    payload = report.to_dict()
    payload["mode"] = args.mode
    payload["seed"] = args.seed
    payload["verified_slack"] = slack
    _emit(payload, args.format)
    return 0


def cmd_adaptive(args) -> int:
    profile = load_profile(args.input)
    result = adaptive_refine(
        profile,
        budget=args.budget,
        k_sigma_init=args.k_sigma,
        k_sigma_low=args.k_sigma_low,
        seed=args.seed,
        mode=args.mode,
    )
    payload = {
        "flagged_layers": [int(l) for l in result.flagged_layers],
        "per_layer_error": [float(e) for e in result.per_layer_error],
        "initial": {
            "taus": [float(t) for t in result.initial.model.taus],
            "num_channels": result.initial.model.num_channels,
            "selection": result.initial.selection.to_dict(budget=args.budget),
            "surrogate": result.initial.report.to_dict(),
        },
        "refined": {
            "taus": [float(t) for t in result.refined.model.taus],
            "num_channels": result.refined.model.num_channels,
            "selection": result.refined.selection.to_dict(budget=args.budget),
            "surrogate": result.refined.report.to_dict(),
        },
    }
    _note(
        f"adaptive: flagged layers {payload['flagged_layers']}, "
        f"|C| {payload['initial']['num_channels']} -> {payload['refined']['num_channels']}"
    )
    _emit(payload, args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covsel",
        description="Calibration-sample selection by weighted coverage of activation outlier channels",
    )
    parser.add_argument("--version", action="version", version=f"covsel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common_fmt = {"choices": ("json", "text"), "default": "json"}

    p = sub.add_parser("gen", help="write a synthetic CCAP pool")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--preset", choices=sorted(POOL_PRESETS))
    p.add_argument("--config", help="key=value or JSON PoolConfig file")
    p.add_argument("--samples", type=int)
    p.add_argument("--layer-dims", help="comma-separated channel counts, e.g. 96,96,96")
    p.add_argument("--outlier-fraction", type=float)
    p.add_argument("--sparsity", type=float)
    p.add_argument("--redundancy", type=float)
    p.add_argument("--scenario", choices=("uniform", "dominant-layer", "redundant-pool"))
    p.add_argument("--magnitude-range", help="m_lo,m_hi in body-sigma units")
    p.add_argument("--dominant-layer", type=int)
    p.add_argument("--dominant-boost", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-sigma", type=float, default=6.0, help="k used for the reported fraction")
    p.add_argument("--format", **common_fmt)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="run a selection method over a CCAP pool")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True, help="selection JSON path")
    p.add_argument("--indices-out", help="index list path (default: output with .txt)")
    p.add_argument("--method", choices=CLI_METHODS, required=True)
    p.add_argument("-K", "--budget", type=int, required=True)
    p.add_argument("--k-sigma", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=10, help="stratified: number of quantile bins")
    p.add_argument("--actvar-mode", choices=("entries", "layer_means"), default="entries")
    p.add_argument("--format", **common_fmt)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("analyze", help="coverage report for a selection file")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--selection", required=True, help="selection JSON or index list")
    p.add_argument("--k-sigma", type=float, default=6.0)
    p.add_argument("--format", **common_fmt)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("surrogate", help="deficit simulation and bound check")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--selection", required=True)
    p.add_argument("--mode", choices=("worst_case", "uniform_fraction"), default="uniform_fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-sigma", type=float, default=6.0)
    p.add_argument("--format", **common_fmt)
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("adaptive", help="adaptive threshold refinement loop")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("-K", "--budget", type=int, required=True)
    p.add_argument("--k-sigma", type=float, default=6.0)
    p.add_argument("--k-sigma-low", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("worst_case", "uniform_fraction"), default="uniform_fraction")
    p.add_argument("--format", **common_fmt)
    p.set_defaults(func=cmd_adaptive)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, AssertionError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
