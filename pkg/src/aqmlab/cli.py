"""Command-line front end: train the map, run scenarios, compare AQMs.

All randomness flows from --seed (default 42, never the wall clock), so any
invocation can be replayed exactly. Output CSVs land under --out as
<scenario>_<aqm>.csv plus summary.csv; figures are rendered next to them
unless --no-plots is given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import yaml

from . import report
from .kred import kred_train, write_training_log
from .scenario import (COMPARISON_AQMS, ConfigError, build_scenario,
                       emit_timeseries, run_comparison, run_scenario,
                       write_summary)
from .som import LearnParams, SomFormatError, load_map, save_map

DEFAULT_SEED = 42
CONFIG_ENV = "AQMLAB_CONFIG"


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of scenario fields")
    return data


def _build_spec(args, aqm: str | None = None):
    overrides = _load_config(args.config)
    name = args.scenario or overrides.pop("name", None)
    if name is None:
        raise ConfigError("no scenario given: use --scenario or a config file")
    for key in ("seed", "duration", "packet_size"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides[key] = value
    overrides.setdefault("seed", DEFAULT_SEED)
    if aqm is not None:
        overrides["aqm"] = aqm
    return build_scenario(name, overrides)


def _load_map_arg(args):
    if not args.map_file:
        raise ConfigError("--map-file is required when the kred discipline runs")
    return load_map(args.map_file)


def _outdir(args) -> Path:
    out = Path(args.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    spec = _build_spec(args, aqm="kred")
    lp = None
    if args.explore_sigma is not None:
        lp = LearnParams(explore_sigma=args.explore_sigma)
    result = kred_train(spec, lp=lp, seed=spec.seed)
    out = Path(args.out or "map.ksom")
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    save_map(result.map, out)
    write_training_log(result, f"{out}.log.csv")
    if result.converged:
        print(f"converged at t={result.converged_at:.1f} s; "
              f"map written to {out}")
    else:
        print("warning: training did not converge within the scenario; "
              "the saved map is unfrozen", file=sys.stderr)
        print(f"map written to {out}")
    return 0


def cmd_run(args) -> int:
    spec = _build_spec(args, aqm=args.aqm)
    som_map = _load_map_arg(args) if spec.aqm == "kred" else None
    metrics = run_scenario(spec, som_map=som_map)
    out = _outdir(args)
    csv_path = out / f"{spec.name}_{spec.aqm}.csv"
    emit_timeseries(metrics, csv_path)
    write_summary({spec.aqm: metrics}, out / "summary.csv")
    if not args.no_plots:
        params = spec.red_params()
        report.plot_run(metrics, out / f"{spec.name}_{spec.aqm}.png",
                        params.min_th, params.max_th, params.q_size)
    print(f"{spec.name}/{spec.aqm}: mean delay {metrics.mean_delay_ms:.2f} ms, "
          f"throughput {metrics.mean_tput_bps / 1e6:.4f} Mbit/s, "
          f"drop rate {100 * metrics.drop_rate:.2f}%  -> {csv_path}")
    return 0


def cmd_compare(args) -> int:
    spec = _build_spec(args)
    som_map = _load_map_arg(args)
    results = run_comparison(spec, som_map=som_map, workers=args.workers)
    out = _outdir(args)
    for name, metrics in results.items():
        emit_timeseries(metrics, out / f"{spec.name}_{name}.csv")
    write_summary(results, out / "summary.csv")
    if not args.no_plots:
        params = spec.red_params()
        for name, metrics in results.items():
            report.plot_run(metrics, out / f"{spec.name}_{name}.png",
                            params.min_th, params.max_th, params.q_size)
        report.plot_comparison(results, out / f"{spec.name}_comparison.png",
                               params.min_th, params.max_th, params.q_size)
    print(f"{'aqm':8s} {'delay ms':>10s} {'tput Mb/s':>10s} {'drop %':>7s}")
    for name, m in results.items():
        print(f"{name:8s} {m.mean_delay_ms:10.2f} {m.mean_tput_bps / 1e6:10.4f} "
              f"{100 * m.drop_rate:7.2f}")
    print(f"artifacts in {out}/")
    return 0


def cmd_validate_som(args) -> int:
    from .cartpole import pole_balance_validate

    seed = args.seed if args.seed is not None else DEFAULT_SEED
    rep = pole_balance_validate(seed=seed)
    trained_ok = rep.trained_min >= 1000
    untrained_ok = rep.untrained_mean < 100
    print(f"untrained: mean {rep.untrained_mean:.1f} balanced steps over "
          f"{len(rep.untrained_steps)} starts")
    print(f"trained:   min {rep.trained_min} balanced steps "
          f"(cap {rep.eval_cap}) over {len(rep.trained_steps)} starts")
    if trained_ok and untrained_ok:
        print("validate-som: PASS")
        return 0
    print("validate-som: FAIL", file=sys.stderr)
    return 1


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqmlab",
        description="Deterministic bottleneck-queue simulator with classic "
                    "AQMs and a self-organizing-map RED controller.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
        p.add_argument("--config", default=None,
                       help=f"YAML scenario config (or ${CONFIG_ENV})")
        p.add_argument("--duration", type=float, default=None, help="seconds")
        p.add_argument("--packet-size", type=int, default=None, help="bytes")
        if scenario:
            p.add_argument("--scenario",
                           choices=["train", "scenario1", "scenario2", "custom"],
                           default=None)

    p_train = sub.add_parser("train", help="train the map and write a .ksom file")
    common(p_train)
    p_train.add_argument("--out", default="map.ksom", help="map file to write")
    p_train.add_argument("--explore-sigma", type=float, default=None,
                         help="log-scale exploration noise during training")
    p_train.set_defaults(func=cmd_train, scenario_default="train")

    p_run = sub.add_parser("run", help="run one scenario under one discipline")
    common(p_run)
    p_run.add_argument("--aqm", required=True,
                       choices=["droptail", "red", "fred", "ared", "pi", "kred"])
    p_run.add_argument("--map-file", default=None, help="trained map (kred)")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--no-plots", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help=f"run {', '.join(COMPARISON_AQMS)} on one scenario")
    common(p_cmp)
    p_cmp.add_argument("--map-file", default=None, help="trained map (kred)")
    p_cmp.add_argument("--out", default=None, help="output directory")
    p_cmp.add_argument("--workers", type=int, default=1,
                       help="process pool size for the five runs")
    p_cmp.add_argument("--no-plots", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate-som",
                           help="pole-balancing check of the map machinery")
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(func=cmd_validate_som)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if getattr(args, "scenario", None) is None:
        default = getattr(args, "scenario_default", None)
        if default and not args.config and not os.environ.get(CONFIG_ENV):
            args.scenario = default
    try:
        return args.func(args)
    except (ConfigError, SomFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
