"""Command-line entry point: ``cfpos run | sweep | validate-config``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from cfpos.config import ExperimentConfig, coerce_value, load_config, sweep_field
from cfpos.errors import ConfigError
from cfpos.experiment import run_experiment
from cfpos.outputs import emit_outputs

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfpos", description="Fingerprint positioning experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-setup progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML experiment configuration")
        sp.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--setups", type=int, help="number of setups")
        sp.add_argument("--testpoints", type=int, help="test points per setup")
        sp.add_argument("--workers", type=int, help="parallel setup processes")
        sp.add_argument("--methods", help="comma-separated method list")

    common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="run one experiment per parameter value")
    common(sw)
    sw.add_argument("--param", required=True, help="config field to vary (N, K, L aliases allowed)")
    sw.add_argument("--values", required=True, help="comma-separated values")
    vc = sub.add_parser("validate-config", help="check a configuration file")
    vc.add_argument("path", type=Path)
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {"seed": args.seed, "n_setups": args.setups, "n_testpoints": args.testpoints,
                 "workers": args.workers, "methods": args.methods,
                 "out_dir": str(args.out) if args.out else None}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**overrides) if overrides else cfg


def _summary_line(result) -> str:
    parts = [f"{m}={s.mean_m:.2f}m" for m, s in result.summaries.items()]
    return "mean error: " + ", ".join(parts)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-config":
            load_config(args.path)
            print(f"{args.path}: ok")
            return EXIT_OK
        cfg = _config(args)
        if args.command == "run":
            runs = [(None, cfg, Path(cfg.out_dir))]
        else:
            key = sweep_field(args.param)
            values = [coerce_value(key, v.strip()) for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("--values is empty")
            runs = [(v, cfg.replace(**{key: v}), Path(cfg.out_dir) / f"{key}={v}") for v in values]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    partial = False
    for value, run_cfg, out in runs:
        result = run_experiment(run_cfg)
        try:
            emit_outputs(result, out)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        label = "" if value is None else f"[{value}] "
        print(f"{label}{_summary_line(result)} -> {out}")
        for setup, method, msg in result.failures:
            print(f"{label}warning: {method} failed in setup {setup}: {msg}", file=sys.stderr)
        partial |= result.partial_failure
    return EXIT_PARTIAL if partial else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
