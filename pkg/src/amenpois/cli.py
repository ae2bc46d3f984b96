"""Command-line entry point: `amenpois run|plot|validate`."""

from __future__ import annotations

import argparse
import json
import sys

from amenpois.config import load_config
from amenpois.errors import AmenpoisError, ConfigError
from amenpois.plotting import plot
from amenpois.runner import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amenpois",
        description="Configuration-driven compound-Poisson approximation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Execute a scenario config and write CSV/JSON results.")
    p_run.add_argument("--config", required=True, help="Path to the scenario JSON config.")
    p_run.add_argument("--out-dir", default=".", help="Directory for result files.")
    p_run.add_argument("--workers", type=int, default=1, help="Worker processes (AMENPOIS_WORKERS overrides).")
    p_run.add_argument("--seed", type=int, default=None, help="Override the config master_seed.")

    p_plot = sub.add_parser("plot", help="Render an SVG chart from a JSON result.")
    p_plot.add_argument("--result", required=True, help="Path to a *_result.json file.")
    p_plot.add_argument("--out", required=True, help="Output SVG path.")

    p_val = sub.add_parser("validate", help="Validate a scenario config.")
    p_val.add_argument("--config", required=True, help="Path to the scenario JSON config.")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: scenario {cfg.scenario!r} (hash {cfg.hash})")
            return 0
        if args.command == "run":
            cfg = load_config(args.config, seed_override=args.seed)
            result = run(cfg, out_dir=args.out_dir, workers=args.workers)
            print(
                f"wrote {cfg.scenario}_result.csv and {cfg.scenario}_result.json "
                f"({len(result.rows)} rows, hash {result.config_hash})"
            )
            return 0
        if args.command == "plot":
            with open(args.result, "r", encoding="utf-8") as fh:
                result = json.load(fh)
            out = plot(result, args.out)
            print(f"wrote {out}")
            return 0
    except ConfigError as exc:
        for fld, msg in exc.errors:
            print(f"config error: {fld}: {msg}", file=sys.stderr)
        return 1
    except (json.JSONDecodeError, OSError) as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        return 1
    except AmenpoisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
