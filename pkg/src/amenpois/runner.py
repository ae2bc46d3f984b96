"""Experiment orchestration: worker fan-out, CSV/JSON persistence.

Replicates are processed in fixed batches whose random substreams depend
only on (master seed, phase, batch index), so the written CSV is
byte-identical for any worker count.  Wall-clock times are recorded in the
JSON result only and never participate in reproducibility comparisons.
"""

from __future__ import annotations

import json
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from amenpois.config import ExperimentConfig
from amenpois.engine import BoundReport, ExperimentResult, ResultRow, convergence_curve

CSV_HEADER = (
    "scenario,n,window_size,b_n,k,lambda_hat,lambda_stderr,tv,tv_stderr,"
    "bound_total,term_boundary,term_gamma,term_psi,term_xi,seed,config_hash"
)

ENV_WORKERS = "AMENPOIS_WORKERS"


def resolve_workers(cli_workers: int | None) -> int:
    env = os.environ.get(ENV_WORKERS)
    if env is not None:
        return max(1, int(env))
    return max(1, cli_workers or 1)


@contextmanager
def worker_map(workers: int):
    """`map` over an optional process pool; inline when workers <= 1."""
    if workers <= 1:
        yield map
        return
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        yield pool.map


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_lines(result: ExperimentResult, k_max: int) -> list[str]:
    lines = [CSV_HEADER]
    for row in result.rows:
        bound: BoundReport | None = row.bound
        for k in range(1, k_max + 1):
            lam = row.lambda_rates[k] if k < len(row.lambda_rates) else 0.0
            se = row.lambda_stderr[k] if k < len(row.lambda_stderr) else 0.0
            fields = [
                result.scenario,
                str(row.n),
                str(row.window_size),
                str(row.b_n),
                str(k),
                _fmt(float(lam)),
                _fmt(float(se)),
                _fmt(float(row.tv)),
                _fmt(float(row.tv_stderr)),
                _fmt(bound.total if bound else None),
                _fmt(bound.term_boundary if bound else None),
                _fmt(bound.term_gamma if bound else None),
                _fmt(bound.term_psi if bound else None),
                _fmt(bound.term_xi if bound else None),
                str(result.master_seed),
                result.config_hash,
            ]
            lines.append(",".join(fields))
    return lines


def _bound_dict(bound: BoundReport | None):
    if bound is None:
        return None
    return {
        "variant": bound.variant,
        "total": bound.total,
        "term_boundary": bound.term_boundary,
        "term_gamma": bound.term_gamma,
        "term_psi": bound.term_psi,
        "term_xi": bound.term_xi,
        "h0": bound.h0,
        "h1": bound.h1,
        "extras": bound.extras,
    }


def result_json(result: ExperimentResult, config: ExperimentConfig) -> dict:
    return {
        "scenario": result.scenario,
        "config_hash": result.config_hash,
        "master_seed": result.master_seed,
        "incomplete": result.incomplete,
        "total_wall_time": result.total_wall_time,
        "config": config.raw,
        "rows": [
            {
                "n": row.n,
                "window_size": row.window_size,
                "b_n": row.b_n,
                "lambda_hat": row.lambda_rates,
                "lambda_stderr": row.lambda_stderr,
                "tv": row.tv,
                "tv_stderr": row.tv_stderr,
                "bound": _bound_dict(row.bound),
                "extra": row.extra,
                "wall_time": row.wall_time,
            }
            for row in result.rows
        ],
    }


def write_outputs(result: ExperimentResult, config: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.scenario}_result.csv"
    json_path = out / f"{result.scenario}_result.json"
    csv_path.write_text("\n".join(csv_lines(result, config.k_max)) + "\n", encoding="utf-8")

    def _default(obj):
        if hasattr(obj, "tolist"):
            return obj.tolist()
        if isinstance(obj, float):
            return repr(obj)
        raise TypeError(f"not JSON serializable: {type(obj)}")

    json_path.write_text(
        json.dumps(result_json(result, config), indent=2, sort_keys=True, default=_default)
        + "\n",
        encoding="utf-8",
    )
    return csv_path, json_path


def run(config: ExperimentConfig, out_dir=".", workers: int | None = None) -> ExperimentResult:
    """Execute the configured experiment and persist CSV + JSON results.

    On failure after at least one completed row, the partial result is
    flushed with the `incomplete` marker set, then the error propagates."""
    n_workers = resolve_workers(workers)
    completed: list[ResultRow] = []
    with worker_map(n_workers) as map_fn:
        try:
            result = convergence_curve(config, map_fn=map_fn, on_row=completed.append)
        except Exception:
            if completed:
                partial = ExperimentResult(
                    scenario=config.scenario,
                    master_seed=config.master_seed,
                    config_hash=config.hash,
                    rows=completed,
                    incomplete=True,
                )
                write_outputs(partial, config, out_dir)
            raise
    write_outputs(result, config, out_dir)
    return result
