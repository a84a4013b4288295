"""Suite execution: per-run CSV logs and suite-level summary statistics.

The CSV schema is fixed:
``seed,policy,round,device,eta,upload_s,round_s,cum_s,loss,gap,rho,lambda,bound``
with the three diagnostic columns empty for non-CTM rows. Floats are written
with ``repr`` so rows parse back losslessly and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .config import ExperimentConfig, build_comm, build_devices, build_schedule, build_task
from .simulator import RoundLog, RunResult, run_experiment

CSV_HEADER = [
    "seed", "policy", "round", "device", "eta", "upload_s", "round_s",
    "cum_s", "loss", "gap", "rho", "lambda", "bound",
]


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def run_csv_rows(result: RunResult) -> list[list[str]]:
    rows = []
    for log in result.logs:
        rows.append([
            str(result.seed), result.policy, str(log.round), str(log.device),
            _fmt(log.eta), _fmt(log.upload_s), _fmt(log.round_s), _fmt(log.cum_s),
            _fmt(log.loss), _fmt(log.gap), _fmt(log.rho), _fmt(log.lam), _fmt(log.bound),
        ])
    return rows


def write_run_csv(result: RunResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(run_csv_rows(result))


def run_filename(policy: str, seed: int) -> str:
    return f"{policy}_seed{seed:04d}.csv"


def time_to_epsilon(result: RunResult) -> float | None:
    """Simulated time at which the run first satisfied the stopping rule."""
    return result.total_time_s if result.converged else None


def gap_at_time(result: RunResult, t: float) -> float:
    """Loss gap of the last round completed by simulated time t.

    Before the first round finishes this clamps to the first round's gap
    (the initial gap itself is not logged); a run with no rounds was already
    converged at the start and reports zero.
    """
    gap = None
    for log in result.logs:
        if log.cum_s <= t:
            gap = log.gap
        else:
            break
    if gap is not None:
        return gap
    return result.logs[0].gap if result.logs else 0.0


def _median_iqr(values: list[float]) -> dict:
    arr = np.array(values, dtype=float)
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3)}


def default_checkpoints(results: list[RunResult]) -> list[float]:
    """30% and 70% of the largest observed total run time."""
    t_max = max((r.total_time_s for r in results), default=0.0)
    return [0.3 * t_max, 0.7 * t_max]


def summarize(
    results: list[RunResult], checkpoints: list[float] | None = None
) -> dict:
    """Per-policy median/IQR of time-to-epsilon and gap at checkpoints.

    Non-converged runs enter the time-to-epsilon statistics as +inf; medians
    that come out infinite are reported as null.
    """
    if checkpoints is None:
        checkpoints = default_checkpoints(results)
    policies = sorted({r.policy for r in results})
    summary: dict = {"checkpoints_s": checkpoints, "policies": {}}
    for policy in policies:
        runs = [r for r in results if r.policy == policy]
        times = [t if (t := time_to_epsilon(r)) is not None else np.inf for r in runs]
        stats = _median_iqr(times)
        stats = {k: (None if not np.isfinite(v) else v) for k, v in stats.items()}
        gap_stats = {
            repr(t): _median_iqr([gap_at_time(r, t) for r in runs]) for t in checkpoints
        }
        summary["policies"][policy] = {
            "runs": len(runs),
            "converged": sum(r.converged for r in runs),
            "time_to_epsilon_s": stats,
            "gap_at_checkpoint": gap_stats,
        }
    return summary


Runner = Callable[[ExperimentConfig, str, int], RunResult]


def local_runner(config: ExperimentConfig, policy: str, seed: int) -> RunResult:
    """Run one experiment in-process from a validated config."""
    task = build_task(config)
    return run_experiment(
        task=task,
        devices=build_devices(config),
        comm=build_comm(config),
        schedule=build_schedule(config),
        policy=policy,
        epsilon=config.epsilon,
        max_rounds=config.max_rounds,
        seed=seed,
        ica_beta=config.ica_beta,
        batch_size=config.task.batch_size,
    )


def run_suite(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    runner: Runner = local_runner,
) -> dict:
    """Execute every (policy, seed) pair, persist CSVs and a summary JSON.

    ``runner`` may be swapped for a remote client; files are always written
    here, by a single collector, to keep output deterministic.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = [(p, s) for p in config.policies for s in config.seeds]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda ps: runner(config, *ps), pairs))
    else:
        results = [runner(config, p, s) for p, s in pairs]

    for result in results:
        try:
            write_run_csv(result, out / run_filename(result.policy, result.seed))
        except OSError as exc:
            raise OSError(f"failed writing {out / run_filename(result.policy, result.seed)}: {exc}") from exc

    summary = summarize(results, config.checkpoints)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
