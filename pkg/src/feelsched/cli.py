"""``feel-sched`` command line tool.

A thin client over the HTTP service: by default it mounts the FastAPI app
in-process (no socket), and ``--server`` points it at a remote instance
started with ``feel-sched serve``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx
import yaml

from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .simulator import POLICIES, RoundLog, RunResult
from .suite import run_suite


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process default: drive the ASGI app directly, no socket involved.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient

    from .service import app  # deferred so --server mode stays light
    return TestClient(app, base_url="http://feel-sched.local")


def parse_seed_spec(spec: str) -> list[int]:
    """Parse ``0..19`` ranges and comma lists, e.g. ``0..3,7``."""
    seeds: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise click.BadParameter(f"empty seed spec {spec!r}")
    return seeds


def _result_from_response(data: dict) -> RunResult:
    logs = [
        RoundLog(
            round=row["round"], policy=data["policy"], device=row["device"],
            eta=row["eta"], upload_s=row["upload_s"], round_s=row["round_s"],
            cum_s=row["cum_s"], loss=row["loss"], gap=row["gap"],
            grad_norms=row["grad_norms"], rho=row.get("rho"),
            lam=row.get("lam"), bound=row.get("bound"),
        )
        for row in data["logs"]
    ]
    return RunResult(
        logs=logs, converged=data["converged"], rounds=data["rounds"],
        total_time_s=data["total_time_s"], seed=data["seed"], policy=data["policy"],
    )


@click.group()
def main() -> None:
    """Federated edge learning scheduling simulator."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--server", default=None, help="Base URL of a running service.")
def validate(config_path: str, server: str | None) -> None:
    """Validate a config file against the service schema."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(1)
    with _client(server) as client:
        resp = client.post("/config/validate", json=cfg.model_dump())
    if resp.status_code != 200:
        click.echo(f"invalid config: {resp.text}", err=True)
        sys.exit(1)
    click.echo("config OK")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--policies", default=None,
              help=f"Comma list from {','.join(POLICIES)}; overrides the config.")
@click.option("--seeds", default=None, help="Seed list/range, e.g. 0..19; overrides the config.")
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--jobs", default=1, type=int, show_default=True)
@click.option("--server", default=None, help="Base URL of a running service.")
def run(config_path: str, policies: str | None, seeds: str | None,
        out_dir: str | None, jobs: int, server: str | None) -> None:
    """Run the configured experiment suite and write CSV logs + summary."""
    try:
        cfg = load_config(config_path)
        overrides = {}
        if policies is not None:
            overrides["policies"] = [p.strip() for p in policies.split(",") if p.strip()]
        if seeds is not None:
            overrides["seeds"] = parse_seed_spec(seeds)
        if out_dir is not None:
            overrides["out_dir"] = out_dir
        if overrides:
            cfg = parse_config({**cfg.model_dump(), **overrides})
    except ConfigError as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(1)

    with _client(server) as client:
        resp = client.post("/config/validate", json=cfg.model_dump())
        if resp.status_code != 200:
            click.echo(f"invalid config: {resp.text}", err=True)
            sys.exit(1)

        def remote_runner(config: ExperimentConfig, policy: str, seed: int) -> RunResult:
            r = client.post("/runs", json={
                "config": config.model_dump(), "policy": policy, "seed": seed,
            })
            if r.status_code != 200:
                raise RuntimeError(f"run ({policy}, seed {seed}) failed: {r.text}")
            return _result_from_response(r.json())

        try:
            summary = run_suite(cfg, out_dir=cfg.out_dir, jobs=jobs, runner=remote_runner)
        except (RuntimeError, OSError) as exc:
            click.echo(str(exc), err=True)
            sys.exit(1)

    click.echo(json.dumps(summary, indent=2))


@main.command()
@click.argument("name", type=click.Choice(["grid-search", "qfactor-mc", "unbiasedness"]))
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="Config supplying device profiles for qfactor-mc.")
def oracle(name: str, config_path: str | None) -> None:
    """Run a named brute-force verification against the analytical results."""
    import numpy as np

    from . import oracles, scheduler
    from .config import build_comm, build_devices

    if name == "grid-search":
        report = oracles.grid_search_check(num_instances=50, resolution=1000)
    elif name == "qfactor-mc":
        if config_path is None:
            default = Path(__file__).resolve().parents[2] / "configs" / "default.yaml"
            config_path = str(default)
        cfg = load_config(config_path)
        report = oracles.q_factor_check(build_devices(cfg), build_comm(cfg))
    else:
        rng = np.random.default_rng(7)
        grads = rng.standard_normal((4, 6))
        sizes = np.array([100, 200, 300, 400])
        norms = np.linalg.norm(grads, axis=1)
        dist = scheduler.importance_aware_policy(norms, sizes)
        report = oracles.unbiasedness_check(dist.probs, grads, sizes)

    click.echo(json.dumps(report, indent=2))
    sys.exit(0 if report["passed"] else 1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("feelsched.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
