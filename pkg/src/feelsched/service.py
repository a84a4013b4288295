"""FastAPI service exposing configuration validation, single experiment runs
and per-round scheduling queries over the core package."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import scheduler
from .channel import ChannelRealization, CommParams
from .config import ExperimentConfig
from .scheduler import AllGradientsZero, BisectionError, BoundParams, StarvationError
from .simulator import POLICIES, RunResult
from .suite import local_runner

import numpy as np


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig
    policy: str
    seed: int


class RoundRow(BaseModel):
    round: int
    device: int
    eta: float
    upload_s: float
    round_s: float
    cum_s: float
    loss: float
    gap: float
    grad_norms: list[float]
    rho: float | None = None
    lam: float | None = None
    bound: float | None = None


class RunResponse(BaseModel):
    policy: str
    seed: int
    converged: bool
    rounds: int
    total_time_s: float
    logs: list[RoundRow]


class ScheduleRequest(BaseModel):
    """One scheduling decision from externally supplied round state."""

    model_config = ConfigDict(extra="forbid")

    policy: str
    gradient_norms: list[float]
    dataset_sizes: list[int]
    upload_s: list[float] | None = None
    gains: list[float] | None = None
    gain_threshold: float = 1e-15
    beta: float = 0.01
    # CTM-only convergence-bound constants.
    ell: float | None = None
    mu: float | None = None
    epsilon: float | None = None
    chi: float | None = None
    nu: float | None = None
    t: int | None = None
    t_future: float | None = None


class ScheduleResponse(BaseModel):
    policy: str
    probabilities: list[float]
    rho: float | None = None
    lam: float | None = Field(default=None, alias="lambda")
    model_config = ConfigDict(populate_by_name=True)


def _run_response(result: RunResult) -> RunResponse:
    return RunResponse(
        policy=result.policy,
        seed=result.seed,
        converged=result.converged,
        rounds=result.rounds,
        total_time_s=result.total_time_s,
        logs=[
            RoundRow(
                round=log.round, device=log.device, eta=log.eta,
                upload_s=log.upload_s, round_s=log.round_s, cum_s=log.cum_s,
                loss=log.loss, gap=log.gap, grad_norms=log.grad_norms,
                rho=log.rho, lam=log.lam, bound=log.bound,
            )
            for log in result.logs
        ],
    )


def _realization_from_request(req: ScheduleRequest) -> ChannelRealization:
    if req.upload_s is None:
        raise HTTPException(422, detail="upload_s required for this policy")
    upload = np.asarray(req.upload_s, dtype=float)
    gains = np.asarray(req.gains, dtype=float) if req.gains is not None \
        else np.full(len(upload), np.inf)
    with np.errstate(divide="ignore"):
        rate = np.where(upload > 0, 1.0 / upload, np.inf)
    return ChannelRealization(gains=gains, snr=gains, rate_bps_per_hz=rate, upload_s=upload)


def create_app() -> FastAPI:
    app = FastAPI(title="feel-sched", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/config/validate")
    def validate(config: ExperimentConfig) -> ExperimentConfig:
        return config

    @app.post("/runs")
    def run(req: RunRequest) -> RunResponse:
        if req.policy not in POLICIES:
            raise HTTPException(422, detail=f"unknown policy {req.policy!r}")
        try:
            result = local_runner(req.config, req.policy, req.seed)
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        return _run_response(result)

    @app.post("/schedule")
    def schedule(req: ScheduleRequest) -> ScheduleResponse:
        norms = np.asarray(req.gradient_norms, dtype=float)
        sizes = np.asarray(req.dataset_sizes, dtype=float)
        try:
            if req.policy == "uniform":
                dist = scheduler.uniform_policy(len(norms))
            elif req.policy == "ia":
                dist = scheduler.importance_aware_policy(norms, sizes)
            elif req.policy == "ca":
                dist = scheduler.channel_aware_policy(_realization_from_request(req))
            elif req.policy == "ica":
                dist = scheduler.ica_policy(
                    norms, sizes, _realization_from_request(req), req.beta
                )
            elif req.policy == "ctm":
                missing = [k for k in ("ell", "mu", "epsilon", "chi", "nu", "t", "t_future")
                           if getattr(req, k) is None]
                if missing:
                    raise HTTPException(422, detail=f"ctm requires fields: {missing}")
                bound = BoundParams(
                    ell=req.ell, mu=req.mu, epsilon=req.epsilon,
                    chi=req.chi, nu=req.nu, t=req.t,
                )
                comm = CommParams(
                    bandwidth_hz=1.0, bits_per_param=1, num_params=1,
                    noise_power_w=1.0, gain_threshold=req.gain_threshold,
                )
                dist, diag = scheduler.ctm_policy(
                    norms, sizes, _realization_from_request(req), comm, bound,
                    req.t_future, return_diagnostics=True,
                )
                return ScheduleResponse(
                    policy=dist.policy, probabilities=dist.probs.tolist(),
                    rho=diag["rho"], lam=diag["lambda"],
                )
            else:
                raise HTTPException(422, detail=f"unknown policy {req.policy!r}")
        except (AllGradientsZero, StarvationError, BisectionError, ValueError) as exc:
            raise HTTPException(409, detail=str(exc)) from exc
        return ScheduleResponse(policy=dist.policy, probabilities=dist.probs.tolist())

    return app


app = create_app()
