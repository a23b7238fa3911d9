"""Communication rounds: sampling, weighted aggregation and server steps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as streams
from .core import (
    NAIVE,
    NORMALIZED,
    WEIGHT_MODES,
    ClientSpec,
    FixedTau,
    ParamPoint,
    effective_steps,
    make_aggregation_vector,
    normalize_weights,
    surrogate_weights,
)
from .errors import BadP, ConfigError, NonFinite, SetMismatch
from .local_update import FED_NORM_SGDA, FED_NORM_SGDA_PLUS, VARIANTS, LocalRunConfig, run_local
from .problems.constraints import Unconstrained, project


@dataclass(frozen=True)
class ServerConfig:
    gamma_x: float
    gamma_y: float
    eta_x: float
    eta_y: float
    P: int
    T: int
    S: int = 1
    weight_mode: str = NORMALIZED
    variant: str = FED_NORM_SGDA

    def validate(self, n: int):
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if not 1 <= self.P <= n:
            raise ConfigError(f"P must lie in [1, {n}], got {self.P}")
        if self.S < 1:
            raise ConfigError("S must be at least 1")
        if min(self.gamma_x, self.gamma_y, self.eta_x, self.eta_y) <= 0:
            raise ConfigError("learning rates must be positive")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"unknown weight mode {self.weight_mode!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")


@dataclass
class RoundRecord:
    round: int
    sampled: tuple
    tau_eff: float
    x: np.ndarray
    y: np.ndarray
    snapshot_x: Optional[np.ndarray] = None
    metrics: object = None


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    x_bar: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    deviations: tuple = ()

    @property
    def final(self) -> ParamPoint:
        r = self.records[-1]
        return ParamPoint(r.x, r.y)

    def iterate(self, t: int) -> ParamPoint:
        """Server state ``(x^(t), y^(t))`` at the start of round ``t``."""
        if t == 0:
            return ParamPoint(self.x0, self.y0)
        r = self.records[t - 1]
        return ParamPoint(r.x, r.y)


def sample_clients(n: int, P: int, rng) -> tuple:
    """Uniform size-P subset of ``range(n)`` without replacement, sorted."""
    if not 1 <= P <= n:
        raise BadP(f"cannot sample {P} of {n} clients")
    if P == n:
        return tuple(range(n))
    return tuple(sorted(int(i) for i in rng.choice(n, size=P, replace=False)))


def aggregate(updates: Sequence, w, n: int, P: int, sampled=None):
    """Unbiased estimate of ``sum_i w_i d_i`` from the sampled clients' updates."""
    ids = [u.client_id for u in updates]
    if len(ids) != P or len(set(ids)) != P:
        raise SetMismatch(f"expected {P} distinct client updates, got {ids}")
    if sampled is not None and sorted(ids) != sorted(sampled):
        raise SetMismatch(f"updates from {sorted(ids)} but sampled {sorted(sampled)}")
    scale = n / P
    d_x = sum(scale * w[u.client_id] * u.d_x for u in updates)
    d_y = sum(scale * w[u.client_id] * u.d_y for u in updates)
    return d_x, d_y


def server_step(point: ParamPoint, d_x, d_y, gamma_x, gamma_y, tau_eff, y_set=None) -> ParamPoint:
    if not tau_eff > 0:
        raise ValueError("tau_eff must be positive")
    if not (np.isfinite(d_x).all() and np.isfinite(d_y).all()):
        raise NonFinite("non-finite aggregate direction")
    x = point.x - tau_eff * gamma_x * d_x
    y = point.y + tau_eff * gamma_y * d_y
    if y_set is not None and not isinstance(y_set, Unconstrained):
        y = project(y_set, y)
    out = ParamPoint(x, y)
    if not out.finite:
        raise NonFinite("server step produced a non-finite iterate")
    return out


def _draw_taus(clients, seed, t):
    taus = []
    for i, spec in enumerate(clients):
        if isinstance(spec.tau, FixedTau):
            taus.append(spec.tau.tau)
        else:
            taus.append(spec.tau.draw(streams.stream(seed, streams.TAU, t, i)))
    return taus


def run_training(
    problem,
    clients: Sequence[ClientSpec],
    cfg: ServerConfig,
    noise=(0.0, 0.0),
    master_seed: int = 0,
    x0=None,
    y0=None,
    metric_fn: Optional[Callable] = None,
    log_rounds=None,
    threads: int = 1,
) -> Trajectory:
    """Run ``cfg.T`` rounds of Fed-Norm-SGDA (or its plus variant).

    ``metric_fn(t, point, w)`` is called on the pre-update iterate of every
    round in ``log_rounds`` (all rounds if None) with that round's surrogate
    weights; its result is stored on the record.
    Per-round randomness comes from streams keyed by (seed, round, client), so
    the trajectory is identical for any ``threads`` value.
    """
    n = problem.n
    if len(clients) != n:
        raise ConfigError(f"{len(clients)} client specs for a problem with {n} clients")
    cfg.validate(n)
    p = normalize_weights([c.p for c in clients])
    sigma_L, beta_L = noise
    noisy = bool(sigma_L or beta_L)
    plus = cfg.variant == FED_NORM_SGDA_PLUS
    log_rounds = None if log_rounds is None else set(log_rounds)

    x = np.zeros(problem.dim_x) if x0 is None else np.asarray(x0, dtype=float)
    y = np.zeros(problem.dim_y) if y0 is None else np.asarray(y0, dtype=float)
    point = ParamPoint(x, problem.project_y(y))
    traj = Trajectory(x0=point.x, y0=point.y)
    if not isinstance(problem.y_set, Unconstrained):
        traj.deviations = ("y_projection",)
    snapshot = None

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for t in range(cfg.T):
            taus = _draw_taus(clients, master_seed, t)
            avecs = [make_aggregation_vector(c.optimizer, k) for c, k in zip(clients, taus)]
            l1s = [a.l1 for a in avecs]
            tau_eff = effective_steps(p, l1s)
            w = surrogate_weights(cfg.weight_mode, p, l1s)
            sample_rng = streams.stream(master_seed, streams.SAMPLE, t) if cfg.P < n else None
            sampled = sample_clients(n, cfg.P, sample_rng)
            if plus and t % cfg.S == 0:
                snapshot = point.x.copy()

            metrics = None
            if metric_fn is not None and (log_rounds is None or t in log_rounds):
                metrics = metric_fn(t, point, w)

            def local(i, point=point, snapshot=snapshot, t=t):
                lcfg = LocalRunConfig(
                    cfg.eta_x, cfg.eta_y, taus[i], clients[i].optimizer, cfg.variant,
                    snapshot if plus else None,
                )
                rng = streams.stream(master_seed, streams.NOISE, t, i) if noisy else None
                return run_local(problem, i, point, lcfg, noise, rng)

            try:
                if pool is None:
                    updates = [local(i) for i in sampled]
                else:
                    updates = list(pool.map(local, sampled))
                d_x, d_y = aggregate(updates, w, n, cfg.P, sampled)
                point = server_step(point, d_x, d_y, cfg.gamma_x, cfg.gamma_y, tau_eff, problem.y_set)
            except NonFinite as exc:
                raise NonFinite(f"round {t}: {exc}", round=t) from exc

            traj.records.append(
                RoundRecord(t, sampled, tau_eff, point.x, point.y,
                            None if snapshot is None else snapshot.copy(), metrics)
            )
    finally:
        if pool is not None:
            pool.shutdown()

    pick = streams.stream(master_seed, streams.RETURN).integers(cfg.T)
    traj.x_bar = traj.records[pick].x
    return traj


__all__ = [
    "NAIVE", "NORMALIZED", "FED_NORM_SGDA", "FED_NORM_SGDA_PLUS", "RoundRecord",
    "ServerConfig", "Trajectory", "aggregate", "run_training", "sample_clients", "server_step",
]
