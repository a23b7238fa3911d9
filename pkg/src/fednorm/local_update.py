"""One client's local loop and its normalized round update."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import LocalOptimizerKind, MomentumSgda, ParamPoint, Sgda, make_aggregation_vector
from .errors import DimMismatch, MissingSnapshot, NonFinite
from .problems.base import add_noise

FED_NORM_SGDA = "fed_norm_sgda"
FED_NORM_SGDA_PLUS = "fed_norm_sgda_plus"
VARIANTS = (FED_NORM_SGDA, FED_NORM_SGDA_PLUS)


@dataclass(frozen=True)
class LocalRunConfig:
    eta_x: float
    eta_y: float
    tau: int
    optimizer: LocalOptimizerKind = Sgda()
    variant: str = FED_NORM_SGDA
    snapshot_x: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.eta_x > 0 and self.eta_y > 0):
            raise ValueError("client learning rates must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == FED_NORM_SGDA_PLUS and self.snapshot_x is None:
            raise MissingSnapshot("the plus variant needs the x snapshot")


@dataclass(frozen=True)
class RoundUpdate:
    client_id: int
    d_x: np.ndarray
    d_y: np.ndarray
    a_l1: float
    tau_used: int


def run_local(problem, client_id, start: ParamPoint, cfg: LocalRunConfig,
              noise=(0.0, 0.0), rng=None) -> RoundUpdate:
    """Run ``cfg.tau`` local SGDA steps from ``start`` and return the normalized
    gradient aggregates.

    Gradients are drawn at the live iterate; in the plus variant the y-gradient
    is taken at ``(snapshot_x, y_k)`` instead.  With momentum, iterates move by
    the buffer, and the aggregate is the sum of buffers divided by the l1 norm
    of the matching aggregation vector.  If the problem constrains y, each
    local y step is projected back onto the set.
    """
    sigma_L, beta_L = noise
    problem._check(client_id, start)
    plus = cfg.variant == FED_NORM_SGDA_PLUS
    if plus:
        snap = np.asarray(cfg.snapshot_x, dtype=float)
        if snap.shape != (problem.dim_x,):
            raise DimMismatch(f"snapshot must be in R^{problem.dim_x}")
    if rng is None and (sigma_L or beta_L):
        raise ValueError("a random stream is required when noise is enabled")

    avec = make_aggregation_vector(cfg.optimizer, cfg.tau)
    rho = cfg.optimizer.rho if isinstance(cfg.optimizer, MomentumSgda) else None
    grad = problem._grad
    x = start.x.copy()
    y = start.y.copy()
    sum_x = np.zeros_like(x)
    sum_y = np.zeros_like(y)
    if rho is not None:
        buf_x = np.zeros_like(x)
        buf_y = np.zeros_like(y)

    for _ in range(avec.tau):
        gx, gy = add_noise(*grad(client_id, x, y), sigma_L, beta_L, rng)
        if plus:
            _, gy = add_noise(*grad(client_id, snap, y), sigma_L, beta_L, rng)
        if rho is None:
            step_x, step_y = gx, gy
        else:
            buf_x = rho * buf_x + gx
            buf_y = rho * buf_y + gy
            step_x, step_y = buf_x, buf_y
        x = x - cfg.eta_x * step_x
        y = problem.project_y(y + cfg.eta_y * step_y)
        sum_x += step_x
        sum_y += step_y

    d_x = sum_x / avec.l1
    d_y = sum_y / avec.l1
    if not (np.isfinite(d_x).all() and np.isfinite(d_y).all()):
        raise NonFinite(f"client {client_id} produced a non-finite update")
    return RoundUpdate(int(client_id), d_x, d_y, avec.l1, avec.tau)


def momentum_reference(grads, rho) -> np.ndarray:
    """Aggregate a recorded gradient sequence with the closed-form momentum weights.

    ``grads`` has one row per local step.  This is the weight-vector view of
    the buffer recursion in ``run_local`` and is used to cross-check it.
    """
    g = np.asarray(grads, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
        squeeze = True
    else:
        squeeze = False
    if g.shape[0] < 1:
        raise ValueError("need at least one gradient")
    avec = make_aggregation_vector(MomentumSgda(rho), g.shape[0])
    out = avec.a @ g / avec.l1
    return out[0] if squeeze else out
