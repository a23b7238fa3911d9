"""Numeric types and weight algebra shared by clients, server and analysis.

Client weights are plain 1-D float arrays that sum to one; the helpers here
construct and check them.  An aggregation vector holds the per-step weights a
local optimizer assigns to its stochastic gradients, from which the server
derives the effective number of local steps and the surrogate weights that
the federated iteration actually optimizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import (
    DimMismatch,
    EmptyInput,
    InvalidTau,
    LengthMismatch,
    NegativeEntry,
    NonPositiveSum,
)

WEIGHT_TOL = 1e-12

NORMALIZED = "normalized"
NAIVE = "naive"
WEIGHT_MODES = (NORMALIZED, NAIVE)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ParamPoint:
    """The optimization state ``(x, y)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or y.ndim != 1:
            raise DimMismatch("x and y must be 1-D vectors")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))

    def __eq__(self, other):
        if not isinstance(other, ParamPoint):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    __hash__ = None


# --- local optimizers and step-count rules ---------------------------------


@dataclass(frozen=True)
class Sgda:
    """Plain local SGDA; every local gradient gets weight one."""

    kind = "sgda"


@dataclass(frozen=True)
class MomentumSgda:
    """Local SGDA with a heavy-ball buffer of scale ``rho``."""

    rho: float
    kind = "momentum"

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"momentum rho must lie in [0, 1), got {self.rho}")


LocalOptimizerKind = Union[Sgda, MomentumSgda]


@dataclass(frozen=True)
class FixedTau:
    tau: int

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise InvalidTau(f"fixed tau must be a positive integer, got {self.tau}")

    def draw(self, rng=None) -> int:
        return int(self.tau)

    @property
    def mean(self) -> float:
        return float(self.tau)


@dataclass(frozen=True)
class UniformTau:
    """``tau`` drawn uniformly from the integers ``lo..hi`` (inclusive) each round."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 1 or self.hi < self.lo:
            raise InvalidTau(f"need 1 <= lo <= hi, got lo={self.lo}, hi={self.hi}")

    def draw(self, rng) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


TauRule = Union[FixedTau, UniformTau]


@dataclass(frozen=True)
class ClientSpec:
    p: float
    tau: TauRule = field(default_factory=lambda: FixedTau(1))
    optimizer: LocalOptimizerKind = field(default_factory=Sgda)


# --- aggregation vectors -----------------------------------------------------


@dataclass(frozen=True)
class AggregationVector:
    """Per-step gradient weights ``a^(0..tau-1)`` with cached norms."""

    a: np.ndarray
    l1: float = field(init=False)
    l2sq: float = field(init=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if a.ndim != 1 or a.size < 1:
            raise InvalidTau("aggregation vector needs at least one entry")
        if np.any(a <= 0):
            raise ValueError("aggregation weights must be positive")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "l1", float(a.sum()))
        object.__setattr__(self, "l2sq", float(a @ a))

    @property
    def tau(self) -> int:
        return self.a.size

    @property
    def head(self) -> np.ndarray:
        """All weights except the last one (empty when tau == 1)."""
        return self.a[:-1]


def momentum_l1(rho: float, tau: int) -> float:
    """Closed-form l1 norm of the momentum aggregation vector."""
    if rho == 0.0:
        return float(tau)
    return (tau - rho * (1.0 - rho**tau) / (1.0 - rho)) / (1.0 - rho)


@lru_cache(maxsize=1024)
def make_aggregation_vector(kind: LocalOptimizerKind, tau: int) -> AggregationVector:
    # cached: vectors are immutable and rebuilt for every client in every round
    if int(tau) != tau or tau < 1:
        raise InvalidTau(f"tau must be a positive integer, got {tau}")
    tau = int(tau)
    if isinstance(kind, Sgda):
        return AggregationVector(np.ones(tau))
    if isinstance(kind, MomentumSgda):
        rho = kind.rho
        # a^(k) = 1 + rho + ... + rho^(tau-1-k), summed directly to stay exact at rho=0
        remaining = np.arange(tau, 0, -1)
        if rho == 0.0:
            return AggregationVector(np.ones(tau))
        return AggregationVector((1.0 - rho**remaining) / (1.0 - rho))
    raise TypeError(f"unknown local optimizer {kind!r}")


# --- client weights ----------------------------------------------------------


def normalize_weights(raw: Sequence[float]) -> np.ndarray:
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0:
        raise EmptyInput("weight vector is empty")
    if np.any(raw < 0):
        raise NegativeEntry("client weights must be nonnegative")
    total = raw.sum()
    if not total > 0:
        raise NonPositiveSum("client weights must have a positive sum")
    return _frozen(raw / total)


def check_weights(p) -> np.ndarray:
    """Validate an already-normalized weight vector without renormalizing it."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise EmptyInput("weight vector is empty")
    if np.any(p < 0):
        raise NegativeEntry("client weights must be nonnegative")
    if abs(p.sum() - 1.0) > WEIGHT_TOL:
        raise NonPositiveSum(f"client weights sum to {p.sum()!r}, not 1")
    return p


def _pair(p, l1s):
    p = np.asarray(p, dtype=float).ravel()
    l1s = np.asarray(l1s, dtype=float).ravel()
    if p.shape != l1s.shape:
        raise LengthMismatch(f"{p.size} weights but {l1s.size} l1 norms")
    if np.any(l1s <= 0):
        raise ValueError("aggregation l1 norms must be positive")
    return p, l1s


def effective_steps(p, l1s) -> float:
    """Population-weighted local progress ``sum_j p_j ||a_j||_1``."""
    p, l1s = _pair(p, l1s)
    return float(p @ l1s)


def surrogate_weights(mode: str, p, l1s) -> np.ndarray:
    """Weights ``w`` of the objective the server iteration actually targets.

    Normalized aggregation keeps ``w = p``.  Naive aggregation (plain local
    SGDA averaging) tilts each client by its local progress,
    ``w_i = p_i ||a_i||_1 / tau_eff``.
    """
    p, l1s = _pair(p, l1s)
    if mode == NORMALIZED:
        return p.copy()
    if mode == NAIVE:
        raw = p * l1s
        return raw / raw.sum()
    raise ValueError(f"unknown weight mode {mode!r}; expected one of {WEIGHT_MODES}")
