"""Experiment configuration: a single UTF-8 JSON document.

Structural checks come from pydantic; cross-field checks (participation vs.
client count, sweep combinations, problem construction) run afterwards and
are reported together with the structural errors, each tagged with its field
path.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field

from ..core import (
    ClientSpec,
    FixedTau,
    MomentumSgda,
    Sgda,
    UniformTau,
    normalize_weights,
)
from ..errors import ParseError, ValidationError
from ..problems import PROBLEM_KINDS

MAX_LOGGED_ROUNDS = 1000


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TauSpec(_Model):
    """Either ``fixed`` (one value, or one per client) or ``uniform: [lo, hi]``."""

    fixed: Optional[Union[int, List[int]]] = None
    uniform: Optional[List[int]] = None

    @pydantic.model_validator(mode="after")
    def _one_rule(self):
        if (self.fixed is None) == (self.uniform is None):
            raise ValueError("give exactly one of 'fixed' or 'uniform'")
        if self.uniform is not None:
            if len(self.uniform) != 2 or not 1 <= self.uniform[0] <= self.uniform[1]:
                raise ValueError("uniform must be [lo, hi] with 1 <= lo <= hi")
        if self.fixed is not None:
            vals = self.fixed if isinstance(self.fixed, list) else [self.fixed]
            if not vals or min(vals) < 1:
                raise ValueError("fixed tau values must be >= 1")
        return self

    def rules(self, n):
        if self.uniform is not None:
            return [UniformTau(*self.uniform)] * n
        if isinstance(self.fixed, list):
            if len(self.fixed) != n:
                raise ValueError(f"{len(self.fixed)} fixed tau values for {n} clients")
            return [FixedTau(k) for k in self.fixed]
        return [FixedTau(self.fixed)] * n

    def label(self):
        if self.uniform is not None:
            return f"uniform:{self.uniform[0]}-{self.uniform[1]}"
        if isinstance(self.fixed, list):
            return "fixed:" + "/".join(str(k) for k in self.fixed)
        return f"fixed:{self.fixed}"


class OptimizerSpec(_Model):
    kind: Literal["sgda", "momentum"] = "sgda"
    rho: float = Field(0.0, ge=0.0, lt=1.0)

    def build(self):
        return Sgda() if self.kind == "sgda" else MomentumSgda(self.rho)


class ProblemSpec(_Model):
    """``generate`` holds generator keyword arguments; ``data`` an explicit instance."""

    kind: Literal["quadratic", "robust_regression", "fair_softmax"]
    generate: Optional[Dict[str, Any]] = None
    data: Optional[Dict[str, Any]] = None

    @pydantic.model_validator(mode="after")
    def _one_source(self):
        if (self.generate is None) == (self.data is None):
            raise ValueError("give exactly one of 'generate' or 'data'")
        return self

    def build(self, alpha=None):
        cls = PROBLEM_KINDS[self.kind]
        if self.data is not None:
            return cls.from_dict({"kind": self.kind, **self.data})
        kwargs = dict(self.generate)
        if alpha is not None:
            kwargs["alpha"] = alpha
        return cls.generate(**kwargs)


class ClientsSpec(_Model):
    weights: Optional[List[float]] = None
    tau: TauSpec = TauSpec(fixed=1)
    optimizer: OptimizerSpec = OptimizerSpec()
    eta_x: float = Field(gt=0)
    eta_y: float = Field(gt=0)


class ServerSpec(_Model):
    gamma_x: float = Field(gt=0)
    gamma_y: float = Field(gt=0)
    T: int = Field(ge=1)
    P: Optional[int] = Field(None, ge=1)
    S: Union[int, Literal["auto"]] = 1
    weight_mode: Literal["normalized", "naive"] = "normalized"
    variant: Literal["fed_norm_sgda", "fed_norm_sgda_plus"] = "fed_norm_sgda"

    @pydantic.field_validator("S")
    @classmethod
    def _positive_S(cls, v):
        if v != "auto" and v < 1:
            raise ValueError("S must be >= 1 or 'auto'")
        return v


class NoiseSpec(_Model):
    sigma_L: float = Field(0.0, ge=0)
    beta_L: float = Field(0.0, ge=0)


class SweepSpec(_Model):
    P: Optional[List[int]] = None
    tau: Optional[List[TauSpec]] = None
    alpha: Optional[List[float]] = None
    weight_mode: Optional[List[Literal["normalized", "naive"]]] = None
    variant: Optional[List[Literal["fed_norm_sgda", "fed_norm_sgda_plus"]]] = None


class LoggingSpec(_Model):
    every: Optional[int] = Field(None, ge=1)
    moreau: bool = True
    record_wallclock: bool = False


class InitSpec(_Model):
    x0: Optional[List[float]] = None
    y0: Optional[List[float]] = None


class OutputSpec(_Model):
    dir: str = "results"
    csv: str = "results.csv"


class ExperimentConfig(_Model):
    experiment_id: str = "experiment"
    problem: ProblemSpec
    clients: ClientsSpec
    server: ServerSpec
    noise: NoiseSpec = NoiseSpec()
    sweep: SweepSpec = SweepSpec()
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    logging: LoggingSpec = LoggingSpec()
    init: InitSpec = InitSpec()
    output: OutputSpec = OutputSpec()

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# --- sweep expansion -----------------------------------------------------------

SWEEP_AXES = ("P", "tau", "alpha", "weight_mode", "variant")


class SweepPoint:
    """One fully resolved run configuration (everything except the seed)."""

    def __init__(self, cfg: ExperimentConfig, overrides: dict):
        self.cfg = cfg
        self.overrides = overrides
        parts = []
        for axis in SWEEP_AXES:
            if axis in overrides:
                v = overrides[axis]
                parts.append(f"{axis}={v.label() if isinstance(v, TauSpec) else v}")
        self.label = ";".join(parts) if parts else "base"

    @property
    def alpha(self):
        return self.overrides.get("alpha")

    @property
    def tau(self) -> TauSpec:
        return self.overrides.get("tau", self.cfg.clients.tau)

    @property
    def weight_mode(self):
        return self.overrides.get("weight_mode", self.cfg.server.weight_mode)

    @property
    def variant(self):
        return self.overrides.get("variant", self.cfg.server.variant)

    def participation(self, n):
        P = self.overrides.get("P", self.cfg.server.P)
        return n if P is None else P

    def snapshot_period(self, n):
        S = self.cfg.server.S
        if S == "auto":
            return max(1, math.ceil(math.sqrt(self.cfg.server.T / self.participation(n))))
        return S

    def build_problem(self):
        return self.cfg.problem.build(self.alpha)

    def build_clients(self, n):
        weights = self.cfg.clients.weights
        p = normalize_weights([1.0] * n if weights is None else weights)
        taus = self.tau.rules(n)
        opt = self.cfg.clients.optimizer.build()
        return [ClientSpec(float(p[i]), taus[i], opt) for i in range(n)]


def sweep_points(cfg: ExperimentConfig) -> List[SweepPoint]:
    axes = [(a, getattr(cfg.sweep, a)) for a in SWEEP_AXES if getattr(cfg.sweep, a)]
    if not axes:
        return [SweepPoint(cfg, {})]
    names = [a for a, _ in axes]
    return [SweepPoint(cfg, dict(zip(names, combo))) for combo in itertools.product(*(v for _, v in axes))]


def log_rounds(T: int, every: Optional[int] = None) -> List[int]:
    """Logged rounds: every ``every`` rounds (default: every round up to 1000
    rounds, else every ceil(T/1000)), always including 0 and T-1."""
    if every is None:
        every = 1 if T <= MAX_LOGGED_ROUNDS else math.ceil(T / MAX_LOGGED_ROUNDS)
    rounds = set(range(0, T, every))
    rounds.add(T - 1)
    return sorted(rounds)


# --- loading and validation --------------------------------------------------


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def _semantic_errors(cfg: ExperimentConfig):
    errors = []
    if cfg.problem.data is None and cfg.problem.kind != "fair_softmax" and cfg.sweep.alpha:
        errors.append(("sweep.alpha", "alpha sweeps need a generated fair_softmax problem"))
    if cfg.problem.data is not None and cfg.sweep.alpha:
        errors.append(("sweep.alpha", "alpha sweeps need a generated problem"))
    points = sweep_points(cfg)
    problems = {}
    for sp in points:
        key = sp.alpha
        if key not in problems:
            try:
                problems[key] = sp.build_problem()
            except Exception as exc:  # construction errors are reported, not raised
                problems[key] = None
                errors.append(("problem", f"cannot build problem: {exc}"))
        prob = problems[key]
        if prob is None:
            continue
        n = prob.n
        where = "" if sp.label == "base" else f" (sweep point {sp.label})"
        P = sp.participation(n)
        if not 1 <= P <= n:
            field = "sweep.P" if "P" in sp.overrides else "server.P"
            errors.append((field, f"P={P} must lie in [1, {n}]{where}"))
        if cfg.clients.weights is not None and len(cfg.clients.weights) != n:
            errors.append(("clients.weights", f"{len(cfg.clients.weights)} weights for {n} clients"))
        elif cfg.clients.weights is not None:
            try:
                normalize_weights(cfg.clients.weights)
            except Exception as exc:
                errors.append(("clients.weights", str(exc)))
        try:
            sp.tau.rules(n)
        except Exception as exc:
            field = "sweep.tau" if "tau" in sp.overrides else "clients.tau"
            errors.append((field, f"{exc}{where}"))
        if cfg.init.x0 is not None and len(cfg.init.x0) != prob.dim_x:
            errors.append(("init.x0", f"expected {prob.dim_x} entries"))
        if cfg.init.y0 is not None and len(cfg.init.y0) != prob.dim_y:
            errors.append(("init.y0", f"expected {prob.dim_y} entries"))
    # one message per (field, text)
    seen, unique = set(), []
    for e in errors:
        if e not in seen:
            seen.add(e)
            unique.append(e)
    return unique


def parse_config(obj) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ParseError("config root must be a JSON object")
    try:
        cfg = ExperimentConfig.model_validate(obj)
    except pydantic.ValidationError as exc:
        raise ValidationError([(_loc(e["loc"]), e["msg"]) for e in exc.errors()]) from None
    errors = _semantic_errors(cfg)
    if errors:
        raise ValidationError(errors)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_config(obj)


def dump_config(cfg: ExperimentConfig, path=None) -> str:
    text = json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


__all__ = [
    "ExperimentConfig", "SweepPoint", "TauSpec", "dump_config", "load_config",
    "log_rounds", "parse_config", "sweep_points",
]
