"""Euclidean projections onto the y-constraint sets used by the problems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import BadSet


@dataclass(frozen=True)
class Unconstrained:
    kind = "unconstrained"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Ball:
    """Euclidean ball ``{v : ||v|| <= radius}`` centred at the origin."""

    radius: float
    kind = "ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise BadSet(f"ball radius must be positive, got {self.radius}")

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius}


@dataclass(frozen=True)
class Box:
    lo: float
    hi: float
    kind = "box"

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise BadSet(f"box needs lo <= hi, got [{self.lo}, {self.hi}]")

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Simplex:
    kind = "simplex"

    def to_dict(self):
        return {"kind": self.kind}


ConstraintSet = Union[Unconstrained, Ball, Box, Simplex]


def constraint_from_dict(d) -> ConstraintSet:
    if d is None:
        return Unconstrained()
    kind = d.get("kind")
    if kind == "unconstrained":
        return Unconstrained()
    if kind == "ball":
        return Ball(float(d["radius"]))
    if kind == "box":
        return Box(float(d["lo"]), float(d["hi"]))
    if kind == "simplex":
        return Simplex()
    raise BadSet(f"unknown constraint set {kind!r}")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Projection onto the probability simplex by the sort-and-threshold rule."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project(cset: ConstraintSet, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if isinstance(cset, Unconstrained):
        return v.copy()
    if isinstance(cset, Ball):
        norm = np.linalg.norm(v)
        if norm <= cset.radius:
            return v.copy()
        return v * (cset.radius / norm)
    if isinstance(cset, Box):
        return np.clip(v, cset.lo, cset.hi)
    if isinstance(cset, Simplex):
        if v.ndim != 1 or v.size < 1:
            raise BadSet("simplex projection needs a nonempty vector")
        return project_simplex(v)
    raise BadSet(f"unknown constraint set {cset!r}")
