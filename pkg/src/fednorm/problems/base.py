"""Common oracle machinery for federated minimax problems.

A problem holds ``n`` local objectives ``f_i(x, y)`` and exposes exact
per-client gradients.  Stochastic gradients are the exact ones plus an
isotropic Gaussian perturbation whose total variance is
``sigma_L**2 + beta_L**2 * ||grad f_i||**2``, i.e. the local-variance bound
holds with equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import ParamPoint, check_weights
from ..errors import BadClientId, DimMismatch
from .constraints import ConstraintSet, Unconstrained, project


@dataclass(frozen=True)
class Envelope:
    """``max_y F_w(x, y)`` at a point, with its maximizer and (if smooth) gradient."""

    value: float
    grad: Optional[np.ndarray]
    y_star: np.ndarray


class MinimaxProblem:
    """Base class; subclasses implement ``_grad``, ``_value`` and ``envelope``."""

    kind = "abstract"
    #: True when the envelope of every weighted objective is differentiable
    #: with a reliable closed-form gradient (strongly concave in y).
    smooth_envelope = False

    n: int
    dim_x: int
    dim_y: int
    y_set: ConstraintSet = Unconstrained()

    # -- required hooks --------------------------------------------------

    def _grad(self, i: int, x: np.ndarray, y: np.ndarray):
        raise NotImplementedError

    def _value(self, i: int, x: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def envelope(self, w, x) -> Envelope:
        raise NotImplementedError

    @property
    def L_f(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # -- derived constants -------------------------------------------------

    @property
    def mu(self) -> Optional[float]:
        """Strong-concavity modulus in y, or None when not strongly concave."""
        return None

    @property
    def kappa(self) -> Optional[float]:
        return None if self.mu is None else self.L_f / self.mu

    @property
    def L_phi(self) -> Optional[float]:
        """Smoothness of the envelope, ``kappa L_f / 2 + L_f``."""
        k = self.kappa
        return None if k is None else k * self.L_f / 2 + self.L_f

    # -- oracle surface ------------------------------------------------------

    def _check(self, client_id, point: ParamPoint):
        if not (0 <= int(client_id) < self.n) or int(client_id) != client_id:
            raise BadClientId(f"client id {client_id} outside [0, {self.n})")
        if point.x.shape != (self.dim_x,) or point.y.shape != (self.dim_y,):
            raise DimMismatch(
                f"expected x in R^{self.dim_x}, y in R^{self.dim_y}; "
                f"got {point.x.shape}, {point.y.shape}"
            )

    def exact_grad(self, client_id: int, point: ParamPoint):
        self._check(client_id, point)
        return self._grad(int(client_id), point.x, point.y)

    def stoch_grad(self, client_id, point, sigma_L, beta_L, rng):
        if sigma_L < 0 or beta_L < 0:
            raise ValueError("noise scales must be nonnegative")
        self._check(client_id, point)
        gx, gy = self._grad(int(client_id), point.x, point.y)
        return add_noise(gx, gy, sigma_L, beta_L, rng)

    def value(self, client_id: int, point: ParamPoint) -> float:
        self._check(client_id, point)
        return self._value(int(client_id), point.x, point.y)

    def weighted_value(self, w, point: ParamPoint) -> float:
        w = check_weights(w)
        return float(sum(wi * self._value(i, point.x, point.y) for i, wi in enumerate(w) if wi))

    def weighted_grad(self, w, point: ParamPoint):
        w = check_weights(w)
        gx = np.zeros(self.dim_x)
        gy = np.zeros(self.dim_y)
        for i, wi in enumerate(w):
            if wi:
                a, b = self._grad(i, point.x, point.y)
                gx += wi * a
                gy += wi * b
        return gx, gy

    def project_y(self, y: np.ndarray) -> np.ndarray:
        if isinstance(self.y_set, Unconstrained):
            return y
        return project(self.y_set, y)


def add_noise(gx, gy, sigma_L, beta_L, rng):
    """Perturb an exact gradient pair; a no-op (and no draws) when both scales are 0."""
    if sigma_L == 0 and beta_L == 0:
        return gx, gy
    d = gx.size + gy.size
    total_var = sigma_L**2 + beta_L**2 * (gx @ gx + gy @ gy)
    z = rng.standard_normal(d) * np.sqrt(total_var / d)
    return gx + z[: gx.size], gy + z[gx.size :]
