"""Federated robust regression against a norm-bounded adversary."""

from __future__ import annotations

import numpy as np

from ..core import check_weights
from ..errors import DimMismatch
from .base import Envelope, MinimaxProblem
from .constraints import Ball


def cauchy_loss(r):
    return np.log1p(0.5 * r * r)


def cauchy_dloss(r):
    return r / (1.0 + 0.5 * r * r)


class RobustRegression(MinimaxProblem):
    """Robust linear regression with a bounded perturbation ``y``, ``|y|^2 <= R``.

    Client ``i`` holds features ``a_j``, targets ``b_j`` and perturbation
    directions ``u_j``.  Its loss is

        f_i(x, y) = mean_j [ l(r_j) + r_j * <u_j, y> ],   r_j = <a_j, x> - b_j,

    with the nonconvex Cauchy loss ``l(r) = log(1 + r^2/2)``.  The perturbation
    enters through the first-order term of the perturbed loss, so ``f_i`` is
    linear (concave) in ``y`` and the envelope is

        Phi_w(x) = sum_i w_i mean_j l(r_j) + sqrt(R) * |c_w(x)|,

    with ``c_w(x) = sum_i w_i mean_j r_j u_j``: weakly convex, not strongly
    concave in y, which is the setting the Moreau-envelope metric targets.
    """

    kind = "robust_regression"
    smooth_envelope = False

    def __init__(self, features, targets, directions, radius_sq=1.0):
        self.features = [np.asarray(a, dtype=float) for a in features]
        self.targets = [np.asarray(b, dtype=float).ravel() for b in targets]
        self.directions = [np.asarray(u, dtype=float) for u in directions]
        if not (len(self.features) == len(self.targets) == len(self.directions)):
            raise DimMismatch("features, targets and directions need one entry per client")
        self.n = len(self.features)
        self.dim_x = self.features[0].shape[1]
        self.dim_y = self.directions[0].shape[1]
        for a, b, u in zip(self.features, self.targets, self.directions):
            if a.ndim != 2 or a.shape[1] != self.dim_x or a.shape[0] != b.size:
                raise DimMismatch("client feature/target shapes are inconsistent")
            if u.shape != (b.size, self.dim_y):
                raise DimMismatch("client perturbation directions have the wrong shape")
            if b.size == 0:
                raise DimMismatch("every client needs at least one sample")
        if not radius_sq > 0:
            raise ValueError("radius_sq must be positive")
        self.radius_sq = float(radius_sq)
        self.y_set = Ball(float(np.sqrt(radius_sq)))
        self._L = None

    @property
    def L_f(self):
        if self._L is None:
            L = 0.0
            for a, u in zip(self.features, self.directions):
                m = a.shape[0]
                L = max(L, np.linalg.norm(a.T @ a / m, 2) + np.linalg.norm(a.T @ u / m, 2))
            self._L = float(L)
        return self._L

    def _grad(self, i, x, y):
        a, b, u = self.features[i], self.targets[i], self.directions[i]
        m = b.size
        r = a @ x - b
        gx = a.T @ (cauchy_dloss(r) + u @ y) / m
        gy = u.T @ r / m
        return gx, gy

    def _value(self, i, x, y):
        a, b, u = self.features[i], self.targets[i], self.directions[i]
        r = a @ x - b
        return float(np.mean(cauchy_loss(r) + r * (u @ y)))

    def _stacked(self, w):
        w = check_weights(w)
        key = w.tobytes()
        cache = getattr(self, "_stack_cache", None)
        if cache is not None and cache[0] == key:
            return cache[1]
        keep = [i for i in range(self.n) if w[i] > 0]
        a = np.vstack([self.features[i] for i in keep])
        b = np.concatenate([self.targets[i] for i in keep])
        u = np.vstack([self.directions[i] for i in keep])
        s = np.concatenate([np.full(self.targets[i].size, w[i] / self.targets[i].size) for i in keep])
        M = u.T @ (s[:, None] * a)
        m = u.T @ (s * b)
        out = (a, b, s, M, m)
        self._stack_cache = (key, out)
        return out

    def envelope(self, w, x) -> Envelope:
        a, b, s, M, m = self._stacked(w)
        x = np.asarray(x, dtype=float)
        r = a @ x - b
        c = M @ x - m
        cn = float(np.linalg.norm(c))
        rho = np.sqrt(self.radius_sq)
        value = float(s @ cauchy_loss(r)) + rho * cn
        grad = a.T @ (s * cauchy_dloss(r))
        if cn > 0:
            grad = grad + rho * (M.T @ c) / cn
            y_star = rho * c / cn
        else:
            y_star = np.zeros(self.dim_y)
        return Envelope(value, grad, y_star)

    def to_dict(self):
        return {
            "kind": self.kind,
            "features": [a.tolist() for a in self.features],
            "targets": [b.tolist() for b in self.targets],
            "directions": [u.tolist() for u in self.directions],
            "radius_sq": self.radius_sq,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["features"], d["targets"], d["directions"], d.get("radius_sq", 1.0))

    @classmethod
    def generate(cls, n, dim_x, dim_y, samples_per_client=50, heterogeneity=0.0,
                 radius_sq=1.0, noise=0.1, seed=0):
        """Synthetic instance; client ground truths spread by ``heterogeneity``."""
        rng = np.random.default_rng(seed)
        x0 = rng.standard_normal(dim_x)
        G = rng.standard_normal((dim_y, dim_x)) / np.sqrt(dim_x)
        dev = rng.standard_normal((n, dim_x))
        if n > 1:
            dev -= dev.mean(axis=0)
        feats, targs, dirs = [], [], []
        for i in range(n):
            a = rng.standard_normal((samples_per_client, dim_x))
            truth = x0 + heterogeneity * dev[i]
            b = a @ truth + noise * rng.standard_normal(samples_per_client)
            u = (a @ G.T + rng.standard_normal((samples_per_client, dim_y))) / np.sqrt(dim_y)
            feats.append(a)
            targs.append(b)
            dirs.append(u)
        return cls(feats, targs, dirs, radius_sq)
