"""Federated quadratic saddle problems with closed-form envelopes."""

from __future__ import annotations

import numpy as np

from ..core import check_weights
from ..errors import DimMismatch, IndefiniteEnvelope
from .base import Envelope, MinimaxProblem


class QuadraticSaddle(MinimaxProblem):
    """``f_i(x, y) = x'A_i x / 2 + x'B_i y - mu |y|^2 / 2 + c_i'x + e_i'y``.

    Arrays are stacked over clients: ``A`` is (n, dx, dx), ``B`` (n, dx, dy),
    ``c`` (n, dx), ``e`` (n, dy).  ``mu > 0`` makes every ``f_i`` strongly
    concave in y, so the envelope ``max_y sum_i w_i f_i`` is an explicit
    quadratic in x.
    """

    kind = "quadratic"
    smooth_envelope = True

    def __init__(self, A, B, c, e, mu):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        c = np.asarray(c, dtype=float)
        e = np.asarray(e, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise DimMismatch("A must have shape (n, dx, dx)")
        n, dx, _ = A.shape
        if B.ndim != 3 or B.shape[:2] != (n, dx):
            raise DimMismatch("B must have shape (n, dx, dy)")
        dy = B.shape[2]
        if c.shape != (n, dx) or e.shape != (n, dy):
            raise DimMismatch("c must be (n, dx) and e must be (n, dy)")
        if not np.allclose(A, np.swapaxes(A, 1, 2)):
            raise ValueError("each A_i must be symmetric")
        if not mu > 0:
            raise ValueError("mu must be positive")
        self.A, self.B, self.c, self.e = A, B, c, e
        self._mu = float(mu)
        self.n, self.dim_x, self.dim_y = n, dx, dy
        for arr in (self.A, self.B, self.c, self.e):
            arr.flags.writeable = False
        self._L = None

    @property
    def mu(self):
        return self._mu

    @property
    def L_f(self) -> float:
        if self._L is None:
            L = 0.0
            for i in range(self.n):
                H = np.block(
                    [[self.A[i], self.B[i]], [self.B[i].T, -self._mu * np.eye(self.dim_y)]]
                )
                L = max(L, float(np.linalg.norm(H, 2)))
            self._L = L
        return self._L

    def _grad(self, i, x, y):
        gx = self.A[i] @ x + self.B[i] @ y + self.c[i]
        gy = self.B[i].T @ x - self._mu * y + self.e[i]
        return gx, gy

    def _value(self, i, x, y):
        return float(
            0.5 * x @ self.A[i] @ x
            + x @ self.B[i] @ y
            - 0.5 * self._mu * y @ y
            + self.c[i] @ x
            + self.e[i] @ y
        )

    def weighted(self, w):
        """w-weighted coefficient sums (A_w, B_w, c_w, e_w)."""
        w = check_weights(w)
        return (
            np.tensordot(w, self.A, 1),
            np.tensordot(w, self.B, 1),
            w @ self.c,
            w @ self.e,
        )

    def envelope_hessian(self, w) -> np.ndarray:
        A, B, _, _ = self.weighted(w)
        return A + B @ B.T / self._mu

    def envelope(self, w, x) -> Envelope:
        A, B, c, e = self.weighted(w)
        x = np.asarray(x, dtype=float)
        H = A + B @ B.T / self._mu
        if np.linalg.eigvalsh(H).min() <= 0:
            raise IndefiniteEnvelope("envelope Hessian is not positive definite")
        s = B.T @ x + e
        y_star = s / self._mu
        value = 0.5 * x @ A @ x + c @ x + 0.5 * s @ s / self._mu
        grad = H @ x + c + B @ e / self._mu
        return Envelope(float(value), grad, y_star)

    def minimizer(self, w) -> np.ndarray:
        """Unique minimizer of the w-weighted envelope."""
        A, B, c, e = self.weighted(w)
        H = A + B @ B.T / self._mu
        if np.linalg.eigvalsh(H).min() <= 0:
            raise IndefiniteEnvelope("envelope Hessian is not positive definite")
        return np.linalg.solve(H, -(c + B @ e / self._mu))

    def to_dict(self):
        return {
            "kind": self.kind,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "c": self.c.tolist(),
            "e": self.e.tolist(),
            "mu": self._mu,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["A"], d["B"], d["c"], d["e"], d["mu"])

    @classmethod
    def generate(cls, n, dim_x, dim_y, mu=1.0, heterogeneity=0.0, seed=0):
        """Random instance: shared coefficients plus ``heterogeneity`` times a
        zero-mean per-client deviation.

        The deviations sum to zero over clients, so the equal-weight objective
        does not depend on ``heterogeneity``; only the spread across clients
        (and thus the gradient dissimilarity) grows with it.
        """
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((dim_x, dim_x)))
        A0 = Q @ np.diag(rng.uniform(0.5, 1.5, dim_x)) @ Q.T
        B0 = rng.standard_normal((dim_x, dim_y)) / np.sqrt(dim_x * dim_y)
        c0 = rng.standard_normal(dim_x)
        e0 = rng.standard_normal(dim_y)

        def centred(shape):
            d = rng.standard_normal((n,) + shape)
            return d - d.mean(axis=0) if n > 1 else np.zeros_like(d)

        dA = centred((dim_x, dim_x))
        dA = 0.5 * (dA + np.swapaxes(dA, 1, 2)) * (0.2 / np.sqrt(dim_x))
        dB = centred((dim_x, dim_y)) * (0.2 / np.sqrt(dim_x * dim_y))
        dc = centred((dim_x,))
        de = centred((dim_y,))
        g = float(heterogeneity)
        return cls(A0 + g * dA, B0 + g * dB, c0 + g * dc, e0 + g * de, mu)
