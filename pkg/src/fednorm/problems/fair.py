"""Federated fair (agnostic) multiclass classification.

``f_i(x, y) = sum_c y_c F_{i,c}(x) - lam/2 |y|^2`` with ``y`` on the class
simplex, where ``F_{i,c}`` is the mean cross-entropy of a linear softmax model
over client i's samples of class c (zero when the client has none).
"""

from __future__ import annotations

import numpy as np

from ..core import check_weights
from ..errors import DimMismatch
from .base import Envelope, MinimaxProblem
from .constraints import Simplex, project_simplex
from .partition import dirichlet_partition


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class FairSoftmax(MinimaxProblem):
    kind = "fair_softmax"
    smooth_envelope = True

    def __init__(self, features, labels, num_classes, lam=0.1):
        self.features = [np.asarray(a, dtype=float) for a in features]
        self.labels = [np.asarray(l, dtype=int).ravel() for l in labels]
        if len(self.features) != len(self.labels):
            raise DimMismatch("features and labels need one entry per client")
        self.n = len(self.features)
        self.num_classes = int(num_classes)
        self.num_features = self.features[0].shape[1]
        for a, l in zip(self.features, self.labels):
            if a.ndim != 2 or a.shape != (l.size, self.num_features):
                raise DimMismatch("client features/labels are inconsistent")
            if l.size and (l.min() < 0 or l.max() >= self.num_classes):
                raise ValueError("labels out of range")
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.lam = float(lam)
        self.dim_x = self.num_classes * self.num_features
        self.dim_y = self.num_classes
        self.y_set = Simplex()
        # per-sample scale 1/|class c on client i| so that F_{i,c} is a class mean
        self._scale = []
        for l in self.labels:
            counts = np.bincount(l, minlength=self.num_classes)
            self._scale.append(1.0 / np.maximum(counts, 1)[l])
        self._L = None

    @property
    def mu(self):
        return self.lam

    @property
    def L_f(self):
        if self._L is None:
            amax = max(float(np.max(np.sum(a * a, axis=1))) for a in self.features if a.size)
            # softmax CE curvature <= |a|^2 / 2; x-y coupling <= |grad F_c| <= sqrt(2)|a|
            self._L = 0.5 * amax + np.sqrt(2.0 * amax) + self.lam
        return self._L

    def class_losses(self, i, x):
        """Per-class losses ``F_{i,c}(x)`` and their gradients, shape (C,), (C, dim_x)."""
        a, l, s = self.features[i], self.labels[i], self._scale[i]
        C, d = self.num_classes, self.num_features
        W = x.reshape(C, d)
        logp = _log_softmax(a @ W.T)
        nll = -logp[np.arange(l.size), l]
        losses = np.bincount(l, weights=s * nll, minlength=C)
        prob = np.exp(logp)
        prob[np.arange(l.size), l] -= 1.0
        grads = np.zeros((C, C, d))
        for c in range(C):
            mask = l == c
            if mask.any():
                grads[c] = (s[mask, None] * prob[mask]).T @ a[mask]
        return losses, grads.reshape(C, C * d)

    def _grad(self, i, x, y):
        losses, grads = self.class_losses(i, x)
        return y @ grads, losses - self.lam * y

    def _value(self, i, x, y):
        losses, _ = self.class_losses(i, x)
        return float(y @ losses - 0.5 * self.lam * y @ y)

    def envelope(self, w, x) -> Envelope:
        w = check_weights(w)
        x = np.asarray(x, dtype=float)
        losses = np.zeros(self.num_classes)
        grads = np.zeros((self.num_classes, self.dim_x))
        for i, wi in enumerate(w):
            if wi:
                li, gi = self.class_losses(i, x)
                losses += wi * li
                grads += wi * gi
        y_star = project_simplex(losses / self.lam)
        value = float(y_star @ losses - 0.5 * self.lam * y_star @ y_star)
        return Envelope(value, y_star @ grads, y_star)

    def to_dict(self):
        return {
            "kind": self.kind,
            "features": [a.tolist() for a in self.features],
            "labels": [l.tolist() for l in self.labels],
            "num_classes": self.num_classes,
            "lam": self.lam,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["features"], d["labels"], d["num_classes"], d.get("lam", 0.1))

    @classmethod
    def generate(cls, n, num_classes=3, num_features=4, num_samples=300, alpha=1.0,
                 lam=0.1, separation=2.0, seed=0):
        """Gaussian class blobs split across clients with a Dirichlet partition."""
        rng = np.random.default_rng(seed)
        centres = separation * rng.standard_normal((num_classes, num_features))
        labels = np.arange(num_samples) % num_classes
        feats = centres[labels] + rng.standard_normal((num_samples, num_features))
        parts = dirichlet_partition(labels, n, alpha, rng)
        return cls([feats[p] for p in parts], [labels[p] for p in parts], num_classes, lam)
