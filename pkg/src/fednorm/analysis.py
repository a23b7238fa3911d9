"""Stationarity metrics and heterogeneity constants for federated minimax runs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import AggregationVector, ParamPoint, check_weights, effective_steps
from .errors import LengthMismatch, NoConvergence, UnsupportedMass

GAP_CLAMP = 1e-9
EXACT_TOL = 1e-8
ESTIMATED_TOL = 1e-5
MAX_ITER = 10_000
# sufficient-decrease constant; 1/2 caps the accepted step at 1/curvature, so
# the search never settles on an oscillating step when Phi is stiffer than L_f
ARMIJO_C = 0.5


# --- divergence and constants ------------------------------------------------


def chi_sq_divergence(p, w) -> float:
    """Chi-square divergence ``sum_i (p_i - w_i)^2 / w_i`` over the support of w."""
    p = np.asarray(p, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if p.shape != w.shape:
        raise LengthMismatch(f"{p.size} vs {w.size} weights")
    off = w <= 0
    if np.any(p[off] > 0):
        raise UnsupportedMass("p puts mass where w is zero")
    on = ~off
    return float(np.sum((p[on] - w[on]) ** 2 / w[on]))


@dataclass(frozen=True)
class HeteroConstants:
    A_w: float
    B_w: float
    C_w: float
    D: float
    E_w: float
    F_w: float
    tau_bar: float
    tau_eff: float


def hetero_constants(w, avecs: Sequence[AggregationVector], p, n=None, P=None,
                     beta_L=0.0) -> HeteroConstants:
    """Constants that scale the convergence bounds for a given client configuration.

    ``P`` defaults to full participation, for which the sampling constant
    ``F_w`` vanishes.
    """
    w = np.asarray(w, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    n = w.size if n is None else int(n)
    if not (w.size == p.size == len(avecs) == n):
        raise LengthMismatch("w, p, aggregation vectors and n disagree")
    P = n if P is None else int(P)
    l1 = np.array([a.l1 for a in avecs])
    l2sq = np.array([a.l2sq for a in avecs])
    last_sq = np.array([a.a[-1] ** 2 for a in avecs])
    head_l1 = np.array([a.head.sum() for a in avecs])
    head_l2sq = np.array([a.head @ a.head for a in avecs])
    tau_eff = effective_steps(p, l1)
    ratio = l2sq / l1**2
    F_w = 0.0 if P == n else n * (n - P) / (P * (n - 1)) * float(w @ w)
    return HeteroConstants(
        A_w=float(n * tau_eff * np.sum(w**2 * ratio)),
        B_w=float(n * tau_eff * np.max(w * ratio)),
        C_w=float(np.sum(w * (l2sq - last_sq))),
        D=float(np.max(beta_L**2 * head_l2sq + head_l1**2)),
        E_w=float(n * np.max(w)),
        F_w=float(F_w),
        tau_bar=float(np.mean([a.tau for a in avecs])),
        tau_eff=tau_eff,
    )


def empirical_heterogeneity(problem, w, points: Sequence[ParamPoint], beta_G=1.0) -> float:
    """Smallest ``sigma_G^2`` consistent with the gradient-dissimilarity bound at
    the given points (a diagnostic, not a certificate)."""
    w = check_weights(w)
    worst = 0.0
    for pt in points:
        gs = [problem.exact_grad(i, pt) for i in range(problem.n)]
        for part in (0, 1):
            g = np.array([gi[part] for gi in gs])
            mean = w @ g
            spread = float(w @ np.sum(g * g, axis=1) - beta_G**2 * mean @ mean)
            worst = max(worst, spread)
    return worst


# --- Moreau envelope -----------------------------------------------------------


@dataclass(frozen=True)
class ProxResult:
    x_bar: np.ndarray
    value: float
    grad_norm: float
    iterations: int


def moreau_prox(phi: Callable, x, L_f: float, tol=EXACT_TOL, max_iter=MAX_ITER,
                x_init=None) -> ProxResult:
    """Minimize ``phi(z) + L_f |z - x|^2`` by gradient descent with backtracking.

    ``phi`` maps a point to ``(value, gradient)``.  Each iteration tries the
    step ``1/(4 L_f)`` and halves it until the Armijo condition holds.  Once
    the predicted decrease falls below the floating-point resolution of the
    objective, values can no longer rank steps, so the halving with the
    smallest gradient norm is taken instead.
    """
    if not L_f > 0:
        raise ValueError("L_f must be positive")
    x = np.asarray(x, dtype=float)
    z = x.copy() if x_init is None else np.asarray(x_init, dtype=float).copy()

    def h(z):
        v, g = phi(z)
        diff = z - x
        return v + L_f * diff @ diff, g + 2 * L_f * diff

    hz, gz = h(z)
    gnorm = float(np.linalg.norm(gz))
    t0 = 1.0 / (4 * L_f)
    for it in range(max_iter):
        if gnorm <= tol:
            return ProxResult(z, float(hz), gnorm, it)
        t = t0
        gsq = gnorm * gnorm
        resolution = 1e-14 * max(1.0, abs(hz))
        best = None
        for _ in range(60):
            zn = z - t * gz
            hn, gn = h(zn)
            if t * gsq < resolution:
                norm = float(np.linalg.norm(gn))
                if best is not None and norm > best[0]:
                    break
                if best is None or norm < best[0]:
                    best = (norm, zn, hn, gn)
            elif hn <= hz - ARMIJO_C * t * gsq:
                best = (None, zn, hn, gn)
                break
            t *= 0.5
        if best is None or (best[0] is not None and best[0] >= gnorm):
            raise NoConvergence(
                "line search failed", {"x_bar": z, "grad_norm": gnorm, "iterations": it}
            )
        _, z, hz, gz = best
        gnorm = float(np.linalg.norm(gz))
    if gnorm <= tol:
        return ProxResult(z, float(hz), gnorm, max_iter)
    raise NoConvergence(
        f"prox did not reach tol {tol} in {max_iter} iterations (grad norm {gnorm:.3e})",
        {"x_bar": z, "grad_norm": gnorm, "iterations": max_iter},
    )


def envelope_fn(problem, w) -> Callable:
    def phi(x):
        env = problem.envelope(w, x)
        return env.value, env.grad

    return phi


def moreau_grad(phi_or_problem, x, L_f=None, tol=EXACT_TOL, max_iter=MAX_ITER, w=None,
                x_init=None) -> np.ndarray:
    """Gradient ``2 L_f (x - x_bar)`` of the ``1/(2 L_f)``-Moreau envelope.

    Accepts either a ``phi(x) -> (value, grad)`` callable or a problem together
    with weights ``w`` (its envelope is then used and ``L_f`` defaults to the
    problem's smoothness constant).
    """
    if callable(phi_or_problem):
        phi = phi_or_problem
        if L_f is None:
            raise ValueError("L_f is required with a bare callable")
    else:
        phi = envelope_fn(phi_or_problem, w)
        L_f = phi_or_problem.L_f if L_f is None else L_f
    x = np.asarray(x, dtype=float)
    res = moreau_prox(phi, x, L_f, tol, max_iter, x_init)
    return 2 * L_f * (x - res.x_bar)


def moreau_envelope(phi: Callable, x, L_f, tol=EXACT_TOL, max_iter=MAX_ITER) -> float:
    return moreau_prox(phi, x, L_f, tol, max_iter).value


# --- snapshots -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricSnapshot:
    """Metrics at one iterate; ``None`` marks a metric the problem cannot supply."""

    grad_phi_sq_true: Optional[float] = None
    grad_phi_sq_surrogate: Optional[float] = None
    moreau_grad_sq: Optional[float] = None
    envelope_gap: Optional[float] = None

    def as_dict(self):
        return {
            "grad_phi_sq_true": self.grad_phi_sq_true,
            "grad_phi_sq_surrogate": self.grad_phi_sq_surrogate,
            "moreau_grad_sq": self.moreau_grad_sq,
            "envelope_gap": self.envelope_gap,
        }


def snapshot_metrics(problem, w, p, point: ParamPoint, moreau=True, tol=EXACT_TOL,
                     max_iter=MAX_ITER) -> MetricSnapshot:
    """Evaluate stationarity at ``point`` under surrogate weights ``w`` and true weights ``p``.

    The envelope-gradient norms are reported only for problems whose envelope
    is smooth; the Moreau metric and the gap are reported for every problem.
    """
    w = check_weights(w)
    p = check_weights(p)
    env_w = problem.envelope(w, point.x)
    gap = env_w.value - problem.weighted_value(w, point)
    if gap < 0:
        if gap < -GAP_CLAMP:
            raise ArithmeticError(f"negative envelope gap {gap:.3e}; inner max is broken")
        gap = 0.0
    g_true = g_sur = None
    if problem.smooth_envelope:
        g_sur = float(env_w.grad @ env_w.grad)
        env_p = env_w if np.array_equal(w, p) else problem.envelope(p, point.x)
        g_true = float(env_p.grad @ env_p.grad)
    m = None
    if moreau:
        g = moreau_grad(problem, point.x, tol=tol, max_iter=max_iter, w=w)
        m = float(g @ g)
    return MetricSnapshot(g_true, g_sur, m, float(gap))
