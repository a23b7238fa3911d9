from .base import Envelope, MinimaxProblem, add_noise
from .constraints import Ball, Box, ConstraintSet, Simplex, Unconstrained, constraint_from_dict, project
from .fair import FairSoftmax
from .partition import dirichlet_partition, read_partition, write_partition
from .quadratic import QuadraticSaddle
from .robust import RobustRegression

PROBLEM_KINDS = {
    QuadraticSaddle.kind: QuadraticSaddle,
    RobustRegression.kind: RobustRegression,
    FairSoftmax.kind: FairSoftmax,
}


def exact_grad(problem, client_id, point):
    return problem.exact_grad(client_id, point)


def stoch_grad(problem, client_id, point, sigma_L, beta_L, rng):
    return problem.stoch_grad(client_id, point, sigma_L, beta_L, rng)


def phi_exact(problem: QuadraticSaddle, w, x):
    """``(Phi_w(x), grad Phi_w(x), y*_w(x))`` for a quadratic saddle."""
    env = problem.envelope(w, x)
    return env.value, env.grad, env.y_star


def problem_from_dict(d):
    try:
        cls = PROBLEM_KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown problem kind {d.get('kind')!r}") from None
    return cls.from_dict(d)


__all__ = [
    "Ball", "Box", "ConstraintSet", "Envelope", "FairSoftmax", "MinimaxProblem",
    "PROBLEM_KINDS", "QuadraticSaddle", "RobustRegression", "Simplex", "Unconstrained",
    "add_noise", "constraint_from_dict", "dirichlet_partition", "exact_grad", "phi_exact",
    "problem_from_dict", "project", "read_partition", "stoch_grad", "write_partition",
]
