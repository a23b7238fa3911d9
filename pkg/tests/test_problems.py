from pathlib import Path

import numpy as np
import pytest
from conftest import scalar_problem
from hypothesis import given, settings
from hypothesis import strategies as st

from fednorm.core import ParamPoint
from fednorm.errors import BadClientId, BadSet, DimMismatch, IndefiniteEnvelope, TooFewSamples
from fednorm.problems import (
    Ball,
    Box,
    FairSoftmax,
    QuadraticSaddle,
    RobustRegression,
    Simplex,
    Unconstrained,
    add_noise,
    constraint_from_dict,
    dirichlet_partition,
    exact_grad,
    phi_exact,
    problem_from_dict,
    project,
    read_partition,
    stoch_grad,
    write_partition,
)

DATA = Path(__file__).parent / "data"


def all_problems():
    return [
        QuadraticSaddle.generate(3, 2, 3, mu=1.0, heterogeneity=0.5, seed=1),
        RobustRegression.generate(3, 3, 5, samples_per_client=20, heterogeneity=0.5, seed=1),
        FairSoftmax.generate(3, num_classes=3, num_features=2, num_samples=60, alpha=1.0, seed=1),
    ]


def random_point(problem, rng):
    return ParamPoint(rng.standard_normal(problem.dim_x), problem.project_y(rng.standard_normal(problem.dim_y)))


# --- gradients ---------------------------------------------------------------


def test_quadratic_grad_example():
    gx, gy = exact_grad(scalar_problem(), 0, ParamPoint([1.0], [1.0]))
    assert gx.tolist() == [2.0] and gy.tolist() == [0.0]


def test_grad_zero_at_saddle(mismatch):
    w = [0.5, 0.5]
    x = mismatch.minimizer(w)
    _, _, y = phi_exact(mismatch, w, x)
    gx, gy = mismatch.weighted_grad(w, ParamPoint(x, y))
    np.testing.assert_allclose(gx, 0, atol=1e-12)
    np.testing.assert_allclose(gy, 0, atol=1e-12)


def test_grad_errors(mismatch):
    with pytest.raises(BadClientId):
        mismatch.exact_grad(2, ParamPoint([0.0], [0.0]))
    with pytest.raises(DimMismatch):
        mismatch.exact_grad(0, ParamPoint([0.0, 1.0], [0.0]))


@pytest.mark.parametrize("idx", range(3))
def test_gradients_match_finite_differences(idx):
    problem = all_problems()[idx]
    rng = np.random.default_rng(idx)
    h = 1e-6
    for _ in range(3):
        pt = random_point(problem, rng)
        gx, gy = problem.exact_grad(1, pt)
        for k in range(problem.dim_x):
            e = np.zeros(problem.dim_x)
            e[k] = h
            fd = (problem.value(1, ParamPoint(pt.x + e, pt.y)) - problem.value(1, ParamPoint(pt.x - e, pt.y))) / (2 * h)
            assert gx[k] == pytest.approx(fd, rel=1e-5, abs=1e-7)
        for k in range(problem.dim_y):
            e = np.zeros(problem.dim_y)
            e[k] = h
            fd = (problem.value(1, ParamPoint(pt.x, pt.y + e)) - problem.value(1, ParamPoint(pt.x, pt.y - e))) / (2 * h)
            assert gy[k] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_fair_one_hot_gradient_is_class_loss_gradient():
    problem = all_problems()[2]
    rng = np.random.default_rng(5)
    x = rng.standard_normal(problem.dim_x)
    losses, grads = problem.class_losses(0, x)
    h = 1e-6
    for c in range(problem.num_classes):
        y = np.eye(problem.num_classes)[c]
        gx, _ = problem.exact_grad(0, ParamPoint(x, y))
        np.testing.assert_allclose(gx, grads[c], rtol=1e-12, atol=1e-15)
        # brute-force the per-class loss gradient
        for k in range(problem.dim_x):
            e = np.zeros(problem.dim_x)
            e[k] = h
            fd = (problem.class_losses(0, x + e)[0][c] - problem.class_losses(0, x - e)[0][c]) / (2 * h)
            assert gx[k] == pytest.approx(fd, rel=1e-5, abs=1e-8)


# --- stochastic oracle -------------------------------------------------------


def test_noiseless_oracle_is_exact(mismatch):
    pt = ParamPoint([0.3], [-0.2])
    sx, sy = stoch_grad(mismatch, 1, pt, 0.0, 0.0, None)
    ex, ey = exact_grad(mismatch, 1, pt)
    assert np.array_equal(sx, ex) and np.array_equal(sy, ey)


@pytest.mark.parametrize("idx", range(3))
def test_stoch_grad_is_exact_plus_noise(idx):
    problem = all_problems()[idx]
    pt = random_point(problem, np.random.default_rng(idx))
    gx, gy = problem.exact_grad(0, pt)
    sx, sy = problem.stoch_grad(0, pt, 0.7, 0.3, np.random.default_rng(11))
    nx, ny = add_noise(gx, gy, 0.7, 0.3, np.random.default_rng(11))
    assert np.array_equal(sx, nx) and np.array_equal(sy, ny)


@pytest.mark.parametrize("idx", range(3))
def test_noise_unbiased(idx):
    # stoch_grad is exact_grad + add_noise (checked above), so 10^5 draws of the
    # noise around each exact gradient exercise the oracle without recomputing it
    problem = all_problems()[idx]
    rng = np.random.default_rng(100 + idx)
    draws = 100_000
    for _ in range(3):
        pt = random_point(problem, rng)
        gx, gy = problem.exact_grad(0, pt)
        g = np.concatenate([gx, gy])
        samples = np.array([np.concatenate(add_noise(gx, gy, 1.0, 0.5, rng)) for _ in range(draws)])
        se = samples.std(axis=0, ddof=1) / np.sqrt(draws)
        assert np.all(np.abs(samples.mean(axis=0) - g) <= 4 * se)


def test_noise_variance_matches_model():
    gx, gy = np.array([2.0]), np.array([0.0])  # |grad|^2 = 4
    rng = np.random.default_rng(3)
    draws = 100_000
    zeta = np.empty((draws, 2))
    for k in range(draws):
        nx, ny = add_noise(gx, gy, 1.0, 0.5, rng)
        zeta[k] = nx[0] - 2.0, ny[0]
    sq = np.sum(zeta**2, axis=1)
    se = sq.std(ddof=1) / np.sqrt(draws)
    assert abs(sq.mean() - 2.0) <= 3 * se
    assert abs(zeta[:, 0].mean()) <= 3 / np.sqrt(draws)


# --- envelopes ---------------------------------------------------------------


def test_phi_exact_equal_weights(mismatch):
    for x in (-1.0, 0.0, 0.7):
        _, grad, y = phi_exact(mismatch, [0.5, 0.5], [x])
        assert grad[0] == pytest.approx(2.5 * x, abs=1e-15)
        assert y[0] == pytest.approx(x)
    assert mismatch.minimizer([0.5, 0.5])[0] == pytest.approx(0.0, abs=1e-15)


def test_phi_exact_tilted_weights(mismatch):
    w = [1 / 3, 2 / 3]
    for x in (-1.0, 0.0, 0.7):
        _, grad, _ = phi_exact(mismatch, w, [x])
        assert grad[0] == pytest.approx(8 / 3 * x - 1 / 3, abs=1e-14)
    assert mismatch.minimizer(w)[0] == pytest.approx(0.125, abs=1e-14)


def test_phi_exact_decoupled():
    p = QuadraticSaddle([[[1.0]], [[3.0]]], [[[0.0]], [[0.0]]], [[1.0], [0.0]], [[2.0], [4.0]], mu=2.0)
    w = [0.25, 0.75]
    value, grad, y = phi_exact(p, w, [1.0])
    assert y[0] == pytest.approx((0.25 * 2 + 0.75 * 4) / 2.0)
    assert grad[0] == pytest.approx(0.25 * 1 + 0.75 * 3 + 0.25)
    assert value == pytest.approx(0.5 * 2.5 + 0.25 + 0.5 * 2.0 * y[0] ** 2)


def test_indefinite_envelope():
    p = QuadraticSaddle([[[-5.0]]], [[[1.0]]], [[0.0]], [[0.0]], mu=1.0)
    with pytest.raises(IndefiniteEnvelope):
        phi_exact(p, [1.0], [0.0])


def test_envelope_gradient_finite_difference():
    problem = QuadraticSaddle.generate(4, 3, 2, mu=1.0, heterogeneity=0.3, seed=7)
    w = np.array([0.1, 0.2, 0.3, 0.4])
    rng = np.random.default_rng(8)
    h = 1e-5
    for _ in range(20):
        x = rng.standard_normal(3)
        _, grad, _ = phi_exact(problem, w, x)
        fd = np.array([
            (phi_exact(problem, w, x + h * e)[0] - phi_exact(problem, w, x - h * e)[0]) / (2 * h)
            for e in np.eye(3)
        ])
        assert np.linalg.norm(fd - grad) <= 1e-6 * max(1.0, np.linalg.norm(grad))


def test_inner_max_by_gradient_ascent():
    problem = QuadraticSaddle.generate(3, 2, 3, mu=0.5, heterogeneity=0.5, seed=2)
    w = np.array([0.2, 0.5, 0.3])
    x = np.array([0.4, -1.2])
    y = np.zeros(3)
    step = 1.0 / problem.L_f
    for _ in range(10_000):
        _, gy = problem.weighted_grad(w, ParamPoint(x, y))
        y = y + step * gy
    _, _, y_star = phi_exact(problem, w, x)
    np.testing.assert_allclose(y, y_star, atol=1e-8)


@pytest.mark.parametrize("idx", [1, 2])
def test_closed_form_envelopes_dominate(idx):
    # envelope value >= F(x, y) for feasible y, with equality at y*
    problem = all_problems()[idx]
    rng = np.random.default_rng(idx)
    w = np.array([0.5, 0.3, 0.2])
    for _ in range(5):
        x = rng.standard_normal(problem.dim_x)
        env = problem.envelope(w, x)
        assert env.value == pytest.approx(problem.weighted_value(w, ParamPoint(x, env.y_star)), abs=1e-12)
        for _ in range(20):
            y = problem.project_y(rng.standard_normal(problem.dim_y))
            assert problem.weighted_value(w, ParamPoint(x, y)) <= env.value + 1e-12


def test_fair_envelope_gradient_finite_difference():
    problem = all_problems()[2]
    w = np.array([0.2, 0.3, 0.5])
    x = np.random.default_rng(9).standard_normal(problem.dim_x)
    env = problem.envelope(w, x)
    h = 1e-6
    fd = np.array([(problem.envelope(w, x + h * e).value - problem.envelope(w, x - h * e).value) / (2 * h)
                   for e in np.eye(problem.dim_x)])
    np.testing.assert_allclose(env.grad, fd, rtol=1e-5, atol=1e-8)


def test_derived_constants(mismatch):
    assert mismatch.mu == 1.0
    assert mismatch.kappa == pytest.approx(mismatch.L_f / mismatch.mu)
    assert mismatch.L_phi == pytest.approx(mismatch.kappa * mismatch.L_f / 2 + mismatch.L_f)


@pytest.mark.parametrize("idx", range(3))
def test_serialization_round_trip(idx):
    problem = all_problems()[idx]
    clone = problem_from_dict(problem.to_dict())
    pt = random_point(clone, np.random.default_rng(0))
    for i in range(problem.n):
        a, b = problem.exact_grad(i, pt), clone.exact_grad(i, pt)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


# --- partitions --------------------------------------------------------------


def test_dirichlet_golden_partition():
    labels = np.array([0] * 10 + [1] * 10)
    parts = dirichlet_partition(labels, 3, 0.1, np.random.default_rng(42))
    golden = read_partition(DATA / "dirichlet_seed42.txt")
    assert len(parts) == len(golden)
    for a, b in zip(parts, golden):
        assert np.array_equal(a, b)


def test_dirichlet_single_client():
    parts = dirichlet_partition([0, 1, 1, 2], 1, 0.5, np.random.default_rng(0))
    assert len(parts) == 1 and parts[0].tolist() == [0, 1, 2, 3]


def test_dirichlet_large_alpha_is_near_iid():
    labels = np.repeat(np.arange(10), 1000)
    parts = dirichlet_partition(labels, 4, 1e6, np.random.default_rng(1))
    glob = np.bincount(labels, minlength=10) / labels.size
    for part in parts:
        hist = np.bincount(labels[part], minlength=10) / part.size
        assert 0.5 * np.abs(hist - glob).sum() <= 0.01


@pytest.mark.parametrize("seed", range(20))
def test_dirichlet_disjoint_cover(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, size=50)
    parts = dirichlet_partition(labels, 5, 0.3, rng)
    allidx = np.concatenate(parts)
    assert sorted(allidx.tolist()) == list(range(50))
    assert all(p.size > 0 for p in parts)


def test_dirichlet_too_few_samples():
    with pytest.raises(TooFewSamples):
        dirichlet_partition([0, 1], 3, 1.0, np.random.default_rng(0))


def test_partition_file_round_trip(tmp_path):
    parts = [np.array([0, 3]), np.array([1]), np.array([2, 4, 5])]
    write_partition(parts, tmp_path / "p.txt")
    assert (tmp_path / "p.txt").read_text() == "0,3\n1\n2,4,5\n"
    back = read_partition(tmp_path / "p.txt")
    assert [b.tolist() for b in back] == [p.tolist() for p in parts]


# --- projections -------------------------------------------------------------


def test_projection_examples():
    np.testing.assert_allclose(project(Simplex(), [0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], atol=1e-15)
    np.testing.assert_allclose(project(Simplex(), [0.5, 0.5, 1.0]), [1 / 6, 1 / 6, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(project(Ball(1.0), [3.0, 4.0]), [0.6, 0.8], atol=1e-15)
    np.testing.assert_array_equal(project(Box(-1.0, 1.0), [-3.0, 0.5]), [-1.0, 0.5])
    np.testing.assert_array_equal(project(Unconstrained(), [5.0]), [5.0])


def test_bad_sets():
    with pytest.raises(BadSet):
        Ball(0.0)
    with pytest.raises(BadSet):
        Box(1.0, 0.0)
    with pytest.raises(BadSet):
        project(Simplex(), [])
    with pytest.raises(BadSet):
        constraint_from_dict({"kind": "sphere"})


SETS = [Unconstrained(), Ball(1.5), Box(-0.5, 0.7), Simplex()]


@pytest.mark.parametrize("cset", SETS, ids=lambda s: type(s).__name__)
def test_projection_idempotent_nonexpansive(cset):
    rng = np.random.default_rng(4)
    for _ in range(1000):
        a, b = rng.standard_normal(4) * 3, rng.standard_normal(4) * 3
        pa, pb = project(cset, a), project(cset, b)
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12
        np.testing.assert_allclose(project(cset, pa), pa, atol=1e-12)
    assert constraint_from_dict(cset.to_dict()) == cset


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=10))
def test_simplex_projection_feasible(v):
    out = project(Simplex(), v)
    assert np.all(out >= 0)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
