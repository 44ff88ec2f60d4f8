import math

import numpy as np
import pytest

from robustopt.core import Bounds, QueryLedger, effective_G2sq
from robustopt.ogd import (
    OsgdAbort,
    ball_linear_maximizer,
    measure_regret,
    run_osgd,
)
from robustopt.projections import project_ball
from robustopt.sampling import (
    QueryCostModel,
    assemble_stochastic_gradient,
    draw_samples,
    l1_distribution_from_matrix,
)


def unit_ball_projector(u):
    return project_ball(u, None, 1.0)


def make_bounds(nu=0.0, D=2.0):
    return Bounds(D=D, F=1.0, G2=1.0, G1=1.0, Ginf=1.0, nu=nu)


class TestRunOsgd:
    def test_linear_reward_converges_to_direction(self, rng):
        c = np.array([0.6, 0.8])
        trace = run_osgd(
            oracle=lambda t, u, r: c,
            losses=lambda t, u: float(c @ u),
            u0=np.zeros(2),
            projector=unit_ball_projector,
            bounds=make_bounds(),
            eff_G2=1.0,
            T=600,
            rng=rng,
        )
        np.testing.assert_allclose(trace.iterates[-1], c, atol=1e-3)

    def test_zero_gradient_stays_put(self, rng):
        u0 = np.array([0.3, -0.2])
        trace = run_osgd(lambda t, u, r: np.zeros(2), lambda t, u: 0.0, u0,
                         unit_ball_projector, make_bounds(), 1.0, 50, rng)
        assert np.all(trace.iterates == u0)

    def test_concave_quadratic_approaches_origin(self, rng):
        trace = run_osgd(
            oracle=lambda t, u, r: -u,           # gradient of -||u||^2/2
            losses=lambda t, u: -0.5 * float(u @ u),
            u0=np.array([0.9, -0.3]),
            projector=unit_ball_projector,
            bounds=make_bounds(),
            eff_G2=1.0,
            T=3000,
            rng=rng,
        )
        assert np.linalg.norm(trace.iterates[-1]) < 5e-2

    def test_iterates_stay_feasible(self, rng):
        trace = run_osgd(lambda t, u, r: rng.standard_normal(3),
                         lambda t, u: 0.0, np.zeros(3), unit_ball_projector,
                         make_bounds(), 1.0, 200, rng)
        norms = np.linalg.norm(trace.iterates, axis=1)
        assert np.all(norms <= 1.0 + 1e-9)

    def test_nonfinite_gradient_aborts_with_index(self, rng):
        def oracle(t, u, r):
            return np.array([np.nan, 0.0]) if t == 7 else np.zeros(2)

        with pytest.raises(OsgdAbort, match="step 7"):
            run_osgd(oracle, lambda t, u: 0.0, np.zeros(2),
                     unit_ball_projector, make_bounds(), 1.0, 20, rng)

    def test_one_indexed_schedule(self, rng):
        bounds = make_bounds(nu=0.0, D=2.0)
        trace = run_osgd(lambda t, u, r: np.zeros(2), lambda t, u: 0.0,
                         np.zeros(2), unit_ball_projector, bounds, 1.0, 4, rng)
        expected = [2.0 / math.sqrt(t) for t in (1, 2, 3, 4)]
        np.testing.assert_allclose(trace.step_sizes, expected)


class TestMeasureRegret:
    def test_identical_linear_losses_closed_form(self, rng):
        alpha = np.array([0.4, -0.6])
        losses = lambda t, u: float(alpha @ u)
        trace = run_osgd(lambda t, u, r: alpha, losses, np.zeros(2),
                         unit_ball_projector, make_bounds(), 1.0, 100, rng)
        u_star = ball_linear_maximizer(np.tile(alpha, (100, 1)))
        regret = measure_regret(trace, losses, u_star)
        expected = float(alpha @ u_star) - trace.values.mean()
        assert regret == pytest.approx(expected)
        assert regret >= -1e-9

    def test_trace_at_maximizer_zero_regret(self, rng):
        alpha = np.array([1.0, 0.0])
        losses = lambda t, u: float(alpha @ u)
        u_star = np.array([1.0, 0.0])
        trace = run_osgd(lambda t, u, r: alpha, losses, u_star,
                         unit_ball_projector, make_bounds(), 1.0, 30, rng)
        assert measure_regret(trace, losses, u_star) == pytest.approx(0.0, abs=1e-12)

    def test_grid_comparator(self, rng):
        alpha = np.array([0.7, 0.1])
        losses = lambda t, u: float(alpha @ u)
        trace = run_osgd(lambda t, u, r: alpha, losses, np.zeros(2),
                         unit_ball_projector, make_bounds(), 1.0, 20, rng)
        angles = np.linspace(0, 2 * np.pi, 721)
        grid = np.column_stack([np.cos(angles), np.sin(angles)])
        r_grid = measure_regret(trace, losses, grid)
        r_exact = measure_regret(trace, losses,
                                 ball_linear_maximizer(np.tile(alpha, (20, 1))))
        assert r_grid == pytest.approx(r_exact, abs=1e-4)


def test_ball_maximizer_zero_sum():
    np.testing.assert_array_equal(
        ball_linear_maximizer(np.array([[1.0, 0.0], [-1.0, 0.0]])),
        np.zeros(2))


def make_l1_sampling_oracle(alphas, s, rng_independent=False):
    """Per-step stochastic gradient via the l1-sampling machinery with the
    exact norm (lambda = 1, so the oracle contract holds with nu = 0)."""
    dists = [l1_distribution_from_matrix(a[None, :]) for a in alphas]
    cost = QueryCostModel()

    def oracle(t, u, rng):
        dist = dists[t - 1]
        if dist.degenerate:
            return np.zeros(alphas.shape[1])
        draw = draw_samples(dist, s, 0.01, rng, QueryLedger(), cost)
        g = assemble_stochastic_gradient(draw.pairs, dist, dist.total, s,
                                         QueryLedger())
        return g.dense(1, alphas.shape[1])[0]

    return oracle


class TestRegretBound:
    """Reduced-scale version of the regret guarantee; the acceptance suite
    runs the full 50-seed, three-horizon version."""

    def test_stochastic_linear_losses(self):
        d, s, T, n_seeds = 6, 2, 200, 10
        alpha_rng = np.random.default_rng(123)
        alphas = 0.4 * alpha_rng.standard_normal((T, d))
        G2 = float(np.linalg.norm(alphas, axis=1).max())
        G1s = float(np.abs(alphas).sum(axis=1).max())
        bounds = Bounds(D=2.0, F=1.0, G2=G2, G1=G1s, Ginf=G1s, nu=0.0)
        eff = math.sqrt(effective_G2sq(bounds, s))
        losses = lambda t, u: float(alphas[t - 1] @ u)
        oracle = make_l1_sampling_oracle(alphas, s)
        u_star = ball_linear_maximizer(alphas)
        regrets = []
        for seed in range(n_seeds):
            trace = run_osgd(oracle, losses, np.zeros(d), unit_ball_projector,
                             bounds, eff, T, np.random.default_rng(seed))
            regrets.append(measure_regret(trace, losses, u_star))
        regrets = np.asarray(regrets)
        bound = 3.0 * eff * bounds.D / (2.0 * math.sqrt(T))
        se = regrets.std(ddof=1) / math.sqrt(n_seeds)
        assert regrets.mean() <= bound + 3 * se
