import math

import numpy as np
import pytest

from robustopt.applications import lp_constants, lp_problem, random_feasible_lp
from robustopt.core import Bounds, QueryLedger, effective_G2sq
from robustopt.sampling import (
    ExactSubgradientOracle,
    PerturbationModel,
    QueryCostModel,
    SampledSubgradientOracle,
    assemble_stochastic_gradient,
    build_l1_distribution,
    draw_samples,
    estimate_l1_norm,
    exact_gradient_oracle,
    l1_distribution_from_matrix,
)

COST = QueryCostModel()


class TestBuildDistribution:
    def test_single_constraint(self):
        dist = l1_distribution_from_matrix(np.array([[3.0, -1.0]]))
        np.testing.assert_allclose(dist.probabilities, [0.75, 0.25])
        np.testing.assert_array_equal(dist.signs, [1.0, -1.0])
        assert dist.total == 4.0
        assert dist.max_entry == 3.0

    def test_point_mass(self):
        dist = l1_distribution_from_matrix(np.array([[0.0, 0.0], [0.0, -2.5]]))
        np.testing.assert_allclose(dist.probabilities, [0, 0, 0, 1])

    def test_two_constraint_symmetry(self):
        dist = l1_distribution_from_matrix(np.array([[1.0], [1.0]]))
        np.testing.assert_allclose(dist.probabilities, [0.5, 0.5])

    def test_degenerate_flag(self):
        dist = l1_distribution_from_matrix(np.zeros((2, 3)))
        assert dist.degenerate

    def test_invariants_random(self, rng):
        for _ in range(50):
            G = rng.standard_normal((3, 4)) * rng.random()
            dist = l1_distribution_from_matrix(G)
            assert abs(dist.probabilities.sum() - 1.0) <= 1e-12
            np.testing.assert_allclose(dist.probabilities * dist.total,
                                       np.abs(G).ravel(), atol=1e-9)

    def test_wall_cost_charged(self, rng):
        instance = random_feasible_lp(m=3, n=4, d=5, seed=1)
        problem = lp_problem(instance)
        ledger = QueryLedger()
        x = instance.domain.project(rng.standard_normal(4))
        build_l1_distribution(problem, x, np.zeros((3, 5)), ledger)
        assert ledger.wall_grad_evals == 15
        assert ledger.grad_queries == 0  # charged by draw_samples, not here


class TestDrawSamples:
    def test_reference_charge(self, rng):
        # ceil(sqrt(4 * 2 * 8) * ln(1/0.01)) = ceil(8 * 4.60517) = 37
        dist = l1_distribution_from_matrix(np.ones((2, 8)))
        ledger = QueryLedger()
        draw_samples(dist, 4, 0.01, rng, ledger, COST)
        assert ledger.grad_queries == 37

    def test_point_mass_deterministic(self, rng):
        G = np.zeros((2, 3))
        G[1, 2] = 5.0
        dist = l1_distribution_from_matrix(G)
        draw = draw_samples(dist, 16, 0.01, rng, QueryLedger(), COST)
        assert np.all(draw.pairs == [1, 2])

    def test_empirical_frequencies(self, rng):
        G = np.array([[0.5, -1.5], [2.0, 0.0]])
        dist = l1_distribution_from_matrix(G)
        N = 10**6
        draw = draw_samples(dist, N, 0.01, rng, QueryLedger(), COST)
        flat = draw.pairs[:, 0] * dist.d + draw.pairs[:, 1]
        freq = np.bincount(flat, minlength=4) / N
        p = dist.probabilities
        se = np.sqrt(p * (1 - p) / N)
        assert np.all(np.abs(freq - p) <= 5 * se + 1e-12)

    def test_degenerate_empty_unchanged_ledger(self, rng):
        dist = l1_distribution_from_matrix(np.zeros((2, 2)))
        ledger = QueryLedger()
        draw = draw_samples(dist, 4, 0.01, rng, ledger, COST)
        assert draw.pairs.shape == (0, 2)
        assert ledger.grad_queries == 0

    def test_failure_injection(self):
        dist = l1_distribution_from_matrix(np.ones((2, 2)))
        rng = np.random.default_rng(3)
        outcomes = [draw_samples(dist, 2, 0.5, rng, QueryLedger(), COST,
                                 inject_failures=True).failed
                    for _ in range(200)]
        failure_rate = np.mean(outcomes)
        assert 0.3 < failure_rate < 0.7


class TestEstimateNorm:
    def test_exact_mode(self, rng):
        dist = l1_distribution_from_matrix(np.array([[3.0, -1.0]]))
        est = estimate_l1_norm(dist, 0.25, 0.01, PerturbationModel("exact"),
                               rng, QueryLedger(), COST)
        assert est.gamma == 4.0 and est.lam == 1.0

    def test_adversarial_alternates(self, rng):
        dist = l1_distribution_from_matrix(np.array([[3.0, -1.0]]))
        model = PerturbationModel("adversarial")
        gammas = [estimate_l1_norm(dist, 0.25, 0.01, model, rng,
                                   QueryLedger(), COST).gamma
                  for _ in range(4)]
        assert gammas == [3.0, 5.0, 3.0, 5.0]

    def test_uniform_in_band(self, rng):
        dist = l1_distribution_from_matrix(np.array([[2.0, 2.0]]))
        model = PerturbationModel("uniform")
        for _ in range(100):
            est = estimate_l1_norm(dist, 0.25, 0.01, model, rng,
                                   QueryLedger(), COST)
            assert abs(est.lam - 1.0) <= 0.25

    def test_reference_charge(self, rng):
        # Single nonzero entry in an 8x8 gradient makes M/total = 1:
        # ceil(4 * sqrt(64) * ln 100) = ceil(147.365) = 148.
        G = np.zeros((8, 8))
        G[3, 5] = 2.0
        dist = l1_distribution_from_matrix(G)
        ledger = QueryLedger()
        estimate_l1_norm(dist, 0.25, 0.01, PerturbationModel("exact"), rng,
                         ledger, COST)
        assert ledger.grad_queries == 148

    def test_degenerate_attempt_charged(self, rng):
        dist = l1_distribution_from_matrix(np.zeros((8, 8)))
        ledger = QueryLedger()
        est = estimate_l1_norm(dist, 0.25, 0.01, PerturbationModel("exact"),
                               rng, ledger, COST)
        assert est.degenerate and est.gamma == 0.0
        assert ledger.grad_queries == 148  # M/total at its supremum 1

    def test_nu_validation(self, rng):
        dist = l1_distribution_from_matrix(np.ones((1, 2)))
        with pytest.raises(ValueError):
            estimate_l1_norm(dist, 0.75, 0.01, PerturbationModel("exact"),
                             rng, QueryLedger(), COST)


class TestAssemble:
    def test_reference_gradient(self):
        dist = l1_distribution_from_matrix(np.array([[3.0, -1.0]]))
        pairs = np.array([[0, 0], [0, 0], [0, 0], [0, 1]])
        g = assemble_stochastic_gradient(pairs, dist, 4.0, 4, QueryLedger())
        np.testing.assert_allclose(g.vectors[0], [3.0, -1.0])
        assert g.touched == (0,)

    def test_empty_draw(self):
        dist = l1_distribution_from_matrix(np.array([[3.0, -1.0]]))
        g = assemble_stochastic_gradient(np.empty((0, 2)), dist, 4.0, 4,
                                         QueryLedger())
        assert g.vectors == {} and g.touched == ()

    def test_point_mass_recovers_l1_mass(self):
        G = np.zeros((2, 2))
        G[1, 0] = 2.5
        dist = l1_distribution_from_matrix(G)
        pairs = np.tile([1, 0], (8, 1))
        g = assemble_stochastic_gradient(pairs, dist, dist.total, 8,
                                         QueryLedger())
        assert g.vectors[1][0] == pytest.approx(2.5)

    def test_charges_one_lookup_per_pair(self):
        dist = l1_distribution_from_matrix(np.ones((2, 2)))
        ledger = QueryLedger()
        pairs = np.array([[0, 0], [1, 1], [1, 1]])
        assemble_stochastic_gradient(pairs, dist, 4.0, 3, ledger)
        assert ledger.grad_queries == 3
        assert ledger.wall_grad_evals == 3


class TestExactOracle:
    def test_lp_gradient_and_count(self, rng):
        instance = random_feasible_lp(m=2, n=4, d=3, seed=5)
        problem = lp_problem(instance)
        ledger = QueryLedger()
        x = instance.domain.project(rng.standard_normal(4))
        grads = exact_gradient_oracle(problem, x, np.zeros((2, 3)), ledger)
        assert ledger.grad_queries == 6
        assert ledger.wall_grad_evals == 6
        for i in range(2):
            np.testing.assert_allclose(grads[i], instance.P[i].T @ x)

    def test_independent_of_noise(self, rng):
        instance = random_feasible_lp(m=2, n=4, d=3, seed=5)
        problem = lp_problem(instance)
        x = instance.domain.project(rng.standard_normal(4))
        u1 = rng.standard_normal((2, 3))
        g1 = exact_gradient_oracle(problem, x, u1, QueryLedger())
        g2 = exact_gradient_oracle(problem, x, np.zeros((2, 3)), QueryLedger())
        for a, b in zip(g1, g2):
            np.testing.assert_array_equal(a, b)


def _sample_many(dist, s, n_draws, rng, gamma):
    ledger = QueryLedger()
    out = np.empty((n_draws, dist.m, dist.d))
    for k in range(n_draws):
        draw = draw_samples(dist, s, 0.01, rng, ledger, COST)
        out[k] = assemble_stochastic_gradient(draw.pairs, dist, gamma, s,
                                              ledger).dense(dist.m, dist.d)
    return out


class TestMoments:
    """Statistical contracts of the sampled estimator (reduced scale; the
    acceptance suite reruns them at full scale)."""

    def setup_method(self):
        self.instance = random_feasible_lp(m=3, n=4, d=5, seed=42)
        self.problem = lp_problem(self.instance)
        self.bounds = lp_constants(self.instance)
        rng = np.random.default_rng(777)
        self.x = self.instance.domain.project(rng.standard_normal(4))
        noise = rng.standard_normal((3, 5))
        self.noise = noise / np.maximum(1.0, np.linalg.norm(noise, axis=1))[:, None]
        self.true = self.problem.subgradient_matrix(self.x, self.noise)
        self.dist = l1_distribution_from_matrix(self.true)

    def test_unbiased_with_exact_gamma(self, rng):
        N = 20000
        draws = _sample_many(self.dist, 4, N, rng, self.dist.total)
        mean = draws.mean(axis=0)
        se = draws.std(axis=0) / math.sqrt(N)
        assert np.all(np.abs(mean - self.true) <= 5 * se + 1e-12)

    @pytest.mark.parametrize("s", [1, 4, 16])
    def test_second_moment_bound(self, s, rng):
        N = 20000
        draws = _sample_many(self.dist, s, N, rng, self.dist.total)
        sqnorm = np.sum(draws**2, axis=2)  # N x m
        bound = effective_G2sq(self.bounds, s)
        for i in range(3):
            se = sqnorm[:, i].std() / math.sqrt(N)
            assert sqnorm[:, i].mean() <= bound + 3 * se

    def test_touched_at_most_min_m_s(self, rng):
        for s in (1, 2, 8):
            for _ in range(100):
                draw = draw_samples(self.dist, s, 0.01, rng, QueryLedger(), COST)
                g = assemble_stochastic_gradient(draw.pairs, self.dist, 1.0, s,
                                                 QueryLedger())
                assert len(g.touched) <= min(3, s)


class TestOracleClasses:
    def test_exact_oracle_contract_constants(self):
        instance = random_feasible_lp(m=3, n=4, d=5, seed=42)
        problem = lp_problem(instance)
        bounds = lp_constants(instance)
        oracle = ExactSubgradientOracle(problem, bounds)
        assert oracle.nu == 0.0
        assert oracle.eff_G2 == bounds.G2
        assert oracle.eff_G2sq_horizon == bounds.G2**2

    def test_sampled_oracle_contract_constants(self):
        instance = random_feasible_lp(m=3, n=4, d=5, seed=42)
        problem = lp_problem(instance)
        bounds = lp_constants(instance)
        oracle = SampledSubgradientOracle(problem, bounds, s=4)
        base = effective_G2sq(bounds, 4)
        assert oracle.nu == 0.25
        assert oracle.eff_G2 == pytest.approx(math.sqrt(base))
        assert oracle.eff_G2sq_horizon == pytest.approx(1.25**2 * base)

    def test_per_iteration_charge_itemization(self, rng):
        # charge = sample charge + norm charge + s
        instance = random_feasible_lp(m=3, n=4, d=5, seed=42)
        problem = lp_problem(instance)
        bounds = lp_constants(instance)
        s, delta_iter = 4, 0.005
        oracle = SampledSubgradientOracle(problem, bounds, s=s,
                                          delta_iter=delta_iter)
        ledger = QueryLedger()
        x = instance.domain.project(rng.standard_normal(4))
        noise = np.zeros((3, 5))
        dist = build_l1_distribution(problem, x, noise, QueryLedger())
        sample_charge = math.ceil(math.sqrt(s * 15) * math.log(1 / delta_iter))
        norm_charge = math.ceil(4.0 * math.sqrt(15 * dist.max_entry / dist.total)
                                * math.log(1 / delta_iter))
        oracle.sample(x, noise, rng, ledger)
        assert ledger.grad_queries == sample_charge + norm_charge + s
        assert ledger.wall_grad_evals == 15 + s

    def test_degenerate_iteration_charges_norm_only(self, rng):
        instance = random_feasible_lp(m=2, n=3, d=2, seed=1)
        problem = lp_problem(instance)
        bounds = lp_constants(instance)
        oracle = SampledSubgradientOracle(problem, bounds, s=4, delta_iter=0.01)
        ledger = QueryLedger()
        # x = 0 makes every subgradient P_i^T x vanish.
        g = oracle.sample(np.zeros(3), np.zeros((2, 2)), rng, ledger)
        assert g.touched == ()
        norm_charge = math.ceil(4.0 * math.sqrt(4.0) * math.log(100.0))
        assert ledger.grad_queries == norm_charge
