from __future__ import annotations

import math

import numpy as np
import pytest

from brute import random_schedule
from mfbai.divergences import DomainError, gaussian
from mfbai.harness import random_instance_gen
from mfbai.model import BanditInstance, FidelitySchedule, compare_lb, preset
from mfbai.oracle import brute_oracle_2xm, lower_bound_cost, solve_oracle, zero_weight_mask
from mfbai.transport import big_f, pair_costs, transport_pair

SHIPPED = ("five-by-two", "table-mu1", "table-mu2", "table-mu3", "lucb-2x2")


@pytest.fixture(scope="module")
def solutions():
    return {name: solve_oracle(preset(name)) for name in SHIPPED}


def two_arm_one_fidelity(gap, lam, sigma2=1.0):
    sched = FidelitySchedule([0.0], [lam])
    return BanditInstance([[0.5 + gap], [0.5]], gaussian(sigma2), sched)


def class_akm(K, M, c=0.3, rng=None):
    """Instance where every fidelity carries the same information, so the cheapest wins."""
    rng = rng or np.random.default_rng(0)
    xi, lam = random_schedule(rng, M)
    mu = np.empty((K, M))
    mu[0] = c + xi
    mu[1:] = -c - xi
    return BanditInstance(mu, gaussian(0.5), FidelitySchedule(xi, lam))


class TestFiveByTwo:
    def test_analytic_optimum(self, solutions):
        # Symmetric optimum: x = 1 / (4 + sqrt(40)) on each (i, 1), 1 - 4x on (5, 2).
        w = solutions["five-by-two"].omega_star
        x = 1.0 / (4.0 + math.sqrt(40.0))
        np.testing.assert_allclose(w[:4, 0], x, atol=1e-4)
        assert w[4, 1] == pytest.approx(1 - 4 * x, abs=1e-4)
        assert w[:4, 1].max() <= 1e-4 and w[4, 0] <= 1e-4

    def test_eta(self, solutions):
        inst = preset("five-by-two")
        w = solutions["five-by-two"].omega_star
        for i in range(4):
            r = transport_pair(w, inst.mu, 4, i, inst.schedule, inst.family)
            assert r.eta == pytest.approx(0.539, abs=1e-3)

    def test_solution_fields(self, solutions):
        inst = preset("five-by-two")
        sol = solutions["five-by-two"]
        assert sol.omega_star.sum() == pytest.approx(1.0, abs=1e-12)
        assert sol.f_star == big_f(sol.omega_star, inst.mu, inst.schedule, inst.family)[0]
        assert sol.c_star == pytest.approx(1.0 / sol.f_star)
        assert sol.iterations == 200_000
        assert sol.stationarity_gap >= 0


class TestClosedForms:
    @pytest.mark.parametrize("gap", [0.05, 0.2])
    @pytest.mark.parametrize("lam", [0.5, 5.0])
    def test_two_arms(self, gap, lam):
        sol = solve_oracle(two_arm_one_fidelity(gap, lam), iters=20_000)
        assert sol.f_star == pytest.approx(gap ** 2 / (8 * lam), abs=1e-6)
        np.testing.assert_allclose(sol.omega_star.ravel(), [0.5, 0.5], atol=1e-3)

    def test_compare_lb(self):
        inst = compare_lb(0.2, 0.2, 1.0, 5.0)
        sol = solve_oracle(inst, iters=50_000)
        assert sol.f_star == pytest.approx(0.04 / 20, abs=1e-4)
        assert sol.omega_star[:, 0].sum() <= 1e-3

    @pytest.mark.parametrize("K,M", [(2, 3), (4, 3)])
    def test_class_akm_uses_cheapest_fidelity(self, K, M):
        inst = class_akm(K, M)
        assert inst.is_mf
        sol = solve_oracle(inst, iters=50_000)
        assert sol.omega_star[:, 1:].sum(axis=1).max() <= 1e-3
        mask = zero_weight_mask(inst)
        assert np.all(sol.omega_star[mask] <= 1e-3)


class TestLowerBound:
    def test_two_arm_value(self):
        inst = two_arm_one_fidelity(0.1, 1.0)
        lb = lower_bound_cost(inst, 0.01)
        assert lb == pytest.approx(800 * math.log(1 / 0.024), rel=1e-5)
        assert lb == pytest.approx(2983.7, abs=0.1)

    def test_vanishes_at_limit(self):
        inst = two_arm_one_fidelity(0.1, 1.0)
        sol = solve_oracle(inst, iters=2000)
        assert lower_bound_cost(inst, 1 / 2.4, sol) == pytest.approx(0.0, abs=1e-12)

    def test_compare_lb(self):
        inst = compare_lb(0.1, 0.1, 0.5, 3.0)
        lb = lower_bound_cost(inst, 0.05)
        assert lb == pytest.approx(4 * 3.0 / 0.01 * math.log(1 / 0.12), rel=1e-3)

    def test_bad_delta(self):
        with pytest.raises(DomainError):
            lower_bound_cost(preset("five-by-two"), 1.0)


class TestMask:
    def test_five_by_two(self, solutions):
        mask = zero_weight_mask(preset("five-by-two"))
        expected = np.zeros((5, 2), bool)
        expected[4, 0] = True
        np.testing.assert_array_equal(mask, expected)
        assert solutions["five-by-two"].omega_star[:4, 0].min() > 0.09

    def test_single_fidelity(self):
        assert not zero_weight_mask(two_arm_one_fidelity(0.1, 1.0)).any()

    def test_compares_with_top_mean_of_best_arm(self):
        # The low fidelity of arm 0 exceeds the best arm's low-fidelity mean
        # once shifted, yet it is the cheapest source of information.
        inst = BanditInstance([[0.41, 0.5], [0.5, 0.6]], gaussian(0.1),
                              FidelitySchedule([0.1, 0.0], [0.05, 5.0]))
        sol = solve_oracle(inst, iters=50_000)
        assert not zero_weight_mask(inst)[0, 0]
        assert sol.omega_star[0, 0] > 0.05

    def test_presets_masked_coordinates_empty(self, solutions):
        for name, sol in solutions.items():
            mask = zero_weight_mask(preset(name))
            assert np.all(sol.omega_star[mask] <= 1e-3), name

    def test_non_mf_rejected(self):
        inst = BanditInstance([[0.9, 0.5], [0.4, 0.4]], gaussian(),
                              FidelitySchedule([0.1, 0.0], [1.0, 2.0]))
        with pytest.raises(DomainError):
            zero_weight_mask(inst)


class TestBruteForce:
    def test_symmetric(self):
        sol = brute_oracle_2xm(two_arm_one_fidelity(0.1, 1.0), 0.01)
        np.testing.assert_allclose(sol.omega_star.ravel(), [0.5, 0.5])

    def test_matches_solver_on_random_instances(self, rng):
        for _ in range(20):
            xi, lam = random_schedule(rng, 2)
            inst = random_instance_gen(2, 2, [xi[0], 0.0], [0.0, 0.0], 0.1, int(rng.integers(1 << 30)),
                                       lam=lam, family=gaussian(0.1))
            sol = solve_oracle(inst, iters=20_000)
            ref = brute_oracle_2xm(inst, 0.005)
            assert sol.f_star == pytest.approx(ref.f_star, abs=5e-3)
            assert sol.f_star >= ref.f_star - 1e-9

    def test_refinement_converges(self):
        inst = preset("lucb-2x2")
        coarse = brute_oracle_2xm(inst, 0.02).f_star
        fine = brute_oracle_2xm(inst, 0.01).f_star
        assert abs(fine - coarse) < 1e-3

    def test_unsupported(self):
        with pytest.raises(NotImplementedError):
            brute_oracle_2xm(preset("five-by-two"), 0.1)
        with pytest.raises(ValueError):
            brute_oracle_2xm(preset("lucb-2x2"), 0.3)


class TestOptimalityProperties:
    def test_equalization(self, solutions):
        for name, sol in solutions.items():
            inst = preset(name)
            star = inst.best_arm
            P = pair_costs(sol.omega_star, inst.mu, inst.schedule, inst.family)
            row = np.delete(P[star], star)
            assert row.max() - row.min() <= 5e-3 * sol.f_star, name

    def test_every_arm_sampled(self, solutions):
        for name, sol in solutions.items():
            assert np.all(sol.omega_star.max(axis=1) >= 1e-4), name

    def test_probes(self, solutions, rng):
        for name, sol in solutions.items():
            inst = preset(name)
            for _ in range(100):
                w = rng.dirichlet(np.ones(inst.K * inst.M)).reshape(inst.K, inst.M)
                assert sol.f_star >= big_f(w, inst.mu, inst.schedule, inst.family)[0] - 5e-3

    def test_sparsity_two_arms(self, rng):
        n, sparse = 40, 0
        for _ in range(n):
            M = int(rng.integers(2, 5))
            a = np.concatenate([np.sort(rng.uniform(0.02, 0.15, M - 1))[::-1], [0.0]])
            b = np.concatenate([np.sort(rng.uniform(0.0, 0.1, M - 1))[::-1], [0.0]])
            inst = random_instance_gen(2, M, a, b, 0.1, int(rng.integers(1 << 30)),
                                       lam=np.sort(rng.uniform(0.05, 5.0, M)))
            sol = solve_oracle(inst, iters=50_000)
            sparse += bool(np.all((sol.omega_star >= 1e-3).sum(axis=1) <= 1))
        assert sparse >= 0.95 * n

    def test_tied_best_rejected(self):
        sched = FidelitySchedule([0.0], [1.0])
        with pytest.raises(DomainError):
            solve_oracle(BanditInstance([[0.5], [0.5]], gaussian(), sched))

    def test_non_mf_warns(self):
        inst = BanditInstance([[0.9, 0.5], [0.4, 0.4]], gaussian(),
                              FidelitySchedule([0.1, 0.0], [1.0, 2.0]))
        with pytest.warns(UserWarning):
            solve_oracle(inst, iters=1000)
