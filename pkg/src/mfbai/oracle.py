"""Optimal cost proportions and the characteristic complexity of an instance."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _kernels as _k
from .divergences import DomainError
from .model import BanditInstance
from .transport import big_f, pair_costs, pair_gradient


@dataclass(frozen=True)
class OracleSolution:
    """omega_star: K x M cost proportions; f_star: max-min value (inverse complexity)."""

    omega_star: np.ndarray
    f_star: float
    iterations: int
    stationarity_gap: float
    polished: bool = False

    @property
    def c_star(self) -> float:
        return math.inf if self.f_star <= 0 else 1.0 / self.f_star


def _kernel_args(instance: BanditInstance):
    return (instance.family.code, instance.family.sigma2,
            np.ascontiguousarray(instance.mu), np.ascontiguousarray(instance.xi),
            np.ascontiguousarray(instance.lam))


def _polish(instance: BanditInstance, w0: np.ndarray, f0: float, best: int):
    """Refine by SLSQP on: maximise z subject to f(best, a) >= z for all a."""
    n_arms, m = instance.mu.shape
    d = n_arms * m
    others = [a for a in range(n_arms) if a != best]
    scale = 1.0 / f0
    args = (instance.mu, instance.schedule, instance.family)

    def split(x):
        return np.clip(x[:d], 0.0, None).reshape(n_arms, m), x[d]

    def cons(x):
        w, z = split(x)
        p = pair_costs(w, *args)[best, others]
        return (p - z) * scale

    def cons_jac(x):
        w, _ = split(x)
        jac = np.zeros((len(others), d + 1))
        for r, a in enumerate(others):
            jac[r, :d] = pair_gradient(w, instance.mu, best, a, instance.schedule,
                                       instance.family).reshape(-1) * scale
            jac[r, d] = -scale
        return jac

    x0 = np.concatenate([w0.reshape(-1), [f0]])
    res = minimize(
        lambda x: -x[d] * scale, x0,
        jac=lambda x: np.concatenate([np.zeros(d), [-scale]]),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * d + [(0.0, None)],
        constraints=[
            {"type": "ineq", "fun": cons, "jac": cons_jac},
            {"type": "eq", "fun": lambda x: x[:d].sum() - 1.0,
             "jac": lambda x: np.concatenate([np.ones(d), [0.0]])},
        ],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    w = np.clip(res.x[:d], 0.0, None).reshape(n_arms, m)
    return w / w.sum()


def solve_oracle(instance: BanditInstance, iters: int = 200_000, seed: int = 0,
                 alpha0: float = 1.0, polish: bool = True) -> OracleSolution:
    """Maximise the max-min transport cost over cost proportions.

    Exponentiated subgradient ascent from the uniform point with step
    alpha0/sqrt(t) (subgradients rescaled to unit sup-norm), keeping the best
    iterate. An optional SLSQP pass on the epigraph form sharpens the result
    and is kept only if it improves the objective. `seed` is accepted for
    interface stability; the method is deterministic.
    """
    del seed
    if iters < 1:
        raise ValueError("iters must be positive")
    if not instance.unique_best:
        raise DomainError("the best arm at the top fidelity is not unique")
    if not instance.is_mf:
        warnings.warn("instance violates the multi-fidelity constraints", stacklevel=2)
    tail_start = max(1, int(math.ceil(0.9 * iters)))
    w, v, tail_v = _k.exp_gradient_ascent(*_kernel_args(instance), int(iters),
                                          float(alpha0), tail_start)
    gap = float(v - tail_v)
    w = w / w.sum()
    f_star, (best, _) = big_f(w, instance.mu, instance.schedule, instance.family)
    polished = False
    if polish and f_star > 0 and instance.K > 1:
        try:
            w2 = _polish(instance, w, f_star, best)
        except (ValueError, np.linalg.LinAlgError):
            w2 = None
        if w2 is not None:
            f2, _ = big_f(w2, instance.mu, instance.schedule, instance.family)
            if f2 > f_star:
                w, f_star, polished = w2, f2, True
    return OracleSolution(w, float(f_star), int(iters), gap, polished)


def lower_bound_cost(instance: BanditInstance, delta: float,
                     solution: OracleSolution | None = None) -> float:
    """Asymptotic lower bound on the expected cost: C* log(1/(2.4 delta))."""
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    sol = solution if solution is not None else solve_oracle(instance)
    return math.log(1.0 / (2.4 * delta)) / sol.f_star


def zero_weight_mask(instance: BanditInstance) -> np.ndarray:
    """Coordinates that carry no mass in any optimal allocation.

    For a suboptimal arm a, fidelity m is useless when mu[a, m] + xi[m] is at
    least the best arm's top mean; for the best arm, fidelity m is useless
    when mu[best, m] - xi[m] is at most every other arm's top mean.
    """
    if not instance.is_mf:
        raise DomainError("instance violates the multi-fidelity constraints")
    if not instance.unique_best:
        raise DomainError("the best arm at the top fidelity is not unique")
    mu, xi = instance.mu, instance.xi
    star = instance.best_arm
    top = mu[:, -1]
    mask = mu + xi[None, :] >= top[star]
    rival_max = np.max(np.delete(top, star))
    mask[star] = mu[star] - xi <= rival_max
    return mask


def brute_oracle_2xm(instance: BanditInstance, grid_resolution: float = 0.01) -> OracleSolution:
    """Exhaustive simplex-grid maximisation for two arms and at most three fidelities."""
    if instance.K != 2 or instance.M > 3:
        raise NotImplementedError("grid search supports K = 2 and M <= 3 only")
    steps = int(round(1.0 / grid_resolution))
    if steps < 1 or abs(steps * grid_resolution - 1.0) > 1e-9:
        raise ValueError("grid_resolution must divide 1")
    w, v = _k.grid_search(*_kernel_args(instance), steps)
    return OracleSolution(w, float(v), 0, 0.0)
