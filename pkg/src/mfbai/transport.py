"""Transport costs to the closest alternative model and the max-min objective.

For a weight matrix w (cost proportions, or raw counts with unit costs) and a
mean matrix mu, the pair cost f(i, j) is the cheapest weighted KL move of rows
i and j onto multi-fidelity consistent means where arm j beats arm i at the
top fidelity. Each arm's part depends on a single scalar (its top-fidelity
mean), so every minimisation is one-dimensional and convex; the minimisers
are found exactly by enumerating the breakpoints mu +- xi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .divergences import DomainError, RewardFamily
from .model import FidelitySchedule


@dataclass(frozen=True)
class TransportResult:
    """Pair cost and the minimisers that realise it.

    regime is "separated" when each arm is projected on its own (the
    projections are already ordered the right way) and "merged" when both
    arms share the common top-fidelity value `eta`.
    """

    value: float
    regime: str
    eta: float
    psi_i: float
    psi_j: float
    pair: tuple[int, int]


def _arrays(w, mu, schedule: FidelitySchedule):
    w = np.ascontiguousarray(w, dtype=float)
    mu = np.ascontiguousarray(mu, dtype=float)
    if mu.ndim != 2 or w.shape != mu.shape or mu.shape[1] != schedule.M:
        raise DomainError(f"shape mismatch: w {w.shape}, mu {mu.shape}, M={schedule.M}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DomainError("weights must be finite and nonnegative")
    if not np.all(np.isfinite(mu)):
        raise DomainError("means must be finite")
    xi = np.ascontiguousarray(schedule.xi)
    lam = np.ascontiguousarray(schedule.lam)
    return w, mu, xi, lam


def _row_args(weights_row, means_row, schedule):
    c = np.asarray(weights_row, dtype=float).reshape(-1)
    mu = np.asarray(means_row, dtype=float).reshape(-1)
    if c.shape != mu.shape or c.size != schedule.M:
        raise DomainError("row length must equal the number of fidelities")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise DomainError("weights must be finite and nonnegative")
    return c, mu


def line_objective(family: RewardFamily, weights, means, xi, lam, x: float) -> float:
    """Sum over terms of (w/lam) times the shifted one-sided KL cost at x."""
    c = np.asarray(weights, dtype=float) / np.asarray(lam, dtype=float)
    return float(_k.line_objective(family.code, family.sigma2,
                                   np.ascontiguousarray(means, dtype=float),
                                   np.ascontiguousarray(xi, dtype=float), c, float(x)))


def solve_psi(weights_row, means_row, schedule: FidelitySchedule,
              family: RewardFamily) -> tuple[float, float]:
    """Per-arm projection: (minimiser, minimum) of the single-arm objective.

    If the row is already consistent for a range of values, the midpoint of
    that range is returned with minimum 0.
    """
    c, mu = _row_args(weights_row, means_row, schedule)
    if not np.any(c > 0):
        raise DomainError("at least one weight must be positive")
    x, v, _ = _k.solve_line(family.code, family.sigma2, mu,
                            np.ascontiguousarray(schedule.xi), c / schedule.lam)
    return float(x), float(v)


def solve_eta(pair_weights, pair_means, schedule: FidelitySchedule,
              family: RewardFamily) -> tuple[float, float]:
    """Common top-fidelity value (minimiser, minimum) for two merged arms."""
    w = np.asarray(pair_weights, dtype=float)
    mu = np.asarray(pair_means, dtype=float)
    if w.shape != (2, schedule.M) or mu.shape != (2, schedule.M):
        raise DomainError("pair weights and means must be 2 x M")
    if np.any(w < 0) or not np.any(w > 0):
        raise DomainError("weights must be nonnegative with a positive entry")
    xi = np.concatenate([schedule.xi, schedule.xi])
    c = (w / schedule.lam).reshape(-1)
    x, v, _ = _k.solve_line(family.code, family.sigma2,
                            np.ascontiguousarray(mu.reshape(-1)), xi, c)
    return float(x), float(v)


def transport_pair(w, mu, i: int, j: int, schedule: FidelitySchedule,
                   family: RewardFamily) -> TransportResult:
    """Cost of the cheapest alternative in which arm j is at least as good as arm i."""
    w, mu, xi, lam = _arrays(w, mu, schedule)
    n_arms = mu.shape[0]
    if not (0 <= i < n_arms and 0 <= j < n_arms) or i == j:
        raise DomainError(f"invalid pair ({i}, {j})")
    psi, hval, status = _k.all_arm_solutions(family.code, family.sigma2, w, mu, xi, lam)
    v, regime, eta = _k.pair_from_arms(family.code, family.sigma2, w, mu, xi, lam,
                                       i, j, psi, hval, status)
    return TransportResult(
        value=float(v),
        regime="merged" if regime == _k.MERGED else "separated",
        eta=float(eta),
        psi_i=float(psi[i]),
        psi_j=float(psi[j]),
        pair=(i, j),
    )


def big_f(w, mu, schedule: FidelitySchedule, family: RewardFamily) -> tuple[float, tuple[int, int]]:
    """max_i min_{j != i} f(i, j) with the attaining pair (lowest indices on ties)."""
    w, mu, xi, lam = _arrays(w, mu, schedule)
    v, i, j = _k.max_min(family.code, family.sigma2, w, mu, xi, lam)
    return float(v), (int(i), int(j))


def pair_costs(w, mu, schedule: FidelitySchedule, family: RewardFamily) -> np.ndarray:
    """K x K matrix of pair costs; the diagonal is 0."""
    w, mu, xi, lam = _arrays(w, mu, schedule)
    return _k.pair_matrix(family.code, family.sigma2, w, mu, xi, lam)


def pair_gradient(w, mu, i: int, j: int, schedule: FidelitySchedule,
                  family: RewardFamily) -> np.ndarray:
    """Gradient in w of the (i, j) pair cost; nonzero only on rows i and j."""
    w, mu, xi, lam = _arrays(w, mu, schedule)
    g = np.zeros_like(w)
    _k.fill_pair_gradient(family.code, family.sigma2, w, mu, xi, lam, i, j, g)
    return g


def subgradient_f(w, mu, schedule: FidelitySchedule, family: RewardFamily) -> np.ndarray:
    """A supergradient of the concave max-min cost at w.

    Requires a positive max-min value; break top-fidelity ties beforehand.
    """
    w, mu, xi, lam = _arrays(w, mu, schedule)
    g, v, _, _ = _k.subgradient(family.code, family.sigma2, w, mu, xi, lam)
    if not v > 0:
        raise DomainError("max-min cost is zero; the subgradient is undefined")
    return g


def glr_matrix(counts, hat_mu, schedule: FidelitySchedule, family: RewardFamily) -> np.ndarray:
    """Stopping statistics f(i, j) with the pull counts as per-term weights."""
    counts, hat_mu, xi, _ = _arrays(counts, hat_mu, schedule)
    unit = np.ones(schedule.M)
    return _k.pair_matrix(family.code, family.sigma2, counts, hat_mu, xi, unit)


def glr_statistic(counts, hat_mu, schedule: FidelitySchedule,
                  family: RewardFamily) -> tuple[float, int]:
    """max_i min_{j != i} of the stopping statistics and the maximising arm."""
    counts, hat_mu, xi, _ = _arrays(counts, hat_mu, schedule)
    unit = np.ones(schedule.M)
    v, i, _ = _k.max_min(family.code, family.sigma2, counts, hat_mu, xi, unit)
    return float(v), int(i)
