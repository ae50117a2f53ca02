"""Sequential identification strategies and their stopping thresholds.

MF-GRAD runs exponential-weights ascent on the max-min transport cost using
the plug-in means, mixes in uniform forced exploration and tracks the
cumulative pull proportions. It stops when the GLR statistic exceeds the
threshold. GRAD is the same program restricted to the top fidelity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .divergences import DomainError
from .model import BanditInstance
from .transport import glr_statistic

THRESHOLD_MODES = ("simplified", "theoretical")


@dataclass(frozen=True)
class MfGradConfig:
    """Tuning of MF-GRAD.

    clip_constant: gains are clipped at clip_constant * sqrt(t)
    constant_alpha: learning rate when learning_rate_mode is "constant",
        otherwise the rate is 1/sqrt(t)
    c_tilde: additive constant of the theoretical threshold
    tie_epsilon: transient bonus that breaks ties among empirical best arms
    """

    delta: float = 0.1
    clip_constant: float = 100.0
    learning_rate_mode: str = "theory"
    constant_alpha: float = 0.25
    threshold_mode: str = "simplified"
    c_tilde: float = 0.0
    tie_epsilon: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not self.clip_constant > 0:
            raise ValueError("clip_constant must be positive")
        if self.learning_rate_mode not in ("theory", "constant"):
            raise ValueError("learning_rate_mode must be 'theory' or 'constant'")
        if not self.constant_alpha > 0:
            raise ValueError("constant_alpha must be positive")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"threshold_mode must be one of {THRESHOLD_MODES}")
        if not self.tie_epsilon > 0:
            raise ValueError("tie_epsilon must be positive")

    @property
    def alpha_const(self) -> float:
        """Constant rate handed to the kernel; 0 selects 1/sqrt(t)."""
        return self.constant_alpha if self.learning_rate_mode == "constant" else 0.0


@dataclass
class AlgoState:
    """Mutable sampling state of one MF-GRAD run (arrays are K x M)."""

    t: int
    counts: np.ndarray
    sums: np.ndarray
    hat_mu: np.ndarray
    cum_gains: np.ndarray
    cum_pi_prime: np.ndarray
    tilde_omega: np.ndarray
    lam: np.ndarray

    @property
    def costs(self) -> np.ndarray:
        return self.lam * self.counts

    @property
    def total_cost(self) -> float:
        return float(self.costs.sum())

    def cost_proportions(self) -> np.ndarray:
        c = self.costs
        return c / c.sum()


@dataclass
class RunRecord:
    """Outcome of one trial. `trajectory` holds (t, cost proportions) snapshots."""

    algo: str
    seed: int
    trial: int
    stopped: bool
    tau: int
    total_cost: float
    recommendation: int
    correct: bool
    trajectory: list = field(default_factory=list, compare=False, repr=False)

    @property
    def forced(self) -> bool:
        """The recommendation was made at the budget, not by the stopping rule."""
        return not self.stopped


def threshold(t: int, delta: float, K: int, M: int, mode: str = "simplified",
              c_tilde: float = 0.0) -> float:
    """Stopping threshold.

    simplified: log(K/delta) + M log(log t + 1)
    theoretical: log(K/delta) + 2M log(4 log(K/delta) + 1) + 12M log(log t + 3) + 2M c_tilde
    """
    if t < 1:
        raise DomainError("t must be at least 1")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if mode not in THRESHOLD_MODES:
        raise ValueError(f"mode must be one of {THRESHOLD_MODES}")
    code = _k.SIMPLIFIED if mode == "simplified" else _k.THEORETICAL
    return float(_k.threshold_value(code, K, M, delta, float(t), c_tilde))


class NoiseSource:
    """Standardised noise for reward draws: normals for Gaussian arms, uniforms for Bernoulli."""

    def __init__(self, instance: BanditInstance, rng: np.random.Generator):
        self.rng = rng
        self.gaussian = instance.family.kind == "gaussian"

    def draw(self, n: int) -> np.ndarray:
        if self.gaussian:
            return self.rng.standard_normal(n)
        return self.rng.random(n)


def _reward(instance: BanditInstance, a: int, m: int, z: float) -> float:
    if instance.family.kind == "gaussian":
        return float(instance.mu[a, m] + math.sqrt(instance.family.sigma2) * z)
    return 1.0 if z < instance.mu[a, m] else 0.0


def init_state(instance: BanditInstance, rng: np.random.Generator) -> AlgoState:
    """Pull every (arm, fidelity) once in row-major order.

    The tracked cumulative proportions start as the sum of what the uniform
    cost allocation with forced exploration prescribes over these KM rounds.
    """
    K, M = instance.K, instance.M
    km = K * M
    noise = NoiseSource(instance, rng).draw(km)
    sums = np.empty((K, M))
    for q in range(km):
        a, m = divmod(q, M)
        sums[a, m] = _reward(instance, a, m, noise[q])
    counts = np.ones((K, M))
    hat_mu = sums.copy()
    if instance.family.kind == "bernoulli":
        hat_mu = np.clip(hat_mu, _k.EPS_THETA, 1.0 - _k.EPS_THETA)
    omega = np.full((K, M), 1.0 / km)
    lam = np.asarray(instance.lam, dtype=float)
    pi0 = omega / lam
    pi0 /= pi0.sum()
    gammas = 1.0 / (4.0 * np.sqrt(np.arange(1, km + 1)))
    cum_pi = (km - gammas.sum()) * pi0 + gammas.sum() / km
    return AlgoState(km, counts, sums, hat_mu, np.zeros((K, M)), cum_pi, omega, lam.copy())


def _advance(state: AlgoState, instance: BanditInstance, config: MfGradConfig,
             noise: np.ndarray, do_stop: bool) -> bool:
    t, stopped = _k.mfgrad_run(
        instance.family.code, instance.family.sigma2,
        np.ascontiguousarray(instance.mu), np.ascontiguousarray(instance.xi),
        np.ascontiguousarray(instance.lam),
        state.counts, state.sums, state.hat_mu, state.tilde_omega,
        state.cum_gains, state.cum_pi_prime, state.t, noise,
        config.clip_constant, config.alpha_const, config.tie_epsilon, do_stop,
        _k.SIMPLIFIED if config.threshold_mode == "simplified" else _k.THEORETICAL,
        instance.K, instance.M, config.delta, config.c_tilde)
    state.t = int(t)
    return bool(stopped)


def mfgrad_step(state: AlgoState, config: MfGradConfig, instance: BanditInstance,
                rng: np.random.Generator) -> AlgoState:
    """One MF-GRAD round: update the allocation, pull by tracking, observe."""
    _advance(state, instance, config, NoiseSource(instance, rng).draw(1), False)
    return state


def mfgrad_should_stop(state: AlgoState, config: MfGradConfig,
                       instance: BanditInstance) -> tuple[bool, int]:
    """(stop?, recommendation) from the GLR statistic on the current counts."""
    stat, best = glr_statistic(state.counts, state.hat_mu, instance.schedule, instance.family)
    beta = threshold(state.t, config.delta, instance.K, instance.M,
                     config.threshold_mode, config.c_tilde)
    return stat >= beta, best


def grad_instance(instance: BanditInstance) -> BanditInstance:
    """The single-fidelity problem GRAD solves: top-fidelity column only."""
    return instance.top_fidelity()


def grad_baseline_step(state: AlgoState, config: MfGradConfig, instance: BanditInstance,
                       rng: np.random.Generator) -> AlgoState:
    return mfgrad_step(state, config, grad_instance(instance), rng)


def grad_should_stop(state: AlgoState, config: MfGradConfig,
                     instance: BanditInstance) -> tuple[bool, int]:
    return mfgrad_should_stop(state, config, grad_instance(instance))


def run_mfgrad(instance: BanditInstance, config: MfGradConfig, rng: np.random.Generator,
               max_steps: int, max_cost: float = math.inf, trajectory_stride: int = 0,
               stopping: bool = True, algo: str = "mfgrad", seed: int = 0,
               trial: int = 0, chunk: int = 4096) -> RunRecord:
    """Run MF-GRAD until the stopping rule fires or a budget is exhausted.

    max_steps caps the number of pulls, max_cost the total sampling cost.
    With stopping=False the run always lasts max_steps pulls.
    """
    km = instance.K * instance.M
    if max_steps < km:
        raise ValueError(f"max_steps must be at least K*M = {km}")
    noise = NoiseSource(instance, rng)
    state = init_state(instance, rng)
    lam_max = float(np.max(instance.lam))
    traj = []

    def snap():
        if trajectory_stride and state.t % trajectory_stride == 0:
            traj.append((state.t, state.cost_proportions()))

    snap()
    stopped = False
    if stopping:
        stopped, _ = mfgrad_should_stop(state, config, instance)
    while not stopped and state.t < max_steps and state.total_cost < max_cost:
        n = min(chunk, max_steps - state.t)
        if trajectory_stride:
            n = min(n, trajectory_stride - state.t % trajectory_stride)
        if math.isfinite(max_cost):
            n = min(n, max(1, int((max_cost - state.total_cost) // lam_max)))
        stopped = _advance(state, instance, config, noise.draw(n), stopping)
        snap()
    _, rec = glr_statistic(state.counts, state.hat_mu, instance.schedule, instance.family)
    return RunRecord(algo, seed, trial, stopped, state.t, state.total_cost, rec,
                     rec == instance.best_arm, traj)


def run_grad(instance: BanditInstance, config: MfGradConfig, rng: np.random.Generator,
             max_steps: int, max_cost: float = math.inf, trajectory_stride: int = 0,
             stopping: bool = True, seed: int = 0, trial: int = 0) -> RunRecord:
    """GRAD: MF-GRAD on the top fidelity alone."""
    return run_mfgrad(grad_instance(instance), config, rng, max_steps, max_cost,
                      trajectory_stride, stopping, "grad", seed, trial)


def lucb_oracle_demo(instance: BanditInstance, target_fidelities, delta: float,
                     L: float = 1.0, max_steps: int = 1_000_000,
                     rng: np.random.Generator | None = None, seed: int = 0, trial: int = 0,
                     chunk: int = 1 << 16) -> RunRecord:
    """LUCB with both arms sampled at fixed, known fidelities.

    Each round pulls both arms once; t counts pulls. The confidence width is
    sqrt(log(L t^4 / delta) / n) and indices are clamped to [0, 1]. Stops
    when the lower index of the leader (largest upper index) exceeds the
    upper index of the other arm.
    """
    if instance.K != 2:
        raise NotImplementedError("the demonstration supports two arms only")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if not L > 0:
        raise DomainError("L must be positive")
    fid = np.asarray(target_fidelities, dtype=int).reshape(-1)
    if fid.shape != (2,) or np.any(fid < 0) or np.any(fid >= instance.M):
        raise DomainError("target_fidelities must give one valid fidelity per arm")
    rng = rng if rng is not None else np.random.default_rng(seed)
    means = instance.mu[[0, 1], fid]
    xi = instance.xi[fid]
    lam = instance.lam[fid]
    gaussian = instance.family.kind == "gaussian"
    sd = math.sqrt(instance.family.sigma2) if gaussian else 0.0

    rounds_max = max_steps // 2
    sums = np.zeros(2)
    done = 0
    leader = 0
    while done < rounds_max:
        b = min(chunk, rounds_max - done)
        if gaussian:
            x = means + sd * rng.standard_normal((b, 2))
        else:
            x = (rng.random((b, 2)) < means).astype(float)
        cs = sums + np.cumsum(x, axis=0)
        n = np.arange(done + 1, done + b + 1, dtype=float)
        t = 2.0 * n
        beta = np.sqrt(np.log(L * t ** 4 / delta) / n)[:, None]
        mean = cs / n[:, None]
        lcb = np.clip(mean - xi - beta, 0.0, 1.0)
        ucb = np.clip(mean + xi + beta, 0.0, 1.0)
        lead = (ucb[:, 1] > ucb[:, 0]).astype(int)
        rows = np.arange(b)
        stop = lcb[rows, lead] > ucb[rows, 1 - lead]
        if stop.any():
            r = int(np.argmax(stop))
            rounds = done + r + 1
            rec = int(lead[r])
            return RunRecord("lucb-oracle", seed, trial, True, 2 * rounds,
                             float(rounds * lam.sum()), rec, rec == instance.best_arm)
        leader = int(lead[-1])
        sums = cs[-1]
        done += b
    return RunRecord("lucb-oracle", seed, trial, False, 2 * rounds_max,
                     float(rounds_max * lam.sum()), leader, leader == instance.best_arm)
