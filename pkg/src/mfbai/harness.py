"""Seeded trials, batches, experiment presets, random instances and CSV output."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import (
    MfGradConfig,
    RunRecord,
    lucb_oracle_demo,
    run_grad,
    run_mfgrad,
)
from .divergences import RewardFamily, gaussian
from .model import BanditInstance, FidelitySchedule, StructuralError, preset

ALGORITHMS = ("mfgrad", "mfgrad-const", "grad", "lucb-oracle")
CSV_FIELDS = ("algo", "seed", "trial", "stopped", "tau", "total_cost", "recommendation", "correct")


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based generator whose key is derived from (seed, trial_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial_index])))


def sample_reward(instance: BanditInstance, a: int, m: int, rng: np.random.Generator) -> float:
    """One draw from the distribution of arm a at fidelity m."""
    if not (0 <= a < instance.K and 0 <= m < instance.M):
        raise IndexError(f"invalid (arm, fidelity) = ({a}, {m})")
    mean = instance.mu[a, m]
    if instance.family.kind == "gaussian":
        return float(rng.normal(mean, math.sqrt(instance.family.sigma2)))
    return float(rng.random() < mean)


@dataclass(frozen=True)
class ExperimentSpec:
    """One algorithm on one instance for a number of seeded trials.

    max_steps caps pulls and max_cost caps total cost per trial.
    target_fidelities and lucb_L only apply to "lucb-oracle"; stopping=False
    runs MF-GRAD for exactly max_steps pulls (trajectory experiments).
    """

    instance: BanditInstance
    algo: str = "mfgrad"
    trials: int = 100
    delta: float = 0.01
    seed: int = 0
    max_steps: int = 10_000_000
    max_cost: float = math.inf
    trajectory_stride: int = 0
    config: MfGradConfig | None = None
    stopping: bool = True
    target_fidelities: tuple[int, ...] | None = None
    lucb_L: float = 1.0

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.max_steps < self.instance.K * self.instance.M:
            raise ValueError("max_steps must be at least K*M")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.trajectory_stride < 0:
            raise ValueError("trajectory_stride must be nonnegative")

    def mfgrad_config(self) -> MfGradConfig:
        if self.config is not None:
            return replace(self.config, delta=self.delta)
        mode = "constant" if self.algo == "mfgrad-const" else "theory"
        return MfGradConfig(delta=self.delta, learning_rate_mode=mode)


def run_trial(spec: ExperimentSpec, trial_index: int) -> RunRecord:
    """Run one trial with its own generator; budget exhaustion is reported, not raised."""
    rng = trial_rng(spec.seed, trial_index)
    inst = spec.instance
    if spec.algo == "lucb-oracle":
        fid = spec.target_fidelities if spec.target_fidelities is not None else (0, 0)
        return lucb_oracle_demo(inst, fid, spec.delta, spec.lucb_L, spec.max_steps, rng,
                                seed=spec.seed, trial=trial_index)
    cfg = spec.mfgrad_config()
    if spec.algo == "grad":
        return run_grad(inst, cfg, rng, spec.max_steps, spec.max_cost, spec.trajectory_stride,
                        spec.stopping, seed=spec.seed, trial=trial_index)
    return run_mfgrad(inst, cfg, rng, spec.max_steps, spec.max_cost, spec.trajectory_stride,
                      spec.stopping, spec.algo, spec.seed, trial_index)


@dataclass(frozen=True)
class BatchSummary:
    trials: int
    stopped: int
    error_rate: float
    mean_cost: float
    median_cost: float
    q1_cost: float
    q3_cost: float
    mean_tau: float


def summarize(records: list[RunRecord]) -> BatchSummary:
    if not records:
        raise ValueError("no records to summarise")
    cost = np.array([r.total_cost for r in records])
    q1, med, q3 = np.percentile(cost, [25, 50, 75])
    return BatchSummary(
        trials=len(records),
        stopped=sum(r.stopped for r in records),
        error_rate=float(np.mean([not r.correct for r in records])),
        mean_cost=float(cost.mean()),
        median_cost=float(med),
        q1_cost=float(q1),
        q3_cost=float(q3),
        mean_tau=float(np.mean([r.tau for r in records])),
    )


def _run_one(args):
    spec, i = args
    return run_trial(spec, i)


def run_batch(spec: ExperimentSpec, workers: int = 1) -> tuple[list[RunRecord], BatchSummary]:
    """All trials of a spec, ordered by trial index, with a cost/error summary."""
    jobs = [(spec, i) for i in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_run_one(j) for j in jobs]
    records.sort(key=lambda r: r.trial)
    return records, summarize(records)


def random_instance_gen(K: int, M: int, a_vec, b_vec, min_gap: float = 0.1, seed: int = 0,
                        lam=None, family: RewardFamily | None = None,
                        top_range: tuple[float, float] = (0.0, 1.0),
                        max_attempts: int = 10_000) -> BanditInstance:
    """Random multi-fidelity instance.

    Top-fidelity means are uniform on `top_range`, redrawn until the best arm
    leads the runner-up by at least `min_gap`. Lower fidelity means are
    uniform within xi_m = a_m + b_m / 2 of the arm's top mean. Costs default
    to the halving ladder 2^(m - M).
    """
    a_vec = np.asarray(a_vec, dtype=float).reshape(-1)
    b_vec = np.asarray(b_vec, dtype=float).reshape(-1)
    if K < 2 or M < 1 or a_vec.size != M or b_vec.size != M:
        raise StructuralError("a and b must have length M, with K >= 2")
    if np.any(np.diff(a_vec) > 0) or np.any(np.diff(b_vec) > 0) or a_vec[-1] != 0 or b_vec[-1] != 0:
        raise StructuralError("a and b must be nonincreasing with last entry 0")
    xi = a_vec + b_vec / 2.0
    if lam is None:
        lam = 2.0 ** np.arange(1 - M, 1)
    sched = FidelitySchedule(xi, lam).validate()
    family = family if family is not None else gaussian(0.1)
    rng = np.random.default_rng(seed)
    lo, hi = top_range
    for _ in range(max_attempts):
        top = rng.uniform(lo, hi, size=K)
        srt = np.sort(top)
        if srt[-1] - srt[-2] >= min_gap:
            break
    else:
        raise ValueError(f"no top-fidelity means with gap {min_gap} after {max_attempts} attempts")
    mu = rng.uniform(top[:, None] - xi[None, :], top[:, None] + xi[None, :])
    mu[:, -1] = top
    if family.kind == "bernoulli":
        mu = np.clip(mu, 0.0, 1.0)
    return BanditInstance(mu, family, sched)


def write_records_csv(records: list[RunRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_FIELDS)
        for r in records:
            wr.writerow([r.algo, r.seed, r.trial, int(r.stopped), r.tau, repr(r.total_cost),
                         r.recommendation, int(r.correct)])


def read_records_csv(path: str | Path) -> list[RunRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(
                algo=row["algo"], seed=int(row["seed"]), trial=int(row["trial"]),
                stopped=bool(int(row["stopped"])), tau=int(row["tau"]),
                total_cost=float(row["total_cost"]), recommendation=int(row["recommendation"]),
                correct=bool(int(row["correct"]))))
    return out


def write_trajectory_csv(record: RunRecord, path: str | Path) -> None:
    if not record.trajectory:
        raise ValueError("record has no trajectory")
    K, M = np.shape(record.trajectory[0][1])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"omega_{a}_{m}" for a in range(K) for m in range(M)])
        for t, w in record.trajectory:
            wr.writerow([t] + [repr(float(x)) for x in np.ravel(w)])


def read_trajectory_csv(path: str | Path) -> list[tuple[int, np.ndarray]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    K = 1 + max(int(h.split("_")[1]) for h in header[1:])
    M = 1 + max(int(h.split("_")[2]) for h in header[1:])
    return [(int(r[0]), np.array([float(x) for x in r[1:]]).reshape(K, M)) for r in rows[1:]]


@dataclass(frozen=True)
class DemoPreset:
    """A named group of experiment specs reproducing one figure."""

    name: str
    specs: tuple[ExperimentSpec, ...]
    description: str = ""
    notes: dict = field(default_factory=dict)


def demo_presets(trials: int | None = None, seed: int = 0) -> dict[str, DemoPreset]:
    """Desk-scale figure presets; `trials` overrides the default trial counts."""
    t1000 = trials or 1000
    t100 = trials or 100
    t50 = trials or 50
    mu1 = preset("table-mu1")
    five = preset("five-by-two")
    lucb = preset("lucb-2x2")

    def pair(inst, n):
        return tuple(ExperimentSpec(inst, algo, n, 0.01, seed, 10_000_000)
                     for algo in ("mfgrad", "grad"))

    return {
        "fig1": DemoPreset("fig1", pair(mu1, t1000),
                           "cost complexity on table-mu1 at delta=0.01"),
        "fig2": DemoPreset("fig2", pair(five, t1000),
                           "cost complexity on five-by-two at delta=0.01"),
        "fig3": DemoPreset("fig3", (ExperimentSpec(five, "mfgrad", t100, 0.01, seed, 100_000,
                                                   trajectory_stride=100, stopping=False),),
                           "cost proportions over 1e5 steps on five-by-two"),
        "lucb-bug": DemoPreset("lucb-bug", (ExperimentSpec(lucb, "lucb-oracle", t50, 0.01, seed,
                                                           1_000_000, target_fidelities=(0, 0)),),
                               "LUCB at the cheap fidelity does not stop"),
    }
