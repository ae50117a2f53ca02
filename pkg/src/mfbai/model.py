"""Multi-fidelity bandit instances, validation and cost/pull proportion maps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .divergences import DomainError, RewardFamily, gaussian


class StructuralError(ValueError):
    """Malformed dimensions or an invalid fidelity schedule."""


@dataclass(frozen=True)
class FidelitySchedule:
    """Precision bounds `xi` (strictly decreasing to 0) and costs `lam` (strictly increasing)."""

    xi: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        lam = np.array(self.lam, dtype=float).reshape(-1)
        if xi.shape != lam.shape or xi.size == 0:
            raise StructuralError("xi and lambda must be non-empty and of equal length")
        xi.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "lam", lam)

    @property
    def M(self) -> int:
        return self.xi.size

    def violations(self) -> list[str]:
        out = []
        xi, lam = self.xi, self.lam
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(lam))):
            out.append("schedule entries must be finite")
        if np.any(xi < 0):
            out.append(f"negative xi at fidelities {np.flatnonzero(xi < 0).tolist()}")
        if xi[-1] != 0.0:
            out.append(f"xi at the top fidelity must be 0, got {xi[-1]}")
        bad = np.flatnonzero(np.diff(xi) >= 0)
        if bad.size:
            out.append(f"xi not strictly decreasing between fidelities {bad.tolist()} and {(bad + 1).tolist()}")
        if np.any(lam <= 0):
            out.append(f"non-positive cost at fidelities {np.flatnonzero(lam <= 0).tolist()}")
        bad = np.flatnonzero(np.diff(lam) <= 0)
        if bad.size:
            out.append(f"lambda not strictly increasing between fidelities {bad.tolist()} and {(bad + 1).tolist()}")
        return out

    def validate(self) -> "FidelitySchedule":
        errs = self.violations()
        if errs:
            raise StructuralError("; ".join(errs))
        return self


@dataclass(frozen=True)
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    is_mf: bool = True
    unique_best: bool = True

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class BanditInstance:
    """K x M mean matrix (rows are arms, columns fidelities) with family and schedule."""

    mu: np.ndarray
    family: RewardFamily
    schedule: FidelitySchedule

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 2:
            raise StructuralError("mu must be a K x M matrix")
        if mu.shape[0] < 2:
            raise StructuralError("at least two arms are required")
        if mu.shape[1] != self.schedule.M:
            raise StructuralError(
                f"mu has {mu.shape[1]} fidelities but the schedule has {self.schedule.M}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def K(self) -> int:
        return self.mu.shape[0]

    @property
    def M(self) -> int:
        return self.mu.shape[1]

    @property
    def xi(self) -> np.ndarray:
        return self.schedule.xi

    @property
    def lam(self) -> np.ndarray:
        return self.schedule.lam

    @property
    def is_mf(self) -> bool:
        dev = np.abs(self.mu - self.mu[:, -1:])
        return bool(np.all(dev <= self.xi[None, :] + 1e-12))

    @property
    def unique_best(self) -> bool:
        top = self.mu[:, -1]
        return int(np.sum(top == top.max())) == 1

    @property
    def best_arm(self) -> int:
        """Lowest-index arm with the largest top-fidelity mean."""
        return int(np.argmax(self.mu[:, -1]))

    def top_fidelity(self) -> "BanditInstance":
        """The single-fidelity instance made of the top-fidelity column."""
        sched = FidelitySchedule([0.0], [self.lam[-1]])
        return BanditInstance(self.mu[:, -1:], self.family, sched)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "M": self.M,
            "family": self.family.to_dict(),
            "xi": self.xi.tolist(),
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BanditInstance":
        try:
            family = RewardFamily.from_dict(data["family"])
            sched = FidelitySchedule(data["xi"], data["lambda"])
            inst = cls(np.asarray(data["mu"], dtype=float), family, sched)
        except KeyError as exc:
            raise StructuralError(f"missing field {exc.args[0]!r}") from None
        for key, val in (("K", inst.K), ("M", inst.M)):
            if key in data and int(data[key]) != val:
                raise StructuralError(f"declared {key}={data[key]} but mu implies {val}")
        return inst


def validate(instance: BanditInstance) -> ValidationReport:
    """Check schedule, parameter space, MF and uniqueness constraints.

    Violating the MF constraint is only a warning since estimated means can
    legitimately do so.
    """
    errors = list(instance.schedule.violations())
    warnings = []
    mu = instance.mu
    if not np.all(np.isfinite(mu)):
        errors.append("mu contains non-finite entries")
    if instance.family.kind == "bernoulli":
        bad = np.argwhere((mu < 0) | (mu > 1))
        if bad.size:
            errors.append(f"Bernoulli means outside [0, 1] at {bad.tolist()}")
    dev = np.abs(mu - mu[:, -1:]) - instance.xi[None, :]
    bad = np.argwhere(dev > 1e-12)
    if bad.size:
        warnings.append(f"MF constraint violated at (arm, fidelity) {bad.tolist()}")
    top = mu[:, -1]
    tied = np.flatnonzero(top == top.max())
    if tied.size > 1:
        warnings.append(f"best arm not unique at the top fidelity: arms {tied.tolist()}")
    return ValidationReport(errors, warnings, is_mf=not bad.size, unique_best=tied.size == 1)


def _check_simplex(w: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise DomainError(f"weights must sum to 1, got {w.sum()}")
    return w


def cost_to_pull(w: np.ndarray, schedule: FidelitySchedule) -> np.ndarray:
    """Convert cost proportions to pull proportions."""
    w = _check_simplex(w)
    p = w / schedule.lam
    return p / p.sum()


def pull_to_cost(pi: np.ndarray, schedule: FidelitySchedule) -> np.ndarray:
    """Convert pull proportions to cost proportions."""
    pi = _check_simplex(pi)
    c = pi * schedule.lam
    return c / c.sum()


# Built-in instances. Rows are arms, columns fidelities.

_TABLE_XI = [0.1, 0.08, 0.05, 0.025, 0.0]

PRESETS_RAW = {
    "table-mu1": dict(
        sigma2=0.1, xi=_TABLE_XI, lam=[0.05, 0.1, 0.2, 0.4, 5.0],
        mu=[[0.9465, 0.7727, 0.8812, 0.8284, 0.8494],
            [0.8526, 0.8708, 0.8515, 0.8374, 0.8401],
            [0.8162, 0.9050, 0.8209, 0.8353, 0.8495],
            [0.9099, 1.0594, 1.0083, 0.9745, 0.9856]]),
    "table-mu2": dict(
        sigma2=0.1, xi=_TABLE_XI, lam=[0.05, 0.1, 0.2, 0.4, 1.0],
        mu=[[0.6944, 0.5634, 0.6178, 0.6323, 0.6171],
            [0.5080, 0.3723, 0.4322, 0.4225, 0.4216],
            [0.4153, 0.4132, 0.3817, 0.3838, 0.3831],
            [0.3564, 0.4570, 0.4065, 0.3582, 0.3783]]),
    "table-mu3": dict(
        sigma2=0.1, xi=[0.1, 0.08, 0.04, 0.02, 0.0], lam=[0.1, 0.125, 0.25, 0.5, 1.0],
        mu=[[0.41, 0.45, 0.47, 0.48, 0.5],
            [0.35, 0.37, 0.38, 0.36, 0.35],
            [0.51, 0.56, 0.64, 0.62, 0.61],
            [0.41, 0.39, 0.40, 0.42, 0.42]]),
    "five-by-two": dict(
        sigma2=0.1, xi=[0.1, 0.0], lam=[0.5, 5.0],
        mu=[[0.4, 0.5]] * 4 + [[0.5, 0.6]]),
    "lucb-2x2": dict(
        sigma2=1.0, xi=[0.1, 0.0], lam=[0.1, 5.0],
        mu=[[0.64, 0.6], [0.46, 0.5]]),
}

PRESET_NAMES = tuple(PRESETS_RAW) + ("compare-lb",)


def compare_lb(gap: float = 0.2, xi_low: float | None = None, lam_low: float = 1.0,
               lam_top: float = 5.0) -> BanditInstance:
    """Two-arm, two-fidelity instance where the low fidelity is uninformative.

    Arm means are +-gap/2 at the top fidelity and +-xi_low at the low one, with
    unit-scale KL (variance 1/2). Requires gap == xi_low for the intended shape.
    """
    xi_low = gap if xi_low is None else xi_low
    if not xi_low > 0:
        raise DomainError("xi_low must be positive")
    sched = FidelitySchedule([xi_low, 0.0], [lam_low, lam_top]).validate()
    mu = [[xi_low, gap / 2.0], [-xi_low, -gap / 2.0]]
    return BanditInstance(mu, gaussian(0.5), sched)


def preset(name: str) -> BanditInstance:
    """Built-in instance by name. `compare-lb` accepts `compare-lb:gap,xi,lam_low,lam_top`."""
    if name.startswith("compare-lb"):
        args = name.split(":", 1)[1].split(",") if ":" in name else []
        return compare_lb(*[float(a) for a in args])
    if name not in PRESETS_RAW:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    raw = PRESETS_RAW[name]
    sched = FidelitySchedule(raw["xi"], raw["lam"]).validate()
    return BanditInstance(raw["mu"], gaussian(raw["sigma2"]), sched)


def load_instance(ref: str | Path) -> BanditInstance:
    """Load an instance from a JSON path or a preset name."""
    p = Path(ref)
    if p.suffix == ".json" or p.exists():
        with open(p) as fh:
            return BanditInstance.from_dict(json.load(fh))
    return preset(str(ref))


def save_instance(instance: BanditInstance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(instance.to_dict(), fh, indent=2)

