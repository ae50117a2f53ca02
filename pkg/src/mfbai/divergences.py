"""KL divergences for one-parameter reward families and their one-sided parts."""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels as _k

EPS_THETA = _k.EPS_THETA


class DomainError(ValueError):
    """An argument lies outside the parameter space of the reward family."""


@dataclass(frozen=True)
class RewardFamily:
    """Gaussian with known variance, or Bernoulli.

    kind: "gaussian" or "bernoulli"
    sigma2: noise variance, only used by the Gaussian family
    """

    kind: str
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown reward family {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError("sigma2 must be positive and finite")

    @property
    def code(self) -> int:
        return _k.GAUSSIAN if self.kind == "gaussian" else _k.BERNOULLI

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma2": float(self.sigma2)}
        return {"kind": "bernoulli"}

    @classmethod
    def from_dict(cls, data: dict) -> "RewardFamily":
        kind = data.get("kind")
        if kind == "gaussian":
            return cls("gaussian", float(data.get("sigma2", 1.0)))
        return cls(str(kind))


def gaussian(sigma2: float = 1.0) -> RewardFamily:
    return RewardFamily("gaussian", sigma2)


def bernoulli() -> RewardFamily:
    return RewardFamily("bernoulli")


def _check(family: RewardFamily, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite parameter {v}")
        if family.kind == "bernoulli" and not (0.0 <= v <= 1.0):
            raise DomainError(f"Bernoulli parameter {v} outside [0, 1]")


def clamp(family: RewardFamily, x: float) -> float:
    """Clamp a shifted parameter into the open Bernoulli interval; identity for Gaussians."""
    if family.kind == "bernoulli":
        return min(max(x, EPS_THETA), 1.0 - EPS_THETA)
    return x


def kl(family: RewardFamily, p: float, q: float) -> float:
    """KL divergence between the family members with means p and q."""
    _check(family, p, q)
    if family.kind == "bernoulli":
        # Exact endpoint values; +inf when the support of p escapes q.
        if p == q:
            return 0.0
        if q in (0.0, 1.0):
            return math.inf
        if p == 0.0:
            return -math.log(1.0 - q)
        if p == 1.0:
            return -math.log(q)
    return float(_k.kl(family.code, family.sigma2, p, q))


def kl_plus(family: RewardFamily, p: float, q: float) -> float:
    """kl(p, q) when p <= q, else 0."""
    return kl(family, p, q) if p <= q else (_check(family, p, q) or 0.0)


def kl_minus(family: RewardFamily, p: float, q: float) -> float:
    """kl(p, q) when p >= q, else 0."""
    return kl(family, p, q) if p >= q else (_check(family, p, q) or 0.0)


def variance(family: RewardFamily, x: float) -> float:
    """Reward variance of the family member with mean x."""
    _check(family, x)
    if family.kind == "gaussian":
        return family.sigma2
    return x * (1.0 - x)
