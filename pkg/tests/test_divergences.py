from __future__ import annotations

import math

import numpy as np
import pytest

from mfbai.divergences import (
    DomainError,
    RewardFamily,
    bernoulli,
    clamp,
    gaussian,
    kl,
    kl_minus,
    kl_plus,
    variance,
)


class TestGaussianKL:
    def test_closed_form(self):
        assert kl(gaussian(0.1), 0.6, 0.5) == pytest.approx(0.01 / 0.2)

    def test_symmetric_and_zero_on_diagonal(self, rng):
        fam = gaussian(0.3)
        for p, q in rng.uniform(-2, 2, size=(50, 2)):
            assert kl(fam, p, q) == pytest.approx(kl(fam, q, p))
            assert kl(fam, p, p) == 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            kl(gaussian(), math.nan, 0.0)

    def test_bad_variance(self):
        with pytest.raises(ValueError):
            gaussian(0.0)


class TestBernoulliKL:
    def test_matches_definition(self, rng):
        fam = bernoulli()
        for p, q in rng.uniform(0.01, 0.99, size=(50, 2)):
            ref = p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))
            assert kl(fam, p, q) == pytest.approx(ref, rel=1e-12)

    def test_endpoints(self):
        fam = bernoulli()
        assert kl(fam, 0.0, 0.5) == pytest.approx(math.log(2))
        assert kl(fam, 1.0, 0.25) == pytest.approx(math.log(4))
        assert kl(fam, 0.3, 0.0) == math.inf
        assert kl(fam, 1.0, 1.0) == 0.0

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            kl(bernoulli(), 1.2, 0.5)
        with pytest.raises(ValueError):
            kl(bernoulli(), 0.5, -0.1)

    def test_clamp(self):
        assert clamp(bernoulli(), -0.2) == pytest.approx(1e-9)
        assert clamp(bernoulli(), 1.5) == pytest.approx(1 - 1e-9)
        assert clamp(gaussian(), -0.2) == -0.2


class TestOneSided:
    @pytest.mark.parametrize("fam", [gaussian(0.5), bernoulli()])
    def test_split(self, fam, rng):
        for p, q in rng.uniform(0.05, 0.95, size=(100, 2)):
            total = kl_plus(fam, p, q) + kl_minus(fam, p, q)
            assert total == pytest.approx(kl(fam, p, q) * (2 if p == q else 1))
            assert kl_plus(fam, p, q) == (kl(fam, p, q) if p <= q else 0.0)
            assert kl_minus(fam, p, q) == (kl(fam, p, q) if p >= q else 0.0)


class TestVariance:
    def test_values(self):
        assert variance(gaussian(0.1), 3.0) == 0.1
        assert variance(bernoulli(), 0.25) == pytest.approx(0.1875)

    def test_derivative_identity(self, rng):
        # d/dq kl(p, q) = (q - p) / v(q)
        for fam in (gaussian(0.4), bernoulli()):
            for p, q in rng.uniform(0.1, 0.9, size=(20, 2)):
                h = 1e-6
                num = (kl(fam, p, q + h) - kl(fam, p, q - h)) / (2 * h)
                np.testing.assert_allclose(num, (q - p) / variance(fam, q), rtol=1e-5, atol=1e-8)


class TestFamily:
    def test_round_trip(self):
        for fam in (gaussian(0.7), bernoulli()):
            assert RewardFamily.from_dict(fam.to_dict()) == fam

    def test_unknown(self):
        with pytest.raises(ValueError):
            RewardFamily("poisson")
