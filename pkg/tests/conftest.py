"""Shared test helpers: instrumented and synthetic loss models."""

import numpy as np
import pytest

from hotuner.losses import LossEvaluation, as_vector


class CountingModel:
    """Wraps a loss model and counts evaluations; records normalizers seen."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.seen = []

    @property
    def family(self):
        return self.inner.family

    @property
    def known_optimum(self):
        return getattr(self.inner, "known_optimum", None)

    @property
    def smoothness_mode(self):
        return self.inner.smoothness_mode

    def eval(self, theta, sample):
        self.calls += 1
        ev = self.inner.eval(theta, sample)
        self.seen.append((np.array(theta, dtype=float), sample, ev.normalizer))
        return ev

    def smoothness_bound(self, sample):
        return self.inner.smoothness_bound(sample)

    def strong_convexity_constant(self):
        return self.inner.strong_convexity_constant()


class DiagonalQuadratic:
    """Synthetic strongly convex quadratic 0.5 * sum(c_i * theta_i^2).

    Smoothness is max(c), strong convexity min(c); the sample argument is
    ignored, which makes it convenient for rate tests with exact constants.
    """

    family = "diagonal-quadratic"
    smoothness_mode = "exact-hessian"

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.known_optimum = np.zeros_like(self.coeffs)

    def eval(self, theta, sample=None):
        theta = as_vector(theta)
        value = 0.5 * float(np.sum(self.coeffs * theta * theta))
        gradient = self.coeffs * theta
        hessian_bound = float(np.max(self.coeffs))
        return LossEvaluation(value, gradient, hessian_bound, 1.0 + hessian_bound)

    def smoothness_bound(self, sample=None):
        return float(np.max(self.coeffs))

    def strong_convexity_constant(self):
        return float(np.min(self.coeffs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
