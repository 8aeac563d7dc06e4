"""Loss models: value, gradient, and a spectral bound on the Hessian.

Every model evaluates against one regressor sample and reports four numbers:
the loss value, its gradient, an upper bound ``hessian_bound`` on the largest
Hessian eigenvalue, and the ``normalizer`` that gradient-normalizing tuners
divide by.  For the base families the normalizer is ``1 + hessian_bound``;
the ridge-regularized wrapper is already normalized and reports 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatchError, EvaluationOverflowError, InvalidParameterError

__all__ = [
    "LinearSample",
    "LogSumExpSample",
    "RegressorSample",
    "LossEvaluation",
    "QuadraticRegressionLoss",
    "LogSumExpLoss",
    "RegularizedLoss",
    "LossModel",
    "as_vector",
    "evaluate",
    "performance_error",
    "strong_convexity_constant",
]

CONSERVATIVE = "conservative-bound"
EXACT = "exact-hessian"


def as_vector(values) -> np.ndarray:
    """Coerce to a 1-D float64 parameter vector, requiring finite entries."""
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionMismatchError(f"parameter vector must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EvaluationOverflowError("parameter vector has non-finite entries", theta=arr)
    return arr


@dataclass(frozen=True)
class LinearSample:
    """One iteration of linear-regression data: regressor ``phi`` and output ``y``."""

    phi: np.ndarray
    y: float

    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "phi", as_vector(self.phi))
        object.__setattr__(self, "y", float(self.y))

    @property
    def dim(self) -> int:
        return self.phi.size


@dataclass(frozen=True)
class LogSumExpSample:
    """One iteration of the symmetric log-sum-exp family, parameterized by a, b > 0."""

    a: float
    b: float

    kind = "logsumexp"

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (a > 0 and b > 0):
            raise InvalidParameterError(f"log-sum-exp sample requires a > 0 and b > 0, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


RegressorSample = Union[LinearSample, LogSumExpSample]


@dataclass(frozen=True)
class LossEvaluation:
    """Result of one loss evaluation.

    ``normalizer`` equals ``1 + hessian_bound`` for the base families and 1.0
    for the regularized wrapper, which is already normalized.
    """

    value: float
    gradient: np.ndarray
    hessian_bound: float
    normalizer: float


def _check_finite_eval(value, gradient, theta):
    if not (math.isfinite(value) and np.all(np.isfinite(gradient))):
        raise EvaluationOverflowError(
            f"loss evaluation overflowed at theta={np.asarray(theta)!r}", theta=theta
        )


class QuadraticRegressionLoss:
    """Squared prediction error 0.5*(theta.phi - y)^2 for linear regression.

    The Hessian is the rank-one matrix phi phi^T, so the spectral bound
    ``|phi|^2`` is exact regardless of the smoothness mode.
    """

    family = "quadratic-regression"

    def __init__(self, known_optimum=None, smoothness_mode: str = EXACT):
        self.known_optimum = None if known_optimum is None else as_vector(known_optimum)
        self.smoothness_mode = smoothness_mode

    def eval(self, theta, sample: LinearSample) -> LossEvaluation:
        theta = as_vector(theta)
        if not isinstance(sample, LinearSample):
            raise DimensionMismatchError("quadratic-regression loss expects a linear sample")
        if sample.dim != theta.size:
            raise DimensionMismatchError(
                f"regressor dimension {sample.dim} != parameter dimension {theta.size}"
            )
        err = float(theta @ sample.phi) - sample.y
        value = 0.5 * err * err
        gradient = sample.phi * err
        _check_finite_eval(value, gradient, theta)
        hessian_bound = float(sample.phi @ sample.phi)
        return LossEvaluation(value, gradient, hessian_bound, 1.0 + hessian_bound)

    def smoothness_bound(self, sample: LinearSample) -> float:
        return float(sample.phi @ sample.phi)

    def strong_convexity_constant(self) -> float:
        return 0.0


class LogSumExpLoss:
    """Coordinatewise log(a*e^(b*t) + a*e^(-b*t)), summed over coordinates.

    Evaluated through |x| + log1p(exp(-2|x|)) and a tanh-form gradient so that
    large arguments saturate instead of overflowing.  The minimum sits at the
    origin for every positive (a, b).  In the conservative mode the Hessian
    bound is b^2; the exact mode tightens it by the observed sech^2 factor.
    """

    family = "logsumexp"

    def __init__(self, smoothness_mode: str = CONSERVATIVE, known_optimum=None):
        if smoothness_mode not in (CONSERVATIVE, EXACT):
            raise InvalidParameterError(f"unknown smoothness mode {smoothness_mode!r}")
        self.smoothness_mode = smoothness_mode
        self.known_optimum = None if known_optimum is None else as_vector(known_optimum)

    def eval(self, theta, sample: LogSumExpSample) -> LossEvaluation:
        theta = as_vector(theta)
        if not isinstance(sample, LogSumExpSample):
            raise DimensionMismatchError("log-sum-exp loss expects a log-sum-exp sample")
        a, b = sample.a, sample.b
        x = b * theta
        ax = np.abs(x)
        value = float(np.sum(math.log(a) + ax + np.log1p(np.exp(-2.0 * ax))))
        t = np.tanh(x)
        gradient = b * t
        _check_finite_eval(value, gradient, theta)
        if self.smoothness_mode == CONSERVATIVE:
            hessian_bound = b * b
        else:
            hessian_bound = b * b * float(np.max(1.0 - t * t))
        return LossEvaluation(value, gradient, hessian_bound, 1.0 + hessian_bound)

    def smoothness_bound(self, sample: LogSumExpSample) -> float:
        return sample.b * sample.b

    def strong_convexity_constant(self) -> float:
        return 0.0


class RegularizedLoss:
    """Normalized inner loss plus a ridge term: inner/N_inner + mu/2 |theta - center|^2.

    The wrapper is mu-strongly convex and at most (1 + mu)-smooth, and its
    gradient is meant to be used without further normalization, so evaluations
    report ``normalizer = 1``.
    """

    family = "regularized"

    def __init__(self, inner, mu: float, center, known_optimum=None):
        if not mu > 0:
            raise InvalidParameterError(f"regularization constant must be positive, got {mu}")
        self.inner = inner
        self.mu = float(mu)
        self.center = as_vector(center)
        self.known_optimum = None if known_optimum is None else as_vector(known_optimum)

    @property
    def smoothness_mode(self) -> str:
        return self.inner.smoothness_mode

    def eval(self, theta, sample) -> LossEvaluation:
        theta = as_vector(theta)
        if theta.size != self.center.size:
            raise DimensionMismatchError(
                f"parameter dimension {theta.size} != center dimension {self.center.size}"
            )
        ie = self.inner.eval(theta, sample)
        diff = theta - self.center
        value = ie.value / ie.normalizer + 0.5 * self.mu * float(diff @ diff)
        gradient = ie.gradient / ie.normalizer + self.mu * diff
        _check_finite_eval(value, gradient, theta)
        hessian_bound = ie.hessian_bound / ie.normalizer + self.mu
        return LossEvaluation(value, gradient, hessian_bound, 1.0)

    def smoothness_bound(self, sample) -> float:
        inner_bound = self.inner.smoothness_bound(sample)
        return inner_bound / (1.0 + inner_bound) + self.mu

    def strong_convexity_constant(self) -> float:
        return self.mu


LossModel = Union[QuadraticRegressionLoss, LogSumExpLoss, RegularizedLoss]


def evaluate(model: LossModel, theta, sample) -> LossEvaluation:
    """Evaluate ``model`` at ``theta`` against ``sample``."""
    return model.eval(theta, sample)


def performance_error(theta, sample: LinearSample) -> float:
    """Prediction residual theta.phi - y for a linear sample."""
    theta = as_vector(theta)
    if not isinstance(sample, LinearSample):
        raise DimensionMismatchError("performance error is defined for linear samples only")
    if sample.dim != theta.size:
        raise DimensionMismatchError(
            f"regressor dimension {sample.dim} != parameter dimension {theta.size}"
        )
    return float(theta @ sample.phi) - sample.y


def strong_convexity_constant(model: LossModel) -> float:
    """Strong-convexity constant of the model (0 for the merely convex families)."""
    return model.strong_convexity_constant()
