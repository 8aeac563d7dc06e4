"""Regressor schedules: deterministic sample streams indexed by iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

from .errors import InvalidParameterError
from .losses import LinearSample, LogSumExpSample, RegressorSample

__all__ = [
    "ConstantSchedule",
    "StepChangeSchedule",
    "SinusoidalSchedule",
    "CustomListSchedule",
    "RegressorSchedule",
    "sample_at",
    "sample_at_time",
]


def _check_index(k: int, horizon: int):
    if not 0 <= k < horizon:
        raise IndexError(f"sample index {k} outside schedule horizon [0, {horizon})")


@dataclass(frozen=True)
class ConstantSchedule:
    """The same sample at every iteration."""

    sample: RegressorSample
    horizon: int

    kind = "constant"

    def sample_at(self, k: int) -> RegressorSample:
        _check_index(k, self.horizon)
        return self.sample


@dataclass(frozen=True)
class StepChangeSchedule:
    """Emits ``before`` until ``switch_k``, then ``after``."""

    before: RegressorSample
    after: RegressorSample
    switch_k: int
    horizon: int

    kind = "step-change"

    def __post_init__(self):
        if not 0 <= self.switch_k < self.horizon:
            raise InvalidParameterError(
                f"switch index {self.switch_k} must lie within horizon [0, {self.horizon})"
            )

    def sample_at(self, k: int) -> RegressorSample:
        _check_index(k, self.horizon)
        return self.before if k < self.switch_k else self.after


@dataclass(frozen=True)
class SinusoidalSchedule:
    """Log-sum-exp samples with b_k = base + amplitude * sin(angular_rate * k).

    The angle is in radians with integer k, so an irrational-looking rate
    visits the [base - amplitude, base + amplitude] band pseudo-uniformly.
    ``base > |amplitude|`` keeps every b_k positive.
    """

    base: float
    amplitude: float
    angular_rate: float
    horizon: int
    a: float = 0.5

    kind = "sinusoidal"

    def __post_init__(self):
        if not self.base > abs(self.amplitude):
            raise InvalidParameterError(
                f"need base > |amplitude| for positive b_k, got base={self.base}, "
                f"amplitude={self.amplitude}"
            )

    def sample_at(self, k: int) -> LogSumExpSample:
        _check_index(k, self.horizon)
        b = self.base + self.amplitude * math.sin(self.angular_rate * k)
        return LogSumExpSample(a=self.a, b=b)


@dataclass(frozen=True)
class CustomListSchedule:
    """An explicit sample list; the horizon is its length."""

    samples: Tuple[RegressorSample, ...]

    kind = "custom-list"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise InvalidParameterError("custom schedule needs at least one sample")

    @property
    def horizon(self) -> int:
        return len(self.samples)

    def sample_at(self, k: int) -> RegressorSample:
        _check_index(k, self.horizon)
        return self.samples[k]


RegressorSchedule = Union[
    ConstantSchedule, StepChangeSchedule, SinusoidalSchedule, CustomListSchedule
]


def sample_at(schedule: RegressorSchedule, k: int) -> RegressorSample:
    """Sample of ``schedule`` at iteration ``k`` (0-based, within the horizon)."""
    return schedule.sample_at(int(k))


def sample_at_time(schedule: RegressorSchedule, t: float) -> RegressorSample:
    """Sample-and-hold view for continuous time: one sample per unit time."""
    if t < 0:
        raise IndexError(f"negative time {t}")
    k = min(int(math.floor(t)), schedule.horizon - 1)
    return schedule.sample_at(k)
