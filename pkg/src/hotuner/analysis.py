"""Stability diagnostics: Lyapunov values, decrease and envelope checks,
gain-bound validation, finite-difference oracles, and run classification.

Checks never trust quantities logged by a tuner; the Lyapunov sequence is
always recomputed from the logged states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    InvalidParameterError,
    NoConvergenceError,
    PreconditionError,
    UnknownOptimumError,
)
from .losses import LinearSample, LogSumExpLoss, LossModel, as_vector
from .tuners import HyperParams, TunerState, ValidationReport, max_stable_gamma

__all__ = [
    "LyapunovSample",
    "Violation",
    "EnvelopeReport",
    "StabilityReport",
    "lyapunov_value",
    "lyapunov_series",
    "max_gamma",
    "validate_hyperparams",
    "check_lyapunov_decrease",
    "exponential_envelope_check",
    "finite_diff_gradient_check",
    "iterations_to_epsilon",
    "solve_optimum",
    "resolve_optimum",
    "loss_gap_series",
    "normalized_gap_series",
    "classify_stability",
    "violations_to_text",
]

# Oscillation classifier: a run is unstable when the tail of the estimate
# keeps crossing the optimum at non-vanishing, non-decaying amplitude.
OSC_MIN_FLIPS = 5
OSC_FLOOR_REL = 1e-9
OSC_DECAY_RATIO = 0.25


@dataclass(frozen=True)
class LyapunovSample:
    """Per-iteration Lyapunov bookkeeping."""

    k: int
    V: float
    delta_V: float
    normalized_gap: float


@dataclass(frozen=True)
class Violation:
    k: int
    quantity: str
    bound: float
    observed: float


@dataclass(frozen=True)
class EnvelopeReport:
    """Result of an exponential-decay envelope check."""

    C: float
    violations: Tuple[int, ...]
    max_ratio: float


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    reason: str
    flips: int = 0
    flip_amplitude: float = 0.0


def lyapunov_value(state: TunerState, theta_star, gamma: float) -> float:
    """(|vartheta - theta*|^2 + |theta - vartheta|^2) / gamma."""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    ts = as_vector(theta_star)
    dv = state.vartheta - ts
    dt = state.theta - state.vartheta
    return (float(dv @ dv) + float(dt @ dt)) / gamma


def lyapunov_series(theta: np.ndarray, vartheta: np.ndarray, theta_star,
                    gamma: float) -> np.ndarray:
    """Lyapunov values recomputed from logged state rows (shape (n, dim))."""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    ts = as_vector(theta_star)
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    vartheta = np.atleast_2d(np.asarray(vartheta, dtype=np.float64))
    return (np.sum((vartheta - ts) ** 2, axis=1)
            + np.sum((theta - vartheta) ** 2, axis=1)) / gamma


def max_gamma(beta: float, mu: float = 0.0, mode: str = "smooth") -> float:
    """Largest gamma admitted by the stability conditions (see tuners)."""
    return max_stable_gamma(beta, mu, mode)


def validate_hyperparams(hp: HyperParams) -> ValidationReport:
    """Report pass/fail for every stability condition applicable to hp.mode."""
    return hp.validate()


def check_lyapunov_decrease(trace, theta_star, gamma: float, tol: float,
                            strong: bool = False, model: Optional[LossModel] = None,
                            beta: Optional[float] = None,
                            mu: Optional[float] = None) -> List[Violation]:
    """Iterations where the recomputed Lyapunov difference exceeds its bound.

    In the default mode a violation is delta_V > tol.  In the strong mode the
    tighter bound -(gap + gamma*beta*mu/4 * V) / N is enforced, which needs the
    model to re-evaluate the per-iteration loss gap.
    """
    if theta_star is None:
        raise UnknownOptimumError("Lyapunov check needs the minimizer theta*")
    v = lyapunov_series(trace.theta, trace.vartheta, theta_star, gamma)
    dv = np.diff(v)
    violations = [
        Violation(int(k), "delta_v", tol, float(dv[k]))
        for k in np.where(dv > tol)[0]
    ]
    if strong:
        if model is None or beta is None or mu is None:
            raise InvalidParameterError("strong mode needs model, beta, and mu")
        ts = as_vector(theta_star)
        for k in range(len(dv)):
            sample = trace.samples[k]
            gap = model.eval(trace.theta[k + 1], sample).value - model.eval(ts, sample).value
            bound = -(gap + gamma * beta * mu / 4.0 * v[k]) / trace.normalizer[k]
            if dv[k] > bound + tol:
                violations.append(Violation(int(k), "delta_v-strong", float(bound + tol), float(dv[k])))
    return violations


def exponential_envelope_check(trace, hp: HyperParams, N: float, mu: float,
                               theta_star=None, tol: float = 1e-9) -> EnvelopeReport:
    """Check V_k <= (1 - mu*gamma*beta/(4N))^k * V_0 on a constant-regressor trace."""
    norms = np.asarray(trace.normalizer, dtype=np.float64)
    if norms.size and not np.all(norms == norms[0]):
        raise PreconditionError("envelope check needs a constant normalizer trace")
    if theta_star is None:
        theta_star = trace.theta_star
    if theta_star is None:
        raise UnknownOptimumError("envelope check needs the minimizer theta*")
    v = lyapunov_series(trace.theta, trace.vartheta, theta_star, hp.gamma)
    factor = 1.0 - mu * hp.gamma * hp.beta / (4.0 * N)
    envelope = v[0] * factor ** np.arange(v.size)
    if v[0] == 0.0:
        ratios = np.where(v == 0.0, 0.0, np.inf)
    else:
        ratios = v / envelope
    violations = tuple(int(k) for k in np.where(ratios > 1.0 + tol)[0])
    c = hp.gamma * hp.beta / (4.0 * N)
    return EnvelopeReport(c, violations, float(np.max(ratios)) if ratios.size else 0.0)


def finite_diff_gradient_check(model: LossModel, theta, sample, h: float) -> float:
    """Max relative error between the analytic gradient and a central difference."""
    if not h > 0:
        raise InvalidParameterError(f"step must be positive, got {h}")
    theta = as_vector(theta)
    grad = model.eval(theta, sample).gradient
    worst = 0.0
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        fd = (model.eval(theta + step, sample).value
              - model.eval(theta - step, sample).value) / (2.0 * h)
        err = abs(grad[i] - fd) / max(1.0, abs(grad[i]))
        worst = max(worst, err)
    return worst


def iterations_to_epsilon(trace, theta_star_value: float, epsilon: float) -> Optional[int]:
    """First iteration whose logged loss is within epsilon of the target value."""
    loss = np.asarray(trace.loss, dtype=np.float64)
    if loss.size == 0:
        raise PreconditionError("empty trace")
    hits = np.where(loss - theta_star_value <= epsilon)[0]
    return int(hits[0]) if hits.size else None


def _infer_dim(model, sample) -> int:
    if isinstance(sample, LinearSample):
        return sample.dim
    center = getattr(model, "center", None)
    if center is not None:
        return int(np.asarray(center).size)
    opt = getattr(model, "known_optimum", None)
    if opt is not None:
        return int(np.asarray(opt).size)
    return 1


def solve_optimum(model: LossModel, sample, tol: float = 1e-12,
                  dim: Optional[int] = None) -> np.ndarray:
    """Minimizer of the model against one sample, to gradient norm <= tol.

    Scalar problems use bisection on the (monotone) gradient over an expanding
    bracket; higher dimensions use long-horizon gradient descent and require a
    strongly convex model.
    """
    if dim is None:
        dim = _infer_dim(model, sample)

    if dim == 1:
        def g(x):
            return float(model.eval(np.array([x]), sample).gradient[0])

        lo, hi = -1.0, 1.0
        for _ in range(200):
            if g(lo) <= 0.0:
                break
            lo *= 2.0
        else:
            raise NoConvergenceError("could not bracket the minimizer from below")
        for _ in range(200):
            if g(hi) >= 0.0:
                break
            hi *= 2.0
        else:
            raise NoConvergenceError("could not bracket the minimizer from above")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        mid = 0.5 * (lo + hi)
        if abs(g(mid)) > tol:
            raise NoConvergenceError(
                f"bisection stalled with |gradient| = {abs(g(mid)):.3e} > {tol:.3e}")
        return np.array([mid])

    mu = model.strong_convexity_constant()
    if not mu > 0:
        raise PreconditionError("multi-dimensional solve needs a strongly convex model")
    step = 1.0 / model.smoothness_bound(sample)
    theta = np.zeros(dim)
    for _ in range(200_000):
        grad = model.eval(theta, sample).gradient
        if float(np.linalg.norm(grad)) <= tol:
            return theta
        theta = theta - step * grad
    raise NoConvergenceError(f"gradient descent did not reach |gradient| <= {tol:.3e}")


def resolve_optimum(model: LossModel, sample, tol: float = 1e-12,
                    dim: Optional[int] = None) -> np.ndarray:
    """The model's known minimizer when present, otherwise solve for it."""
    opt = getattr(model, "known_optimum", None)
    if opt is not None:
        return as_vector(opt)
    return solve_optimum(model, sample, tol, dim)


def loss_gap_series(trace, model: LossModel, theta_star) -> np.ndarray:
    """Per-iteration loss gap L_k(theta_k) - L_k(theta*), re-evaluated."""
    ts = as_vector(theta_star)
    # For the plain log-sum-exp family the loss at the origin is dim*log(2a).
    if isinstance(model, LogSumExpLoss) and not np.any(ts):
        dim = trace.theta.shape[1]
        ref = dim * np.array([math.log(2.0 * s.a) for s in trace.samples])
        return np.asarray(trace.loss, dtype=np.float64) - ref
    out = np.empty(len(trace.samples))
    for k, sample in enumerate(trace.samples):
        out[k] = trace.loss[k] - model.eval(ts, sample).value
    return out


def normalized_gap_series(trace, model: LossModel, theta_star) -> np.ndarray:
    """(L_k(theta_{k+1}) - L_k(theta*)) / N_k for each transition in the trace."""
    ts = as_vector(theta_star)
    n = trace.theta.shape[0] - 1
    out = np.empty(n)
    for k in range(n):
        sample = trace.samples[k]
        gap = model.eval(trace.theta[k + 1], sample).value - model.eval(ts, sample).value
        out[k] = gap / trace.normalizer[k]
    return out


def _flip_stats(segment: np.ndarray) -> Tuple[int, float]:
    flips = np.where(segment[:-1] * segment[1:] < 0)[0]
    if flips.size == 0:
        return 0, 0.0
    return int(flips.size), float(np.median(np.abs(segment[flips])))


def classify_stability(trace, theta_star) -> StabilityReport:
    """Classify a run as stable or diverged.

    Divergence is either hard (non-finite state, or normalized loss beyond the
    runner's limit, both recorded in the trace flag) or a sustained tail
    oscillation: the estimate keeps crossing the optimum at an amplitude that
    neither vanishes nor decays.  Bounded-gradient losses produce exactly this
    bounded-orbit instability instead of a blow-up.
    """
    diverged = np.asarray(trace.diverged, dtype=bool)
    if diverged.any():
        return StabilityReport(False, "non-finite state or normalized loss above limit")

    ts = as_vector(theta_star)
    delta = np.atleast_2d(np.asarray(trace.theta, dtype=np.float64)) - ts
    d0 = delta[0]
    norm0 = float(np.linalg.norm(d0))
    if norm0 > 0:
        direction = d0 / norm0
    else:
        direction = np.zeros_like(d0)
        direction[0] = 1.0
    s = delta @ direction

    n = s.size
    if n < 8:
        return StabilityReport(True, "trace too short for oscillation analysis")
    floor = OSC_FLOOR_REL * max(1.0, abs(s[0]))
    q3 = s[n // 2: 3 * n // 4 + 1]
    q4 = s[3 * n // 4:]
    flips4, amp4 = _flip_stats(q4)
    if flips4 < OSC_MIN_FLIPS or amp4 <= floor:
        return StabilityReport(True, "no sustained tail oscillation", flips4, amp4)
    flips3, amp3 = _flip_stats(q3)
    if flips3 >= OSC_MIN_FLIPS and amp4 < OSC_DECAY_RATIO * amp3:
        return StabilityReport(True, "tail oscillation decaying", flips4, amp4)
    return StabilityReport(
        False,
        f"sustained oscillation around the optimum (amplitude {amp4:.3e})",
        flips4, amp4)


def violations_to_text(violations: Sequence[Violation]) -> str:
    """One finding per line: iteration, quantity, bound, observed."""
    return "\n".join(
        f"iteration={v.k} quantity={v.quantity} bound={v.bound:.17g} observed={v.observed:.17g}"
        for v in violations
    )
