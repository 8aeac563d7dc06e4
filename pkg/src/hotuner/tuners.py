"""Update rules: the high-order tuner, normalized gradient descent, Nesterov's
method with constant momentum, and the continuous-time tuner with an RK4
integrator.

All step functions are pure: state in, state out.  The high-order tuner
evaluates the loss exactly twice per iteration, both times against the same
sample, and divides both gradients by the same normalizer taken from the
first evaluation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DivergenceError, InvalidParameterError
from .losses import LossModel, RegressorSample, as_vector
from .schedules import RegressorSchedule, sample_at_time

__all__ = [
    "HyperParams",
    "TunerState",
    "NesterovState",
    "StepRecord",
    "ConditionCheck",
    "ValidationReport",
    "max_stable_gamma",
    "ht_step",
    "normalized_gd_step",
    "nesterov_step",
    "nesterov_gains",
    "ht_continuous_rhs",
    "integrate_continuous",
    "ContinuousRun",
]

DISCRETE_SMOOTH = "discrete-smooth"
DISCRETE_STRONG = "discrete-strongly-convex"
CONTINUOUS = "continuous"


def max_stable_gamma(beta: float, mu: float = 0.0, mode: str = "smooth") -> float:
    """Largest gamma with a stability guarantee for the discrete tuner.

    mode "smooth":           beta*(2-beta)/(8+beta)
    mode "strongly-convex":  beta*(2-beta)/(16+beta+mu)
    """
    if not 0.0 < beta < 1.0:
        raise InvalidParameterError(f"beta must lie in (0, 1), got {beta}")
    if mode == "smooth":
        return beta * (2.0 - beta) / (8.0 + beta)
    if mode == "strongly-convex":
        if mu < 0:
            raise InvalidParameterError(f"mu must be nonnegative, got {mu}")
        return beta * (2.0 - beta) / (16.0 + beta + mu)
    raise InvalidParameterError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    expression: str
    satisfied: bool


@dataclass(frozen=True)
class ValidationReport:
    mode: str
    conditions: Tuple[ConditionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def to_text(self) -> str:
        lines = []
        for c in self.conditions:
            status = "pass" if c.satisfied else "FAIL"
            lines.append(f"{status}  {c.name}: {c.expression}")
        return "\n".join(lines)


@dataclass(frozen=True)
class HyperParams:
    """Gains for the tuners.

    gamma, beta drive the high-order tuner; alpha_bar, beta_bar the baselines.
    Either pair may be omitted when only the other tuner is used.  ``policy``
    controls what happens when the stability conditions for ``mode`` are
    violated at construction: "strict" raises, "warn" emits a warning (several
    reference experiments deliberately run outside the stable region).
    """

    gamma: Optional[float] = None
    beta: Optional[float] = None
    mu: float = 0.0
    alpha_bar: Optional[float] = None
    beta_bar: Optional[float] = None
    mode: str = DISCRETE_SMOOTH
    policy: str = "strict"

    def __post_init__(self):
        if self.mode not in (DISCRETE_SMOOTH, DISCRETE_STRONG, CONTINUOUS):
            raise InvalidParameterError(f"unknown hyperparameter mode {self.mode!r}")
        if self.policy not in ("strict", "warn"):
            raise InvalidParameterError(f"unknown validation policy {self.policy!r}")
        if self.mu < 0:
            raise InvalidParameterError(f"mu must be nonnegative, got {self.mu}")
        if self.alpha_bar is not None and not self.alpha_bar > 0:
            raise InvalidParameterError(f"alpha_bar must be positive, got {self.alpha_bar}")
        if self.beta_bar is not None and not 0.0 <= self.beta_bar < 1.0:
            raise InvalidParameterError(f"beta_bar must lie in [0, 1), got {self.beta_bar}")
        report = self.validate()
        if not report.ok:
            failed = "; ".join(c.expression for c in report.conditions if not c.satisfied)
            if self.policy == "strict":
                raise InvalidParameterError(f"hyperparameters violate stability conditions: {failed}")
            warnings.warn(f"hyperparameters outside guaranteed-stable region: {failed}", stacklevel=2)

    def validate(self) -> ValidationReport:
        """Check the stability conditions that apply to this mode.

        Conditions on (gamma, beta) are checked only when both are set.
        """
        checks: List[ConditionCheck] = []
        g, b = self.gamma, self.beta
        if g is None and b is None:
            return ValidationReport(self.mode, tuple(checks))
        if g is None or b is None:
            checks.append(ConditionCheck(
                "gamma-beta-pair", "gamma and beta must be set together", False))
            return ValidationReport(self.mode, tuple(checks))
        if self.mode == CONTINUOUS:
            checks.append(ConditionCheck(
                "gamma-positive", f"gamma = {g:.10g} > 0", g > 0))
            checks.append(ConditionCheck(
                "beta-dominates", f"beta = {b:.10g} > 2*gamma = {2 * g:.10g}", b > 2 * g > 0))
            return ValidationReport(self.mode, tuple(checks))
        checks.append(ConditionCheck(
            "beta-range", f"0 < beta = {b:.10g} < 1", 0 < b < 1))
        if 0 < b < 1:
            if self.mode == DISCRETE_SMOOTH:
                bound = max_stable_gamma(b, mode="smooth")
                expr = f"0 < gamma = {g:.10g} <= beta*(2-beta)/(8+beta) = {bound:.10g}"
            else:
                bound = max_stable_gamma(b, self.mu, mode="strongly-convex")
                expr = f"0 < gamma = {g:.10g} <= beta*(2-beta)/(16+beta+mu) = {bound:.10g}"
            checks.append(ConditionCheck("gamma-bound", expr, 0 < g <= bound))
        else:
            checks.append(ConditionCheck(
                "gamma-bound", f"gamma bound undefined for beta = {b:.10g}", False))
        return ValidationReport(self.mode, tuple(checks))


@dataclass(frozen=True)
class TunerState:
    """The high-order tuner's state pair (theta, vartheta)."""

    theta: np.ndarray
    vartheta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))
        object.__setattr__(self, "vartheta", np.asarray(self.vartheta, dtype=np.float64))
        if self.theta.shape != self.vartheta.shape:
            raise InvalidParameterError(
                f"state dimensions differ: {self.theta.shape} vs {self.vartheta.shape}"
            )


@dataclass(frozen=True)
class NesterovState:
    """Nesterov's state pair (theta, nu)."""

    theta: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=np.float64))
        if self.theta.shape != self.nu.shape:
            raise InvalidParameterError(
                f"state dimensions differ: {self.theta.shape} vs {self.nu.shape}"
            )


@dataclass(frozen=True)
class StepRecord:
    """Intermediates of one high-order-tuner step."""

    theta_bar: np.ndarray
    grad_at_theta: np.ndarray
    grad_at_theta_next: np.ndarray
    normalizer: float


def _require_finite(arr, what, state, iteration=None):
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(f"{what} became non-finite", last_state=state, iteration=iteration)


def ht_step(state: TunerState, model: LossModel, sample: RegressorSample,
            hp: HyperParams) -> Tuple[TunerState, StepRecord]:
    """One high-order-tuner iteration.

    Two gradient evaluations against the same sample: at theta, then at the
    updated theta.  Both are divided by the normalizer computed at theta.
    """
    if hp.gamma is None or hp.beta is None:
        raise InvalidParameterError("ht_step needs gamma and beta")
    ev0 = model.eval(state.theta, sample)
    nk = ev0.normalizer
    theta_bar = state.theta - (hp.gamma * hp.beta) * (ev0.gradient / nk)
    theta_next = theta_bar - hp.beta * (theta_bar - state.vartheta)
    _require_finite(theta_next, "theta update", state)
    ev1 = model.eval(theta_next, sample)
    vartheta_next = state.vartheta - hp.gamma * (ev1.gradient / nk)
    _require_finite(vartheta_next, "vartheta update", state)
    new_state = TunerState(theta_next, vartheta_next)
    record = StepRecord(theta_bar, ev0.gradient, ev1.gradient, nk)
    return new_state, record


def normalized_gd_step(theta, model: LossModel, sample: RegressorSample,
                       alpha_bar: float, allow_unsafe: bool = False) -> np.ndarray:
    """Gradient step on the normalized loss: theta - alpha_bar * grad / normalizer.

    The stable range is 0 < alpha_bar < 2; larger steps are admitted only with
    ``allow_unsafe`` for divergence demonstrations.
    """
    if not alpha_bar > 0:
        raise InvalidParameterError(f"alpha_bar must be positive, got {alpha_bar}")
    if alpha_bar >= 2.0 and not allow_unsafe:
        raise InvalidParameterError(
            f"alpha_bar = {alpha_bar} >= 2 is outside the stable range; "
            "pass allow_unsafe=True to run it anyway"
        )
    theta = as_vector(theta)
    ev = model.eval(theta, sample)
    theta_next = theta - alpha_bar * (ev.gradient / ev.normalizer)
    _require_finite(theta_next, "gradient-descent update", theta)
    return theta_next


def nesterov_step(state: NesterovState, model: LossModel, sample: RegressorSample,
                  hp: HyperParams) -> NesterovState:
    """One constant-momentum Nesterov iteration; a single gradient evaluation at nu."""
    if hp.alpha_bar is None or hp.beta_bar is None:
        raise InvalidParameterError("nesterov_step needs alpha_bar and beta_bar")
    ev = model.eval(state.nu, sample)
    theta_next = state.nu - hp.alpha_bar * ev.gradient
    nu_next = (1.0 + hp.beta_bar) * theta_next - hp.beta_bar * state.theta
    _require_finite(theta_next, "theta update", state)
    _require_finite(nu_next, "nu update", state)
    return NesterovState(theta_next, nu_next)


def nesterov_gains(l_bar: float, mu: float) -> Tuple[float, float, float]:
    """Step size, momentum, and condition number for an l_bar-smooth,
    mu-strongly convex objective: (1/l_bar, (sqrt(k)-1)/(sqrt(k)+1), k = l_bar/mu)."""
    if not mu > 0:
        raise InvalidParameterError(f"mu must be positive, got {mu}")
    if l_bar < mu:
        raise InvalidParameterError(f"need l_bar >= mu > 0, got l_bar={l_bar}, mu={mu}")
    kappa = l_bar / mu
    sqrt_kappa = math.sqrt(kappa)
    beta_bar = (sqrt_kappa - 1.0) / (sqrt_kappa + 1.0)
    return 1.0 / l_bar, beta_bar, kappa


def ht_continuous_rhs(state: TunerState, model: LossModel, sample: RegressorSample,
                      hp: HyperParams) -> Tuple[np.ndarray, np.ndarray]:
    """Time derivatives of the continuous tuner:
    dtheta = -beta*(theta - vartheta), dvartheta = -gamma*grad(theta)/normalizer."""
    if hp.gamma is None or hp.beta is None:
        raise InvalidParameterError("the continuous tuner needs gamma and beta")
    ev = model.eval(state.theta, sample)
    dtheta = -hp.beta * (state.theta - state.vartheta)
    dvartheta = -hp.gamma * (ev.gradient / ev.normalizer)
    return dtheta, dvartheta


@dataclass
class ContinuousRun:
    """Fixed-step trajectory of the continuous tuner.

    ``theta``/``vartheta`` have one row per step boundary (n_steps + 1), and
    ``lyapunov`` the matching Lyapunov values when a minimizer is available.
    ``diverged_at`` is the step index where the state left the finite range,
    or None.
    """

    times: np.ndarray
    theta: np.ndarray
    vartheta: np.ndarray
    lyapunov: Optional[np.ndarray]
    step: float
    diverged_at: Optional[int] = None

    @property
    def final_state(self) -> TunerState:
        return TunerState(self.theta[-1], self.vartheta[-1])


def _rk4_generic(theta, vartheta, model, samples_per_step, hp, h):
    thetas = [theta.copy()]
    varthetas = [vartheta.copy()]
    diverged_at = None
    for i, smp in enumerate(samples_per_step):
        def rhs(th, vt):
            ev = model.eval(th, smp)
            return -hp.beta * (th - vt), -hp.gamma * (ev.gradient / ev.normalizer)

        k1t, k1v = rhs(theta, vartheta)
        k2t, k2v = rhs(theta + 0.5 * h * k1t, vartheta + 0.5 * h * k1v)
        k3t, k3v = rhs(theta + 0.5 * h * k2t, vartheta + 0.5 * h * k2v)
        k4t, k4v = rhs(theta + h * k3t, vartheta + h * k3v)
        theta = theta + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        vartheta = vartheta + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        thetas.append(theta.copy())
        varthetas.append(vartheta.copy())
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(vartheta))):
            diverged_at = i + 1
            break
    return np.asarray(thetas), np.asarray(varthetas), diverged_at


def integrate_continuous(initial: TunerState, model: LossModel,
                         schedule: RegressorSchedule, hp: HyperParams,
                         t_end: float, h: float,
                         theta_star=None) -> ContinuousRun:
    """Integrate the continuous tuner with classical fixed-step RK4.

    The schedule is sampled-and-held at each step's start time (one sample per
    unit time).  The Lyapunov value is recorded at every step boundary when a
    minimizer is known or supplied.
    """
    if hp.gamma is None or hp.beta is None:
        raise InvalidParameterError("continuous integration needs gamma and beta")
    if not h > 0:
        raise InvalidParameterError(f"step size must be positive, got {h}")
    if not t_end > 0:
        raise InvalidParameterError(f"end time must be positive, got {t_end}")
    if not hp.beta > 2.0 * hp.gamma > 0:
        warnings.warn(
            f"continuous tuner outside guaranteed region: beta = {hp.beta} "
            f"should exceed 2*gamma = {2 * hp.gamma}", stacklevel=2)

    n_steps = int(round(t_end / h))
    samples = [sample_at_time(schedule, i * h) for i in range(n_steps)]

    from . import _backend

    kern = _backend.kernels()
    fast = (
        getattr(model, "family", None) == "logsumexp"
        and model.smoothness_mode == "conservative-bound"
        and initial.theta.size == 1
        and all(s.kind == "logsumexp" for s in samples[:1])
    )
    if fast:
        b_arr = np.array([s.b for s in samples], dtype=np.float64)
        theta_out = np.empty(n_steps + 1, dtype=np.float64)
        vartheta_out = np.empty(n_steps + 1, dtype=np.float64)
        div = kern.ht_rk4_run(
            float(initial.theta[0]), float(initial.vartheta[0]),
            b_arr, hp.gamma, hp.beta, h, theta_out, vartheta_out,
        )
        diverged_at = None if div < 0 else int(div)
        last = n_steps if diverged_at is None else diverged_at
        thetas = theta_out[: last + 1].reshape(-1, 1)
        varthetas = vartheta_out[: last + 1].reshape(-1, 1)
    else:
        thetas, varthetas, diverged_at = _rk4_generic(
            initial.theta.astype(np.float64), initial.vartheta.astype(np.float64),
            model, samples, hp, h)

    if theta_star is None:
        theta_star = getattr(model, "known_optimum", None)
    lyap = None
    if theta_star is not None:
        ts = as_vector(theta_star)
        lyap = (np.sum((varthetas - ts) ** 2, axis=1)
                + np.sum((thetas - varthetas) ** 2, axis=1)) / hp.gamma
    times = h * np.arange(thetas.shape[0])
    return ContinuousRun(times, thetas, varthetas, lyap, h, diverged_at)
