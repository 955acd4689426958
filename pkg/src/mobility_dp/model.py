"""One-period mechanics: parameters, thresholds, reward and transitions.

The state is the disadvantaged share ``phi0``; the advantaged share is always
``1 - phi0``. Thresholds are set on success probability, so the disadvantaged
threshold lives in ``[0, sigma]`` and the advantaged one in
``[tau, sigma + tau]``. Choosing ``theta0`` pins ``theta1`` through the
capacity constraint.

The ``*_array`` helpers skip validation and broadcast over numpy arrays; the
solver uses them to fill its state/action tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, DomainError, Infeasible, NonFinite, OutOfRange

# Computed bounds within this distance of their interval are clamped silently.
CLAMP_TOL = 1e-9
# gamma this close to 1 makes gamma / (1 - gamma) meaningless in double precision.
GAMMA_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    sigma: float
    tau: float
    gamma: float
    p_a: float = 0.0
    p_d: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "sigma", "tau", "gamma", "p_a", "p_d"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise OutOfRange(name, value, "must be a real number")
            if not math.isfinite(value):
                raise NonFinite(name, value)
            object.__setattr__(self, name, float(value))
        a, s, t, g = self.alpha, self.sigma, self.tau, self.gamma
        if not 0.0 < a < 1.0:
            raise OutOfRange("alpha", a, "0 < alpha < 1")
        if not 0.0 < s < 1.0:
            raise OutOfRange("sigma", s, "0 < sigma < 1")
        if not t > 0.0:
            raise OutOfRange("tau", t, "tau > 0")
        if s + t > 1.0 + 1e-12:
            raise OutOfRange("tau", t, "sigma + tau <= 1")
        if not 0.0 <= g <= GAMMA_MAX:
            raise OutOfRange("gamma", g, "0 <= gamma < 1")
        for name in ("p_a", "p_d"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise OutOfRange(name, value, "0 <= p <= 1")

    def replace(self, **changes) -> "ModelParams":
        fields = dict(self.__dict__)
        fields.update(changes)
        return ModelParams(**fields)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def validate_params(alpha, sigma, tau, gamma, p_a=0.0, p_d=0.0) -> ModelParams:
    """Build a `ModelParams`, raising `OutOfRange` / `NonFinite` on bad input."""
    return ModelParams(alpha, sigma, tau, gamma, p_a, p_d)


@dataclass(frozen=True)
class ThresholdPair:
    theta0: float
    theta1: float


@dataclass(frozen=True)
class AdmissibleRange:
    lo: float
    hi: float

    def __contains__(self, theta0) -> bool:
        return self.lo - CLAMP_TOL <= theta0 <= self.hi + CLAMP_TOL

    def clamp(self, theta0: float) -> float:
        return min(max(theta0, self.lo), self.hi)


def _check_phi(phi0, name="phi0") -> float:
    if not math.isfinite(phi0):
        raise NonFinite(name, phi0)
    if phi0 < -CLAMP_TOL or phi0 > 1.0 + CLAMP_TOL:
        raise DomainError(f"{name}={phi0!r} outside [0, 1]")
    return min(max(float(phi0), 0.0), 1.0)


def _clamp(value, lo, hi, what):
    if value < lo - CLAMP_TOL or value > hi + CLAMP_TOL:
        raise Infeasible(f"{what}={value!r} outside [{lo!r}, {hi!r}]")
    return min(max(value, lo), hi)


def success_probability(ability, circumstance, params: ModelParams) -> float:
    if not 0.0 <= ability <= 1.0:
        raise DomainError(f"ability={ability!r} outside [0, 1]")
    if circumstance not in (0, 1):
        raise DomainError(f"circumstance={circumstance!r} must be 0 or 1")
    return params.sigma * ability + circumstance * params.tau


# -- vectorized formulas -------------------------------------------------------

def bounds_array(phi0, params: ModelParams):
    """Admissible [lo, hi] for theta0, elementwise. phi0 = 0 gives [0, sigma]."""
    phi0 = np.asarray(phi0, dtype=float)
    s, a = params.sigma, params.alpha
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lo = np.where(phi0 > 0, np.maximum(0.0, s * (1.0 - a / phi0)), 0.0)
        hi = np.where(phi0 > 0, np.minimum(s, s * (1.0 - a) / phi0), s)
    # at phi0 = 1 both bounds equal sigma*(1-alpha) up to rounding
    lo = np.minimum(lo, hi)
    return lo, hi


def theta1_array(phi0, theta0, params: ModelParams):
    """Paired advantaged threshold; NaN at phi0 = 1 where it is unconstrained."""
    phi0 = np.asarray(phi0, dtype=float)
    s, a, t = params.sigma, params.alpha, params.tau
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        th1 = (s * (1.0 - a) + (1.0 - phi0) * t - phi0 * theta0) / (1.0 - phi0)
    return np.where(phi0 < 1.0, th1, np.nan)


def d_success_array(phi0, theta0, params: ModelParams):
    """Disadvantaged mass that receives the opportunity and succeeds."""
    s = params.sigma
    return phi0 / (2.0 * s) * (s * s - np.square(theta0))


def reward_array(phi0, theta0, params: ModelParams):
    phi0 = np.asarray(phi0, dtype=float)
    s, t = params.sigma, params.tau
    d_term = d_success_array(phi0, theta0, params)
    th1 = theta1_array(phi0, theta0, params)
    a_term = np.where(phi0 < 1.0, (1.0 - phi0) / (2.0 * s) * ((s + t) ** 2 - np.square(th1)), 0.0)
    return d_term + a_term


def transition_post_array(phi0, theta0, params: ModelParams):
    return phi0 - d_success_array(phi0, theta0, params)


def resample_array(post, params: ModelParams):
    # post*(1-pD) + post*pD*post + (1-post)*pA*post, regrouped so that pA == pD
    # leaves `post` bit-for-bit unchanged
    return post + (params.p_a - params.p_d) * post * (1.0 - post)


def transition_array(phi0, theta0, params: ModelParams):
    return resample_array(transition_post_array(phi0, theta0, params), params)


# -- validated scalar operations ----------------------------------------------

def admissible_range(phi0, params: ModelParams) -> AdmissibleRange:
    phi0 = _check_phi(phi0)
    lo, hi = bounds_array(phi0, params)
    return AdmissibleRange(float(lo), float(hi))


def _admissible_theta0(phi0, theta0, params):
    rng = admissible_range(phi0, params)
    if not math.isfinite(theta0):
        raise NonFinite("theta0", theta0)
    return _clamp(float(theta0), rng.lo, rng.hi, "theta0")


def paired_threshold(phi0, theta0, params: ModelParams) -> float:
    phi0 = _check_phi(phi0)
    if phi0 == 1.0:
        raise Degenerate("theta1 is unconstrained when phi0 = 1")
    theta0 = _admissible_theta0(phi0, theta0, params)
    th1 = float(theta1_array(phi0, theta0, params))
    return _clamp(th1, params.tau, params.sigma + params.tau, "theta1")


def threshold_pair(phi0, theta0, params: ModelParams) -> ThresholdPair:
    return ThresholdPair(_admissible_theta0(phi0, theta0, params), paired_threshold(phi0, theta0, params))


def allocation_fractions(phi0, pair: ThresholdPair, params: ModelParams) -> tuple[float, float]:
    """Population fractions offered the opportunity in D and in A."""
    phi0 = _check_phi(phi0)
    s, t = params.sigma, params.tau
    frac_d = phi0 * (1.0 - pair.theta0 / s)
    frac_a = (1.0 - phi0) * (1.0 - (pair.theta1 - t) / s)
    if frac_d < -CLAMP_TOL or frac_a < -CLAMP_TOL:
        raise Infeasible(f"negative allocation ({frac_d!r}, {frac_a!r})")
    return max(frac_d, 0.0), max(frac_a, 0.0)


def reward_terms(phi0, theta0, params: ModelParams) -> tuple[float, float]:
    """(D-group success mass, A-group success mass) for one period."""
    phi0 = _check_phi(phi0)
    theta0 = _admissible_theta0(phi0, theta0, params)
    d_term = float(d_success_array(phi0, theta0, params))
    if phi0 == 1.0:
        return d_term, 0.0
    th1 = paired_threshold(phi0, theta0, params)
    s, t = params.sigma, params.tau
    return d_term, (1.0 - phi0) / (2.0 * s) * ((s + t) ** 2 - th1 * th1)


def period_reward(phi0, theta0, params: ModelParams) -> float:
    d_term, a_term = reward_terms(phi0, theta0, params)
    return d_term + a_term


def transition_post(phi0, theta0, params: ModelParams) -> float:
    """Disadvantaged share after successful recipients move to A."""
    phi0 = _check_phi(phi0)
    theta0 = _admissible_theta0(phi0, theta0, params)
    return float(transition_post_array(phi0, theta0, params))


def transition(phi0, theta0, params: ModelParams) -> float:
    """Next-generation disadvantaged share, including spontaneous resampling."""
    return float(resample_array(transition_post(phi0, theta0, params), params))
