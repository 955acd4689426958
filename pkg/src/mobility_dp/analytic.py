"""Closed-form results: tipping point, sigma-region value, regime boundaries.

Below the tipping point ``phi_star`` the planner sets the disadvantaged
threshold to ``sigma`` (no affirmative action); above it, the optimal
disadvantaged threshold sits strictly below the equal-threshold line.
"Persistent" affirmative action means ``phi_star == 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import Degenerate, OutOfRange, OutsideSigmaRegion, Undefined
from .model import GAMMA_MAX, ModelParams, _check_phi

SIGMA_REGION_TOL = 1e-12


@dataclass(frozen=True)
class TippingReport:
    phi_star: float
    raw_phi_tilde: float
    clamped_low: bool
    clamped_high: bool

    @property
    def persistent(self) -> bool:
        return self.phi_star == 0.0


@dataclass(frozen=True)
class RegimeBoundaries:
    gamma_star: Optional[float]
    tau_star: Optional[float]
    alpha_star: Optional[float]
    assumption_sigma: bool


def _patience_root(tau, gamma):
    # sqrt(1 + 2*tau*gamma/(1-gamma)); gamma/(1-gamma) is formed once
    if not 0.0 <= gamma <= GAMMA_MAX:
        raise OutOfRange("gamma", gamma, "0 <= gamma <= 1 - 1e-12")
    return math.sqrt(1.0 + 2.0 * tau * (gamma / (1.0 - gamma)))


def raw_phi_tilde(alpha, sigma, tau, gamma) -> float:
    return 1.0 - alpha * sigma / (2.0 * tau) * (1.0 + _patience_root(tau, gamma))


def tipping_point(params: ModelParams) -> TippingReport:
    raw = raw_phi_tilde(params.alpha, params.sigma, params.tau, params.gamma)
    upper = 1.0 - params.alpha
    low, high = raw < 0.0, raw > upper
    return TippingReport(max(0.0, min(upper, raw)), raw, low, high)


def _require_sigma_region(phi0, params):
    phi0 = _check_phi(phi0)
    phi_star = tipping_point(params).phi_star
    if phi0 > phi_star + SIGMA_REGION_TOL:
        raise OutsideSigmaRegion(f"phi0={phi0!r} exceeds tipping point {phi_star!r}")
    return phi0


def sigma_region_value(phi0, params: ModelParams) -> float:
    """Value of holding theta0 = sigma forever, valid up to the tipping point."""
    phi0 = _require_sigma_region(phi0, params)
    a, s, t, g = params.alpha, params.sigma, params.tau, params.gamma
    return a / (1.0 - g) * ((s + t) - s * a / (2.0 * (1.0 - phi0)))


def sigma_region_value_derivative(phi0, params: ModelParams) -> float:
    phi0 = _require_sigma_region(phi0, params)
    a, s, g = params.alpha, params.sigma, params.gamma
    return -s * a * a / (2.0 * (1.0 - g) * (1.0 - phi0) ** 2)


def reward_dtheta(phi0, theta0, params: ModelParams) -> float:
    """Partial derivative of the period reward with respect to theta0."""
    phi0 = _check_phi(phi0)
    if phi0 in (0.0, 1.0):
        raise Degenerate(f"reward slope undefined at phi0={phi0}")
    return phi0 / params.sigma * (aa_line(phi0, params) - theta0) / (1.0 - phi0)


def transition_dtheta(phi0, theta0, params: ModelParams) -> float:
    phi0 = _check_phi(phi0)
    return phi0 * theta0 / params.sigma


def foc_residual(phi0, params: ModelParams) -> float:
    """First-order condition at theta0 = sigma, scaled to a quadratic in 1 - phi0.

    Positive means sigma is still locally optimal at ``phi0``.
    """
    a, s, t, g = params.alpha, params.sigma, params.tau, params.gamma
    x = 1.0 - phi0
    return t * x * x - a * s * x - g * s * s * a * a / (2.0 * (1.0 - g))


def aa_line(phi0, params: ModelParams) -> float:
    """Equal-threshold level: theta0 below it means strict affirmative action."""
    phi0 = _check_phi(phi0)
    return params.sigma * (1.0 - params.alpha) + params.tau * (1.0 - phi0)


def gamma_star(alpha, tau, sigma) -> float:
    """Smallest discount factor giving persistent affirmative action.

    When tau <= alpha*sigma every gamma works and 0 is returned.
    """
    if tau <= alpha * sigma:
        return 0.0
    k = 2.0 * tau / (alpha * sigma) - 1.0
    inner = (k * k - 1.0) / (2.0 * tau) + 1.0
    return 1.0 - 1.0 / inner


def tau_star(alpha, gamma) -> float:
    """Largest tau giving persistent affirmative action, with sigma = 1 - tau."""
    if gamma == 0.0:
        raise Undefined("tau_star needs gamma > 0")
    if not 0.0 < gamma <= GAMMA_MAX:
        raise OutOfRange("gamma", gamma, "0 < gamma < 1")
    # positive root of c*x^2 + (1+alpha)*x - 1 with x = 1 - tau, written to
    # avoid cancellation for small c
    c = gamma * alpha * alpha / (2.0 * (1.0 - gamma))
    b = 1.0 + alpha
    x = 2.0 / (b + math.sqrt(b * b + 4.0 * c))
    return 1.0 - x


def alpha_star(tau, gamma, sigma) -> float:
    """Smallest opportunity budget giving persistent affirmative action."""
    return 2.0 * tau / sigma / (1.0 + _patience_root(tau, gamma))


def regime_boundaries(alpha, tau, gamma, sigma=None) -> RegimeBoundaries:
    """All three boundaries at once; ``sigma=None`` imposes sigma = 1 - tau."""
    assume = sigma is None
    if assume:
        sigma = 1.0 - tau
    g_star = gamma_star(alpha, tau, sigma)
    t_star = tau_star(alpha, gamma) if assume and gamma > 0.0 else None
    a_star = alpha_star(tau, gamma, sigma)
    if not 0.0 < a_star < 1.0:
        a_star = None
    return RegimeBoundaries(g_star, t_star, a_star, assume)
