"""Multiplier-estimate update laws, interpreted as dual gradient-ascent steps.

Three pointwise rules, each matched to its penalty:

    Pi1 (PHR):        nu+ = max{nu - alpha*h, (1 - alpha/rho) nu}
    Pi2 (non-slack):  nu+ = max{0, nu - alpha*h}
    Pi3 (smooth-PHR): nu+ = -alpha * nu * psi'(rho*h / nu)

alpha is the ascent step length; keeping 0 < alpha < 2*rho makes the
inactive-constraint recursion nu+ = (1 - alpha/rho) nu asymptotically
stable, which drives multipliers of inactive constraints to zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .penalties import PenaltyKind, psi_function
from .trajectory import Trajectory


class DualRule(str, enum.Enum):
    PI1 = "Pi1"
    PI2 = "Pi2"
    PI3 = "Pi3"


RULE_FOR_KIND = {
    PenaltyKind.PHR: DualRule.PI1,
    PenaltyKind.NON_SLACK: DualRule.PI2,
    PenaltyKind.SMOOTH_PHR: DualRule.PI3,
}


@dataclass(frozen=True)
class DualUpdateConfig:
    """Ascent step length, penalty weight, rule selection, and Pi3 floor.

    alpha outside (0, 2*rho) is accepted but reported by check_stability so
    misconfigured runs still execute and surface the warning in their logs.
    """

    alpha: float
    rho: float
    rule: DualRule = DualRule.PI1
    nu_min: float = 1e-6
    delta_psi: float = 0.5

    def __post_init__(self) -> None:
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.nu_min <= 0.0:
            raise ValueError("nu_min must be positive")


def check_stability(cfg: DualUpdateConfig) -> list[str]:
    """Flag step lengths outside the contraction interval (0, 2*rho)."""
    warnings = []
    if cfg.alpha <= 0.0:
        warnings.append(
            f"alpha = {cfg.alpha} makes no dual progress; need alpha > 0"
        )
    elif cfg.alpha >= 2.0 * cfg.rho:
        warnings.append(
            f"alpha = {cfg.alpha} >= 2*rho = {2.0 * cfg.rho}: the inactive-"
            "constraint multiplier recursion is not asymptotically stable"
        )
    return warnings


def update_pi1(nu, h, cfg: DualUpdateConfig):
    """PHR rule; with alpha = rho it coincides with max{0, nu - rho*h}.

    The result is additionally clipped at zero: for rho < alpha < 2*rho the
    raw rule can dip negative on strongly feasible constraints, which would
    break the nu >= 0 invariant the penalties rely on.
    """
    nu = np.asarray(nu, dtype=float)
    h = np.asarray(h, dtype=float)
    raw = np.maximum(nu - cfg.alpha * h, (1.0 - cfg.alpha / cfg.rho) * nu)
    return np.maximum(raw, 0.0)


def update_pi2(nu, h, cfg: DualUpdateConfig):
    """Non-slack rule: plain projected gradient ascent on the dual."""
    nu = np.asarray(nu, dtype=float)
    h = np.asarray(h, dtype=float)
    return np.maximum(0.0, nu - cfg.alpha * h)


def update_pi3(nu, h, cfg: DualUpdateConfig):
    """Smooth-PHR rule; output floored at nu_min since the penalty divides by nu."""
    nu = np.asarray(nu, dtype=float)
    h = np.asarray(h, dtype=float)
    _, dpsi, _ = psi_function(cfg.rho * h / nu, cfg.delta_psi)
    return np.maximum(-cfg.alpha * nu * dpsi, cfg.nu_min)


_RULES = {
    DualRule.PI1: update_pi1,
    DualRule.PI2: update_pi2,
    DualRule.PI3: update_pi3,
}


def initial_multipliers(rule: DualRule, grid, n_ineq: int,
                        nu_min: float = 1e-6) -> Trajectory:
    """Cold-start multipliers: zeros, or the floor value for the Pi3 rule."""
    nu0 = np.full(max(n_ineq, 1), nu_min if rule is DualRule.PI3 else 0.0)
    return Trajectory.constant(grid, nu0[:n_ineq] if n_ineq else np.zeros(1))


def update_multiplier_trajectory(
    nu: Trajectory,
    h_traj: Trajectory,
    cfg: DualUpdateConfig,
    eq: tuple[Trajectory, Trajectory] | None = None,
) -> Trajectory | tuple[Trajectory, Trajectory]:
    """Apply the configured rule pointwise at every node and constraint.

    When ``eq = (nu_eq, g_traj)`` is given, pure-state equality multipliers
    are advanced as nu_eq <- nu_eq + alpha * g and returned alongside.
    """
    if not np.array_equal(nu.grid.nodes, h_traj.grid.nodes):
        raise ValueError("multiplier and constraint trajectories must share a grid")
    rule = _RULES[cfg.rule]
    new_values = rule(nu.values, h_traj.values, cfg)
    updated = Trajectory(nu.grid, new_values)
    if eq is None:
        return updated
    nu_eq, g_traj = eq
    if not np.array_equal(nu_eq.grid.nodes, g_traj.grid.nodes):
        raise ValueError("equality multiplier and residual grids must match")
    eq_updated = Trajectory(nu_eq.grid, nu_eq.values + cfg.alpha * g_traj.values)
    return updated, eq_updated
