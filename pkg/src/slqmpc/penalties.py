"""Inequality-handling penalties and their quadratization into the LQ model.

Four strategies are provided: three augmented-Lagrangian penalties (PHR,
non-slack, smooth-PHR) driven by multiplier estimates, and a relaxed
log-barrier that needs no multipliers. Every penalty is separable across
constraints, so derivatives with respect to the constraint values are a
per-constraint vector (first order) and diagonal (second order).

All second derivatives are non-negative: each per-constraint term is convex
in h, which keeps the Gauss-Newton contributions to Q and R positive
semidefinite by construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np


class PenaltyKind(str, enum.Enum):
    PHR = "PHR"
    NON_SLACK = "NonSlack"
    SMOOTH_PHR = "SmoothPHR"
    RELAXED_BARRIER = "RelaxedBarrier"


AL_KINDS = (PenaltyKind.PHR, PenaltyKind.NON_SLACK, PenaltyKind.SMOOTH_PHR)


@dataclass(frozen=True)
class PenaltyStrategy:
    """Penalty selection plus every tunable the four strategies use.

    rho is the penalty weight (kept constant across MPC iterations), alpha the
    dual ascent step length, (mu, delta) the relaxed-barrier weight and
    relaxation threshold, delta_psi the smooth-PHR shaping relaxation, and
    nu_min the multiplier floor required by the smooth-PHR division by nu.
    """

    kind: PenaltyKind
    rho: float = 10.0
    alpha: float = 1.0
    mu: float = 0.1
    delta: float = 0.1
    delta_psi: float = 0.5
    nu_min: float = 1e-6

    def __post_init__(self) -> None:
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if not 0.0 < self.delta_psi < 1.0:
            raise ValueError("delta_psi must lie in (0, 1)")
        if self.nu_min <= 0.0:
            raise ValueError("nu_min must be positive")

    @property
    def uses_multipliers(self) -> bool:
        return self.kind in AL_KINDS

    def with_params(self, **kwargs) -> "PenaltyStrategy":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class PenaltyEvaluation:
    """Summed penalty value plus per-constraint first/second derivatives in h."""

    value: float
    d_dh: np.ndarray
    d2_dh2: np.ndarray


def phr_terms(h, nu, rho):
    """Per-constraint PHR terms: (1/2rho)(max{0, nu - rho*h}^2 - nu^2).

    At the kink nu - rho*h = 0 the curvature takes the active-branch value
    rho (conservative, keeps the quadratized R contribution positive).
    """
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    active = np.maximum(0.0, nu - rho * h)
    value = (active**2 - nu**2) / (2.0 * rho)
    d1 = -active
    d2 = np.where(nu - rho * h >= 0.0, rho, 0.0)
    return value, d1, d2


def phr_penalty(h, nu, rho: float) -> PenaltyEvaluation:
    """Augmented-Lagrangian penalty from eliminating the inequality slacks."""
    value, d1, d2 = phr_terms(h, nu, rho)
    return PenaltyEvaluation(float(np.sum(value)), d1, d2)


def nonslack_terms(h, nu, rho):
    """Per-constraint non-slack terms: -nu*h + [h < 0 or nu > 0]*(rho/2)h^2.

    The quadratic stays switched on inside the feasible region while the
    multiplier estimate is positive; at h = 0 the curvature takes the
    active-branch value rho (same kink convention as PHR).
    """
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    on = (h < 0.0) | (nu > 0.0)
    on_curv = (h <= 0.0) | (nu > 0.0)
    value = -nu * h + np.where(on, 0.5 * rho * h * h, 0.0)
    d1 = -nu + np.where(on, rho * h, 0.0)
    d2 = np.where(on_curv, rho, 0.0)
    return value, d1, d2


def nonslack_penalty(h, nu, rho: float) -> PenaltyEvaluation:
    value, d1, d2 = nonslack_terms(h, nu, rho)
    return PenaltyEvaluation(float(np.sum(value)), d1, d2)


def psi_function(t, delta_psi: float = 0.5):
    """Shifted quadratically-relaxed log-barrier shaping function.

    psi(t) = -ln(t + 1) for t >= delta_psi - 1; below the junction a
    quadratic extension matches value, slope, and curvature of the log
    branch, so psi is C^2 everywhere. By construction psi(0) = 0 and
    psi'(0) = -1, which makes the smooth-PHR boundary gradient equal the
    Lagrangian slope -nu. Returns (psi, psi', psi'').
    """
    if not 0.0 < delta_psi < 1.0:
        raise ValueError("delta_psi must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    t_star = delta_psi - 1.0
    a = 1.0 / (2.0 * delta_psi**2)
    b = -1.0 / delta_psi - 2.0 * a * t_star
    c = -np.log(delta_psi) - a * t_star**2 - b * t_star
    log_branch = t >= t_star
    t_safe = np.where(log_branch, t, 0.0)
    val = np.where(log_branch, -np.log1p(t_safe), a * t * t + b * t + c)
    d1 = np.where(log_branch, -1.0 / (t_safe + 1.0), 2.0 * a * t + b)
    d2 = np.where(log_branch, 1.0 / (t_safe + 1.0) ** 2, 2.0 * a)
    return val, d1, d2


def smooth_phr_terms(h, nu, rho, delta_psi):
    """Per-constraint smooth-PHR terms: (nu^2/rho) psi(rho*h/nu)."""
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    val, d1, d2 = psi_function(rho * h / nu, delta_psi)
    return (nu**2 / rho) * val, nu * d1, rho * d2


def smooth_phr_penalty(
    h, nu, rho: float, delta_psi: float = 0.5, nu_min: float = 1e-6
) -> PenaltyEvaluation:
    """C^2 augmented-Lagrangian penalty; requires nu >= nu_min > 0."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < nu_min * (1.0 - 1e-12)):
        raise ValueError(
            "smooth-PHR multiplier fell below its floor; the outer loop must "
            "keep nu >= nu_min"
        )
    value, d1, d2 = smooth_phr_terms(h, nu, rho, delta_psi)
    return PenaltyEvaluation(float(np.sum(value)), d1, d2)


def relaxed_barrier_terms(h, mu, delta):
    """Per-constraint relaxed log-barrier: -mu*ln(h) above delta, quadratic below.

    The quadratic branch matches value, slope, and curvature at delta, so the
    barrier is C^2 and defined for every h, including infeasible points.
    """
    h = np.asarray(h, dtype=float)
    log_branch = h > delta
    h_safe = np.where(log_branch, h, delta)
    a = mu / (2.0 * delta**2)
    dh = h - delta
    val = np.where(log_branch, -mu * np.log(h_safe), a * dh * dh - (mu / delta) * dh - mu * np.log(delta))
    d1 = np.where(log_branch, -mu / h_safe, 2.0 * a * dh - mu / delta)
    d2 = np.where(log_branch, mu / h_safe**2, 2.0 * a)
    return val, d1, d2


def relaxed_barrier_penalty(h, mu: float, delta: float) -> PenaltyEvaluation:
    value, d1, d2 = relaxed_barrier_terms(h, mu, delta)
    return PenaltyEvaluation(float(np.sum(value)), d1, d2)


def equality_al_terms(g, nu, rho):
    """Per-constraint quadratic AL terms for equalities: nu*g + (rho/2)g^2."""
    g = np.asarray(g, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return nu * g + 0.5 * rho * g * g, nu + rho * g, np.full_like(g, rho)


def equality_al_penalty(g, nu_eq, rho: float) -> PenaltyEvaluation:
    """Classic quadratic augmented-Lagrangian term for pure-state equalities."""
    value, d1, d2 = equality_al_terms(g, nu_eq, rho)
    return PenaltyEvaluation(float(np.sum(value)), d1, d2)


def evaluate_penalty(
    strategy: PenaltyStrategy, h: np.ndarray, nu: np.ndarray
) -> PenaltyEvaluation:
    """Dispatch on the strategy kind; nu is ignored by the relaxed barrier."""
    if strategy.kind is PenaltyKind.PHR:
        return phr_penalty(h, nu, strategy.rho)
    if strategy.kind is PenaltyKind.NON_SLACK:
        return nonslack_penalty(h, nu, strategy.rho)
    if strategy.kind is PenaltyKind.SMOOTH_PHR:
        return smooth_phr_penalty(
            h, nu, strategy.rho, strategy.delta_psi, strategy.nu_min
        )
    return relaxed_barrier_penalty(h, strategy.mu, strategy.delta)


@dataclass(frozen=True)
class LqCostContribution:
    """Additive contribution of one penalized constraint block to an LQ node."""

    dQ: np.ndarray
    dR: np.ndarray
    dP: np.ndarray
    dq: np.ndarray
    dr: np.ndarray
    dq0: float


def _clamp_psd(M: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto the PSD cone by clamping eigenvalues."""
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.maximum(w, 0.0)
    return (V * w) @ V.T


def quadratize_constraint_term(
    h_val: np.ndarray,
    h_grad_x: np.ndarray,
    h_grad_u: np.ndarray,
    evaluation: PenaltyEvaluation,
    h_hess: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    exact_hessian: bool = False,
) -> LqCostContribution:
    """Chain-rule a penalty evaluation into additive LQ-cost terms.

    The default is the Gauss-Newton form built from constraint gradients and
    the penalty's own curvature, which is PSD by construction. When second
    derivatives of h are supplied and exact_hessian is set, the extra
    d_dh-weighted constraint-Hessian term is added after clamping it to PSD.
    """
    Jx = np.atleast_2d(np.asarray(h_grad_x, dtype=float))
    Ju = np.atleast_2d(np.asarray(h_grad_u, dtype=float))
    d1 = evaluation.d_dh
    d2 = evaluation.d2_dh2
    dq = Jx.T @ d1
    dr = Ju.T @ d1
    Jx_w = Jx * d2[:, None]
    dQ = Jx_w.T @ Jx
    dR = (Ju * d2[:, None]).T @ Ju
    dP = (Ju * d2[:, None]).T @ Jx
    if exact_hessian and h_hess is not None:
        Hxx, Huu, Hux = h_hess
        n_x = Jx.shape[1]
        joint = np.zeros((n_x + Ju.shape[1], n_x + Ju.shape[1]))
        joint[:n_x, :n_x] = np.einsum("i,ijk->jk", d1, Hxx)
        joint[n_x:, n_x:] = np.einsum("i,ijk->jk", d1, Huu)
        cross = np.einsum("i,ijk->jk", d1, Hux)
        joint[n_x:, :n_x] = cross
        joint[:n_x, n_x:] = cross.T
        joint = _clamp_psd(joint)
        dQ = dQ + joint[:n_x, :n_x]
        dR = dR + joint[n_x:, n_x:]
        dP = dP + joint[n_x:, :n_x]
    return LqCostContribution(
        dQ=dQ, dR=dR, dP=dP, dq=dq, dr=dr, dq0=float(evaluation.value)
    )


def hessian_condition(R: np.ndarray) -> float:
    """Condition-number diagnostic on a (stack of) quadratized input Hessians.

    Penalty and barrier weights drive a spread between huge and ordinary
    eigenvalues; this number is the cheap way to watch that happening.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim == 2:
        R = R[None]
    worst = 1.0
    for Ri in R:
        w = np.linalg.eigvalsh(0.5 * (Ri + Ri.T))
        lo = float(np.min(np.abs(w)))
        hi = float(np.max(np.abs(w)))
        worst = max(worst, np.inf if lo == 0.0 else hi / lo)
    return worst
