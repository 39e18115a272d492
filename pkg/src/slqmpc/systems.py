"""Benchmark dynamical systems and constraint definitions.

Each model ships its flow map together with analytic Jacobians; the
finite-difference check below is the standing oracle that keeps them honest.
Inequality constraints use the convention h(x, u, t) >= 0 feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

FlowFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
JacFn = Callable[[np.ndarray, np.ndarray, float], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class SystemModel:
    """Continuous-time dynamics with analytic Jacobians A = df/dx, B = df/du."""

    state_dim: int
    input_dim: int
    flow: FlowFn
    jacobians: JacFn


@dataclass(frozen=True)
class CartPoleParams:
    cart_mass: float = 1.0
    pole_mass: float = 0.3
    pole_length: float = 0.5
    gravity: float = 9.81

    def __post_init__(self) -> None:
        for name in ("cart_mass", "pole_mass", "pole_length", "gravity"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PlanarMoverParams:
    mass: float = 1.0
    damping: float = 0.5
    obstacles: tuple[tuple[tuple[float, float], float], ...] = ()
    goal: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.damping < 0.0:
            raise ValueError("damping must be non-negative")
        for center, radius in self.obstacles:
            if radius <= 0.0:
                raise ValueError("obstacle radii must be positive")
            if len(center) != 2:
                raise ValueError("obstacle centers must be planar")


ConsFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
ConsJacFn = Callable[[np.ndarray, np.ndarray, float], tuple[np.ndarray, np.ndarray]]
ConsHessFn = Callable[
    [np.ndarray, np.ndarray, float], tuple[np.ndarray, np.ndarray, np.ndarray]
]


def _no_constraints(n_x: int, n_u: int):
    def fn(x, u, t):
        return np.zeros(0)

    def jac(x, u, t):
        return np.zeros((0, n_x)), np.zeros((0, n_u))

    return fn, jac


@dataclass(frozen=True)
class ConstraintSet:
    """Path constraints: inequalities h >= 0 and state-input equalities g = 0.

    First derivatives are mandatory; second derivatives of h are optional and
    only consulted when the exact-Hessian quadratization option is enabled.
    """

    n_ineq: int
    n_eq: int
    ineq: ConsFn
    ineq_jac: ConsJacFn
    eq: ConsFn
    eq_jac: ConsJacFn
    ineq_hess: ConsHessFn | None = None

    @classmethod
    def empty(cls, n_x: int, n_u: int) -> "ConstraintSet":
        fn, jac = _no_constraints(n_x, n_u)
        return cls(n_ineq=0, n_eq=0, ineq=fn, ineq_jac=jac, eq=fn, eq_jac=jac)


def combine_constraints(a: ConstraintSet, b: ConstraintSet) -> ConstraintSet:
    """Stack two constraint sets defined on the same state/input spaces."""

    def ineq(x, u, t):
        return np.concatenate([a.ineq(x, u, t), b.ineq(x, u, t)])

    def ineq_jac(x, u, t):
        ax, au = a.ineq_jac(x, u, t)
        bx, bu = b.ineq_jac(x, u, t)
        return np.vstack([ax, bx]), np.vstack([au, bu])

    def eq(x, u, t):
        return np.concatenate([a.eq(x, u, t), b.eq(x, u, t)])

    def eq_jac(x, u, t):
        ax, au = a.eq_jac(x, u, t)
        bx, bu = b.eq_jac(x, u, t)
        return np.vstack([ax, bx]), np.vstack([au, bu])

    hess = None
    if a.ineq_hess is not None and b.ineq_hess is not None:

        def hess(x, u, t):
            axx, auu, aux = a.ineq_hess(x, u, t)
            bxx, buu, bux = b.ineq_hess(x, u, t)
            return (
                np.concatenate([axx, bxx]),
                np.concatenate([auu, buu]),
                np.concatenate([aux, bux]),
            )

    return ConstraintSet(
        n_ineq=a.n_ineq + b.n_ineq,
        n_eq=a.n_eq + b.n_eq,
        ineq=ineq,
        ineq_jac=ineq_jac,
        eq=eq,
        eq_jac=eq_jac,
        ineq_hess=hess,
    )


def cartpole_model(params: CartPoleParams) -> SystemModel:
    """Cart with a point-mass pendulum; state (p, theta, pdot, thetadot), input (force).

    theta = 0 is the hanging equilibrium and theta = pi the upright one.
    """
    mc, mp, ell, g = (
        params.cart_mass,
        params.pole_mass,
        params.pole_length,
        params.gravity,
    )

    def flow(x, u, t):
        _, th, pd, thd = x
        f = u[0]
        s, c = np.sin(th), np.cos(th)
        den = mc + mp * s * s
        pacc = (f + mp * s * (g * c + ell * thd * thd)) / den
        thacc = -(pacc * c + g * s) / ell
        return np.array([pd, thd, pacc, thacc])

    def jacobians(x, u, t):
        _, th, pd, thd = x
        f = u[0]
        s, c = np.sin(th), np.cos(th)
        den = mc + mp * s * s
        num = f + mp * s * (g * c + ell * thd * thd)
        pacc = num / den
        dden_dth = 2.0 * mp * s * c
        dnum_dth = mp * (c * (g * c + ell * thd * thd) - g * s * s)
        dpacc_dth = dnum_dth / den - pacc * dden_dth / den
        dpacc_dthd = 2.0 * mp * s * ell * thd / den
        dpacc_du = 1.0 / den
        dthacc_dth = -(dpacc_dth * c - pacc * s + g * c) / ell
        dthacc_dthd = -(dpacc_dthd * c) / ell
        dthacc_du = -(dpacc_du * c) / ell
        A = np.array(
            [
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, dpacc_dth, 0.0, dpacc_dthd],
                [0.0, dthacc_dth, 0.0, dthacc_dthd],
            ]
        )
        B = np.array([[0.0], [0.0], [dpacc_du], [dthacc_du]])
        return A, B

    return SystemModel(state_dim=4, input_dim=1, flow=flow, jacobians=jacobians)


def cartpole_energy(params: CartPoleParams, x: np.ndarray) -> float:
    """Total mechanical energy, zero at the hanging rest state."""
    mc, mp, ell, g = (
        params.cart_mass,
        params.pole_mass,
        params.pole_length,
        params.gravity,
    )
    _, th, pd, thd = x
    kinetic = 0.5 * (mc + mp) * pd**2 + mp * ell * pd * thd * np.cos(th) \
        + 0.5 * mp * ell**2 * thd**2
    potential = mp * g * ell * (1.0 - np.cos(th))
    return float(kinetic + potential)


def planar_mover_model(params: PlanarMoverParams) -> SystemModel:
    """Force-controlled planar point mass with linear damping.

    State (px, py, vx, vy), input (fx, fy). The Jacobians are constant.
    """
    m, d = params.mass, params.damping
    A = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, -d / m, 0.0],
            [0.0, 0.0, 0.0, -d / m],
        ]
    )
    B = np.array([[0.0, 0.0], [0.0, 0.0], [1.0 / m, 0.0], [0.0, 1.0 / m]])

    def flow(x, u, t):
        return A @ x + B @ u

    def jacobians(x, u, t):
        return A, B

    return SystemModel(state_dim=4, input_dim=2, flow=flow, jacobians=jacobians)


def box_input_constraints(u_max: Sequence[float], n_x: int) -> ConstraintSet:
    """Symmetric input bounds as h = [u_max - u; u + u_max] >= 0."""
    u_max = np.atleast_1d(np.asarray(u_max, dtype=float))
    if np.any(u_max <= 0.0):
        raise ValueError("u_max must be positive elementwise")
    n_u = u_max.size
    Ju = np.vstack([-np.eye(n_u), np.eye(n_u)])
    Jx = np.zeros((2 * n_u, n_x))

    def ineq(x, u, t):
        return np.concatenate([u_max - u, u + u_max])

    def ineq_jac(x, u, t):
        return Jx, Ju

    def ineq_hess(x, u, t):
        return (
            np.zeros((2 * n_u, n_x, n_x)),
            np.zeros((2 * n_u, n_u, n_u)),
            np.zeros((2 * n_u, n_u, n_x)),
        )

    _, eq_jac = _no_constraints(n_x, n_u)
    return ConstraintSet(
        n_ineq=2 * n_u,
        n_eq=0,
        ineq=ineq,
        ineq_jac=ineq_jac,
        eq=lambda x, u, t: np.zeros(0),
        eq_jac=eq_jac,
        ineq_hess=ineq_hess,
    )


def obstacle_constraints(
    obstacles: Sequence[tuple[tuple[float, float], float]],
    position_selector: np.ndarray,
    n_u: int,
) -> ConstraintSet:
    """Keep-out circles in squared-distance form: h_j = |p(x) - c_j|^2 - r_j^2.

    The squared form stays smooth at the obstacle center while keeping the
    same zero-level set as the plain distance. p(x) = position_selector @ x.
    """
    sel = np.asarray(position_selector, dtype=float)
    centers = np.asarray([c for c, _ in obstacles], dtype=float)
    radii = np.asarray([r for _, r in obstacles], dtype=float)
    if np.any(radii <= 0.0):
        raise ValueError("obstacle radii must be positive")
    n_obs = centers.shape[0]
    n_x = sel.shape[1]
    hess_xx = np.tile(2.0 * sel.T @ sel, (n_obs, 1, 1))

    def ineq(x, u, t):
        diff = sel @ x - centers
        return np.einsum("ij,ij->i", diff, diff) - radii**2

    def ineq_jac(x, u, t):
        diff = sel @ x - centers
        return 2.0 * diff @ sel, np.zeros((n_obs, n_u))

    def ineq_hess(x, u, t):
        return hess_xx, np.zeros((n_obs, n_u, n_u)), np.zeros((n_obs, n_u, n_x))

    _, eq_jac = _no_constraints(n_x, n_u)
    return ConstraintSet(
        n_ineq=n_obs,
        n_eq=0,
        ineq=ineq,
        ineq_jac=ineq_jac,
        eq=lambda x, u, t: np.zeros(0),
        eq_jac=eq_jac,
        ineq_hess=ineq_hess,
    )


@dataclass(frozen=True)
class JacobianCheckReport:
    samples: int
    tol: float
    max_rel_error_A: float
    max_rel_error_B: float
    passed: bool


def finite_difference_check(
    model: SystemModel,
    samples: int = 100,
    tol: float = 1e-4,
    state_box: float | Sequence[float] = 1.0,
    input_box: float | Sequence[float] = 1.0,
    seed: int = 0,
    eps: float = 1e-6,
) -> JacobianCheckReport:
    """Compare analytic Jacobians against central differences at random points.

    Samples are drawn uniformly from +-state_box / +-input_box; the relative
    error is |analytic - fd| / (1 + |analytic|), reported elementwise-max.
    """
    rng = np.random.default_rng(seed)
    sx = np.broadcast_to(np.asarray(state_box, dtype=float), (model.state_dim,))
    su = np.broadcast_to(np.asarray(input_box, dtype=float), (model.input_dim,))
    worst_a = 0.0
    worst_b = 0.0
    for _ in range(samples):
        x = rng.uniform(-sx, sx)
        u = rng.uniform(-su, su)
        t = float(rng.uniform(0.0, 1.0))
        A, B = model.jacobians(x, u, t)
        A_fd = np.empty_like(A)
        for j in range(model.state_dim):
            dx = np.zeros(model.state_dim)
            dx[j] = eps
            A_fd[:, j] = (model.flow(x + dx, u, t) - model.flow(x - dx, u, t)) / (2 * eps)
        B_fd = np.empty_like(B)
        for j in range(model.input_dim):
            du = np.zeros(model.input_dim)
            du[j] = eps
            B_fd[:, j] = (model.flow(x, u + du, t) - model.flow(x, u - du, t)) / (2 * eps)
        worst_a = max(worst_a, float(np.max(np.abs(A - A_fd) / (1.0 + np.abs(A)))))
        worst_b = max(worst_b, float(np.max(np.abs(B - B_fd) / (1.0 + np.abs(B)))))
    return JacobianCheckReport(
        samples=samples,
        tol=tol,
        max_rel_error_A=worst_a,
        max_rel_error_B=worst_b,
        passed=(worst_a < tol and worst_b < tol),
    )


def staggered_pillar_maze(
    n_pillars: int = 20,
    radius: float = 0.1,
    row_x: tuple[float, float] = (0.9, 1.15),
    gap_half_width: float = 0.22,
    pitch: float = 0.28,
) -> tuple[tuple[tuple[float, float], float], ...]:
    """Two staggered pillar rows with a single narrow gap on the y = 0 line.

    The first row leaves the gap centered at y = 0; the second row is offset
    by half a pitch so the corridor through the gap is the only straight-ish
    collision-free route.
    """
    per_row = n_pillars // 2
    half = per_row // 2
    row_a = [gap_half_width + pitch * k for k in range(half)]
    ys_a = [y for y in row_a] + [-y for y in row_a]
    row_b = [gap_half_width + pitch * (k + 0.5) for k in range(half)]
    ys_b = [y for y in row_b] + [-y for y in row_b]
    obstacles = [((row_x[0], y), radius) for y in sorted(ys_a)]
    obstacles += [((row_x[1], y), radius) for y in sorted(ys_b)]
    return tuple(obstacles)
