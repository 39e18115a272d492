"""Benchmark task definitions wiring models, costs, and constraints together."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .costs import quadratic_tracking_cost
from .solver import OcpDefinition
from .systems import (
    CartPoleParams,
    ConstraintSet,
    PlanarMoverParams,
    box_input_constraints,
    cartpole_model,
    obstacle_constraints,
    planar_mover_model,
    staggered_pillar_maze,
)
from .trajectory import TimeGrid

TASK_NAMES = ("cartpole_swingup", "planar_maze", "lq_sanity", "equality_toy")

UPRIGHT_TOL = 0.05          # rad; swing-up success band around theta = pi
UPRIGHT_HOLD = 0.5          # s; band must be held this long
GOAL_TOL = 0.1              # m; maze / toy completion radius
CARTPOLE_U_MAX = 5.0        # N; roughly a third of the unconstrained peak


@dataclass(frozen=True)
class TaskBundle:
    """Everything the harness needs to run one benchmark."""

    name: str
    ocp_template: OcpDefinition
    horizon: float
    sim_duration: float
    grid_dt: float
    mpc_rate: float
    completion_fn: Callable[[np.ndarray, np.ndarray], float | None]
    violation_tolerance: float


def _sustained_upright(times: np.ndarray, states: np.ndarray) -> float | None:
    """First time |theta - pi| stays within tolerance for the hold window."""
    ok = np.abs(states[:, 1] - np.pi) < UPRIGHT_TOL
    start = None
    for t, good in zip(times, ok):
        if good and start is None:
            start = t
        elif not good:
            start = None
        if start is not None and t - start >= UPRIGHT_HOLD:
            return float(start)
    return None


def _goal_reach(goal: np.ndarray):
    def fn(times: np.ndarray, states: np.ndarray) -> float | None:
        dist = np.linalg.norm(states[:, :2] - goal, axis=1)
        hit = np.nonzero(dist < GOAL_TOL)[0]
        return float(times[hit[0]]) if hit.size else None

    return fn


def cartpole_swingup_task() -> TaskBundle:
    params = CartPoleParams()
    model = cartpole_model(params)
    goal = np.array([0.0, np.pi, 0.0, 0.0])
    cost = quadratic_tracking_cost(
        Q=np.diag([2.0, 10.0, 0.2, 0.4]),
        R=np.diag([0.2]),
        x_goal=goal,
        Qf=np.diag([20.0, 100.0, 2.0, 4.0]),
    )
    constraints = box_input_constraints([CARTPOLE_U_MAX], n_x=4)
    ocp = OcpDefinition(
        model=model,
        cost=cost,
        horizon=TimeGrid.uniform(0.0, 3.0, 61),
        x0=np.zeros(4),
        constraints=constraints,
    )
    return TaskBundle(
        name="cartpole_swingup",
        ocp_template=ocp,
        horizon=3.0,
        sim_duration=6.0,
        grid_dt=0.05,
        mpc_rate=100.0,
        completion_fn=_sustained_upright,
        violation_tolerance=0.05,
    )


def planar_maze_task() -> TaskBundle:
    obstacles = staggered_pillar_maze()
    goal_xy = np.array([1.6, 0.0])
    params = PlanarMoverParams(mass=1.0, damping=1.0, obstacles=obstacles,
                               goal=tuple(goal_xy))
    model = planar_mover_model(params)
    goal = np.array([goal_xy[0], goal_xy[1], 0.0, 0.0])
    cost = quadratic_tracking_cost(
        Q=np.diag([4.0, 4.0, 0.4, 0.4]),
        R=np.diag([0.2, 0.2]),
        x_goal=goal,
        Qf=np.diag([20.0, 20.0, 2.0, 2.0]),
    )
    selector = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    constraints = obstacle_constraints(obstacles, selector, n_u=2)
    ocp = OcpDefinition(
        model=model,
        cost=cost,
        horizon=TimeGrid.uniform(0.0, 1.0, 51),
        x0=np.zeros(4),
        constraints=constraints,
    )
    return TaskBundle(
        name="planar_maze",
        ocp_template=ocp,
        horizon=1.0,
        sim_duration=8.0,
        grid_dt=0.02,
        mpc_rate=100.0,
        completion_fn=_goal_reach(goal_xy),
        violation_tolerance=1e-2,
    )


def lq_sanity_task() -> TaskBundle:
    model = planar_mover_model(PlanarMoverParams(mass=1.0, damping=0.5))
    cost = quadratic_tracking_cost(
        Q=np.eye(4),
        R=0.1 * np.eye(2),
        x_goal=np.zeros(4),
        Qf=np.eye(4),
    )
    ocp = OcpDefinition(
        model=model,
        cost=cost,
        horizon=TimeGrid.uniform(0.0, 1.0, 21),
        x0=np.zeros(4),
    )
    return TaskBundle(
        name="lq_sanity",
        ocp_template=ocp,
        horizon=1.0,
        sim_duration=1.0,
        grid_dt=0.05,
        mpc_rate=50.0,
        completion_fn=_goal_reach(np.zeros(2)),
        violation_tolerance=0.0,
    )


def input_sum_equality(n_x: int, coeffs) -> ConstraintSet:
    """State-input equality coeffs . u = 0 (input Jacobian is constant)."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    n_u = coeffs.size
    C = np.zeros((1, n_x))
    D = coeffs[None, :]

    def eq(x, u, t):
        return np.array([coeffs @ u])

    def eq_jac(x, u, t):
        return C, D

    def no_ineq(x, u, t):
        return np.zeros(0)

    def no_ineq_jac(x, u, t):
        return np.zeros((0, n_x)), np.zeros((0, n_u))

    return ConstraintSet(
        n_ineq=0, n_eq=1, ineq=no_ineq, ineq_jac=no_ineq_jac, eq=eq, eq_jac=eq_jac
    )


def equality_toy_task() -> TaskBundle:
    """Planar mover forced to keep u1 + u2 = 0: motion only along the (1,-1) axis."""
    model = planar_mover_model(PlanarMoverParams(mass=1.0, damping=0.5))
    goal_xy = np.array([1.0, -1.0])
    cost = quadratic_tracking_cost(
        Q=np.diag([2.0, 2.0, 0.2, 0.2]),
        R=0.1 * np.eye(2),
        x_goal=np.array([1.0, -1.0, 0.0, 0.0]),
        Qf=np.diag([10.0, 10.0, 1.0, 1.0]),
    )
    ocp = OcpDefinition(
        model=model,
        cost=cost,
        horizon=TimeGrid.uniform(0.0, 1.5, 31),
        x0=np.zeros(4),
        constraints=input_sum_equality(4, [1.0, 1.0]),
    )
    return TaskBundle(
        name="equality_toy",
        ocp_template=ocp,
        horizon=1.5,
        sim_duration=3.0,
        grid_dt=0.05,
        mpc_rate=50.0,
        completion_fn=_goal_reach(goal_xy),
        violation_tolerance=1e-4,
    )


_BUILDERS = {
    "cartpole_swingup": cartpole_swingup_task,
    "planar_maze": planar_maze_task,
    "lq_sanity": lq_sanity_task,
    "equality_toy": equality_toy_task,
}


def build_task(name: str) -> TaskBundle:
    if name not in _BUILDERS:
        raise KeyError(f"unknown task {name!r}; choose from {TASK_NAMES}")
    return _BUILDERS[name]()
