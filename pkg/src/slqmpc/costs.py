"""Objective definitions with analytic first and second derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

StageFn = Callable[[np.ndarray, np.ndarray, float], float]
StageDerivFn = Callable[
    [np.ndarray, np.ndarray, float],
    tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray],
]
TerminalFn = Callable[[np.ndarray], float]
TerminalDerivFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class CostFunction:
    """Intermediate cost L(x, u, t) and terminal cost Phi(x(tf)).

    stage_derivatives returns (Q, R, P, q, r): the Hessian blocks and
    gradients of L at the query point, with P the d2L/du dx cross block.
    terminal_derivatives returns (Qf, qf).
    """

    stage: StageFn
    stage_derivatives: StageDerivFn
    terminal: TerminalFn
    terminal_derivatives: TerminalDerivFn


def quadratic_tracking_cost(
    Q: np.ndarray,
    R: np.ndarray,
    x_goal: Sequence[float],
    Qf: np.ndarray,
    u_ref: Sequence[float] | None = None,
) -> CostFunction:
    """0.5|x - x_goal|_Q^2 + 0.5|u - u_ref|_R^2 with terminal 0.5|x - x_goal|_Qf^2."""
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    Qf = np.asarray(Qf, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    u_ref = np.zeros(R.shape[0]) if u_ref is None else np.asarray(u_ref, dtype=float)
    P = np.zeros((R.shape[0], Q.shape[0]))

    def stage(x, u, t):
        dx = x - x_goal
        du = u - u_ref
        return 0.5 * float(dx @ Q @ dx) + 0.5 * float(du @ R @ du)

    def stage_derivatives(x, u, t):
        return Q, R, P, Q @ (x - x_goal), R @ (u - u_ref)

    def terminal(x):
        dx = x - x_goal
        return 0.5 * float(dx @ Qf @ dx)

    def terminal_derivatives(x):
        return Qf, Qf @ (x - x_goal)

    return CostFunction(
        stage=stage,
        stage_derivatives=stage_derivatives,
        terminal=terminal,
        terminal_derivatives=terminal_derivatives,
    )
