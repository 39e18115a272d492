"""The SLQ inner loop: quadratize, Riccati backward pass, rollout, line search.

The backward pass integrates the continuous-time differential Riccati
equation

    -dS/dt = Q + A'S + SA - (SB + P')R^{-1}(B'S + P)
    -ds/dt = q + A's + Sc - (SB + P')R^{-1}(B's + r)

with terminal data S(tf) = Qf, s(tf) = qf, yielding the affine policy
K = -R^{-1}(B'S + P) and du_ff = -R^{-1}(B's + r). The drift c is zero
except when the equality projection substitutes a feasibility correction
into the dynamics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .costs import CostFunction
from .penalties import (
    PenaltyStrategy,
    evaluate_penalty,
    hessian_condition,
    quadratize_constraint_term,
)
from .projection import InputReconstruction, LinearizedEquality, project_lq_subproblem
from .systems import ConstraintSet, SystemModel
from .trajectory import (
    IntegrationError,
    IntegratorSettings,
    TimeGrid,
    Trajectory,
    integrate_ode,
    interp_single,
)


class SolverError(RuntimeError):
    """Base class for inner-loop failures."""


class RiccatiError(SolverError):
    """The Riccati backward pass diverged or ran out of integrator steps."""


@dataclass(frozen=True)
class OcpDefinition:
    """One receding-horizon optimal control problem instance."""

    model: SystemModel
    cost: CostFunction
    horizon: TimeGrid
    x0: np.ndarray
    constraints: ConstraintSet | None = None

    def with_window(self, horizon: TimeGrid, x0: np.ndarray) -> "OcpDefinition":
        return replace(self, horizon=horizon, x0=np.asarray(x0, dtype=float))


@dataclass(frozen=True)
class SlqSettings:
    """Inner-loop knobs: integrators, regularization floor, Armijo parameters.

    The Riccati backward pass is usually stiffer than the system dynamics,
    so it may carry its own integrator settings; when riccati_integrator is
    omitted the rollout integrator is used for both.
    """

    integrator: IntegratorSettings = IntegratorSettings()
    riccati_integrator: IntegratorSettings | None = None
    eps_min: float = 1e-6
    armijo_sigma: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 10
    exact_constraint_hessian: bool = False
    s_norm_cap: float = 1e12

    @property
    def riccati(self) -> IntegratorSettings:
        return self.riccati_integrator or self.integrator


@dataclass(frozen=True)
class LqApproximation:
    """Per-node linear dynamics and quadratic cost on a common grid.

    Stacked arrays with the node index leading: A (N,nx,nx), B (N,nx,nu),
    drift c (N,nx), cost blocks Q, R, P and gradients q, r, offsets q0,
    terminal Qf, qf, qf0. equalities carries one linearized constraint per
    node when the problem has state-input equalities.
    """

    grid: TimeGrid
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    q: np.ndarray
    r: np.ndarray
    q0: np.ndarray
    Qf: np.ndarray
    qf: np.ndarray
    qf0: float
    equalities: tuple[LinearizedEquality, ...] | None = None

    @property
    def state_dim(self) -> int:
        return self.A.shape[1]

    @property
    def input_dim(self) -> int:
        return self.B.shape[2]


@dataclass(frozen=True)
class RiccatiSolution:
    """Quadratic value-function coefficients sampled at the grid nodes."""

    grid: TimeGrid
    S: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class PolicyGains:
    """Raw backward-pass output: feedback gains and feedforward increments."""

    grid: TimeGrid
    K: np.ndarray
    u_ff: np.ndarray


@dataclass(frozen=True)
class AffinePolicy:
    """Time-varying affine policy anchored to nominal trajectories.

    Applying the policy at (x, t) gives
    u = u_nom(t) + gamma * u_ff(t) + K(t) (x - x_nom(t)), with every
    time-dependent piece interpolated linearly between grid nodes.
    """

    grid: TimeGrid
    K: np.ndarray
    u_ff: np.ndarray
    x_nom: Trajectory
    u_nom: Trajectory
    gamma: float = 1.0
    _blob: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.K)) and np.all(np.isfinite(self.u_ff))):
            raise ValueError("policy gains must be finite")
        n = len(self.grid)
        blob = np.concatenate(
            [
                self.u_nom.values,
                self.u_ff,
                self.x_nom.values,
                self.K.reshape(n, -1),
            ],
            axis=1,
        )
        object.__setattr__(self, "_blob", blob)

    @property
    def input_dim(self) -> int:
        return self.u_ff.shape[1]

    @property
    def state_dim(self) -> int:
        return self.K.shape[2]

    def control(self, x: np.ndarray, t: float, gamma: float | None = None) -> np.ndarray:
        gamma = self.gamma if gamma is None else gamma
        n_u, n_x = self.u_ff.shape[1], self.K.shape[2]
        row = interp_single(self.grid.nodes, self._blob, t)
        u_bar = row[:n_u]
        u_ff = row[n_u : 2 * n_u]
        x_bar = row[2 * n_u : 2 * n_u + n_x]
        K_t = row[2 * n_u + n_x :].reshape(n_u, n_x)
        return u_bar + gamma * u_ff + K_t @ (x - x_bar)


@dataclass(frozen=True)
class IterationStats:
    """One row of the inner-loop log."""

    merit: float
    cost: float
    violation_l2: float
    eq_residual_inf: float
    gamma: float
    ff_norm: float
    reg_shift: float
    r_condition: float
    wall_ms: float
    line_search_ok: bool


@dataclass(frozen=True)
class IterateResult:
    x_nom: Trajectory
    u_nom: Trajectory
    policy: AffinePolicy
    stats: IterationStats


@dataclass(frozen=True)
class Solution:
    x_nom: Trajectory
    u_nom: Trajectory
    policy: AffinePolicy
    stats: tuple[IterationStats, ...]
    converged: bool


def integrated_violation(nodes: np.ndarray, h_values: np.ndarray) -> float:
    """sqrt of the trapezoidal time-integral of sum_i min(0, h_i)^2."""
    h_values = np.atleast_2d(h_values)
    if h_values.shape[1] == 0:
        return 0.0
    sq = np.sum(np.minimum(0.0, h_values) ** 2, axis=1)
    return float(np.sqrt(np.trapezoid(sq, nodes)))


def roll_nominal(
    ocp: OcpDefinition, u_traj: Trajectory, settings: SlqSettings
) -> Trajectory:
    """Integrate the dynamics under an interpolated open-loop input trajectory."""

    def flow(x, t):
        return ocp.model.flow(x, u_traj.at(t), t)

    return integrate_ode(flow, ocp.x0, ocp.horizon, settings.integrator)


def _stage_samples(
    ocp: OcpDefinition,
    x_nodes: np.ndarray,
    u_nodes: np.ndarray,
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
):
    """Per-node stage cost, penalty value, h and g samples along a trajectory."""
    nodes = ocp.horizon.nodes
    cons = ocp.constraints
    n = nodes.size
    stage = np.empty(n)
    pen = np.zeros(n)
    n_ineq = cons.n_ineq if cons is not None else 0
    n_eq = cons.n_eq if cons is not None else 0
    h_all = np.zeros((n, n_ineq))
    g_all = np.zeros((n, n_eq))
    for i, t in enumerate(nodes):
        x, u = x_nodes[i], u_nodes[i]
        stage[i] = ocp.cost.stage(x, u, t)
        if n_ineq:
            h = cons.ineq(x, u, t)
            h_all[i] = h
            if strategy is not None:
                nu_i = nu.values[i] if nu is not None else np.zeros(n_ineq)
                pen[i] = evaluate_penalty(strategy, h, nu_i).value
        if n_eq:
            g_all[i] = cons.eq(x, u, t)
    return stage, pen, h_all, g_all


def evaluate_merit(
    ocp: OcpDefinition,
    x_traj: Trajectory,
    u_traj: Trajectory,
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Augmented-Lagrangian merit along a trajectory pair.

    Returns (merit, penalty-free cost, h samples, g samples); the merit is
    the cost plus the time-integrated inequality penalty, with equality
    residuals reported separately through the g samples.
    """
    nodes = ocp.horizon.nodes
    stage, pen, h_all, g_all = _stage_samples(
        ocp, x_traj.values, u_traj.values, nu, strategy
    )
    terminal = ocp.cost.terminal(x_traj.values[-1])
    cost = float(np.trapezoid(stage, nodes)) + terminal
    merit = cost + float(np.trapezoid(pen, nodes))
    return merit, cost, h_all, g_all


def quadratize(
    ocp: OcpDefinition,
    nominal: tuple[Trajectory, Trajectory],
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
    exact_constraint_hessian: bool = False,
) -> LqApproximation:
    """Quadratize the augmented Lagrangian around nominal trajectories.

    Produces the per-node LQ data (cost quadratization plus penalty
    contributions) and attaches linearized state-input equalities for the
    projection stage.
    """
    x_traj, u_traj = nominal
    nodes = ocp.horizon.nodes
    n = nodes.size
    n_x, n_u = ocp.model.state_dim, ocp.model.input_dim
    cons = ocp.constraints
    n_ineq = cons.n_ineq if cons is not None else 0
    n_eq = cons.n_eq if cons is not None else 0

    A = np.empty((n, n_x, n_x))
    B = np.empty((n, n_x, n_u))
    Q = np.empty((n, n_x, n_x))
    R = np.empty((n, n_u, n_u))
    P = np.empty((n, n_u, n_x))
    q = np.empty((n, n_x))
    r = np.empty((n, n_u))
    q0 = np.empty(n)
    equalities: list[LinearizedEquality] = []

    for i, t in enumerate(nodes):
        x, u = x_traj.values[i], u_traj.values[i]
        A[i], B[i] = ocp.model.jacobians(x, u, t)
        Qi, Ri, Pi, qi, ri = ocp.cost.stage_derivatives(x, u, t)
        Qi = 0.5 * (Qi + Qi.T)
        Ri = 0.5 * (Ri + Ri.T)
        q0[i] = ocp.cost.stage(x, u, t)
        if n_ineq and strategy is not None:
            h = cons.ineq(x, u, t)
            Jx, Ju = cons.ineq_jac(x, u, t)
            nu_i = nu.values[i] if nu is not None else np.zeros(n_ineq)
            ev = evaluate_penalty(strategy, h, nu_i)
            hess = None
            if exact_constraint_hessian and cons.ineq_hess is not None:
                hess = cons.ineq_hess(x, u, t)
            contrib = quadratize_constraint_term(
                h, Jx, Ju, ev, h_hess=hess, exact_hessian=exact_constraint_hessian
            )
            Qi = Qi + contrib.dQ
            Ri = Ri + contrib.dR
            Pi = Pi + contrib.dP
            qi = qi + contrib.dq
            ri = ri + contrib.dr
            q0[i] += contrib.dq0
        Q[i], R[i], P[i], q[i], r[i] = Qi, Ri, Pi, qi, ri
        if n_eq:
            C, D = cons.eq_jac(x, u, t)
            equalities.append(LinearizedEquality(C=C, D=D, e=cons.eq(x, u, t)))

    Qf, qf = ocp.cost.terminal_derivatives(x_traj.values[-1])
    lq = LqApproximation(
        grid=ocp.horizon,
        A=A,
        B=B,
        c=np.zeros((n, n_x)),
        Q=Q,
        R=R,
        P=P,
        q=q,
        r=r,
        q0=q0,
        Qf=0.5 * (Qf + Qf.T),
        qf=qf,
        qf0=float(ocp.cost.terminal(x_traj.values[-1])),
        equalities=tuple(equalities) if n_eq else None,
    )
    for name in ("A", "B", "Q", "R", "P", "q", "r", "q0", "Qf", "qf"):
        if not np.all(np.isfinite(getattr(lq, name))):
            raise SolverError(
                f"non-finite {name} in the LQ approximation; the nominal "
                "trajectory likely left the model's valid domain"
            )
    return lq


def project_lq_trajectory(
    lq: LqApproximation,
) -> tuple[LqApproximation, tuple[InputReconstruction, ...] | None]:
    """Apply the per-node equality projection across the whole horizon."""
    if lq.equalities is None:
        return lq, None
    n = len(lq.grid)
    A = np.empty_like(lq.A)
    B = np.empty_like(lq.B)
    c = np.empty_like(lq.c)
    Q = np.empty_like(lq.Q)
    R = np.empty_like(lq.R)
    P = np.empty_like(lq.P)
    q = np.empty_like(lq.q)
    r = np.empty_like(lq.r)
    q0 = np.empty_like(lq.q0)
    recons = []
    for i in range(n):
        node, recon = project_lq_subproblem(
            lq.A[i], lq.B[i], lq.Q[i], lq.R[i], lq.P[i], lq.q[i], lq.r[i],
            float(lq.q0[i]), lq.equalities[i],
        )
        A[i], B[i], c[i] = node["A"], node["B"], node["c"]
        Q[i], R[i], P[i] = node["Q"], node["R"], node["P"]
        q[i], r[i], q0[i] = node["q"], node["r"], node["q0"]
        recons.append(recon)
    projected = replace(
        lq, A=A, B=B, c=c, Q=Q, R=R, P=P, q=q, r=r, q0=q0, equalities=None
    )
    return projected, tuple(recons)


def regularize(lq: LqApproximation, eps_min: float) -> tuple[LqApproximation, float]:
    """Shift each R(t) so its minimum eigenvalue reaches eps_min.

    Returns the regularized approximation and the largest shift applied,
    enforcing the strengthened Legendre-Clebsch condition numerically.
    """
    eigmin = np.linalg.eigvalsh(0.5 * (lq.R + np.swapaxes(lq.R, 1, 2))).min(axis=1)
    shifts = np.maximum(0.0, eps_min - eigmin)
    if not np.any(shifts > 0.0):
        return lq, 0.0
    R = lq.R + shifts[:, None, None] * np.eye(lq.input_dim)
    return replace(lq, R=R), float(np.max(shifts))


def backward_riccati(
    lq: LqApproximation,
    settings: IntegratorSettings,
    s_norm_cap: float = 1e12,
) -> tuple[RiccatiSolution, PolicyGains]:
    """Integrate the differential Riccati equation backward over the horizon.

    S is symmetrized inside the flow and at every sampled node; the gains
    and feedforward are evaluated from the exact node data. Integration
    failures and value-function blow-ups surface as RiccatiError.
    """
    nodes = lq.grid.nodes
    tf = nodes[-1]
    n = nodes.size
    n_x = lq.state_dim
    n_u = lq.input_dim
    nsq = n_x * n_x

    # One interpolation per RHS call: pack the LQ data in reversed time so
    # the slices below read straight out of a single blended row.
    blob = np.concatenate(
        [
            lq.A.reshape(n, -1), lq.B.reshape(n, -1), lq.Q.reshape(n, -1),
            lq.R.reshape(n, -1), lq.P.reshape(n, -1),
            lq.q, lq.r, lq.c,
        ],
        axis=1,
    )[::-1].copy()
    tau_nodes = (tf - nodes[::-1]).copy()
    o_a, o_b = 0, nsq
    o_q = o_b + n_x * n_u
    o_r = o_q + nsq
    o_p = o_r + n_u * n_u
    o_qv = o_p + n_u * n_x
    o_rv = o_qv + n_x
    o_c = o_rv + n_u

    def dre_flow(y: np.ndarray, tau: float) -> np.ndarray:
        row = interp_single(tau_nodes, blob, tau)
        A = row[o_a:o_b].reshape(n_x, n_x)
        B = row[o_b:o_q].reshape(n_x, n_u)
        Q = row[o_q:o_r].reshape(n_x, n_x)
        R = row[o_r:o_p].reshape(n_u, n_u)
        P = row[o_p:o_qv].reshape(n_u, n_x)
        q = row[o_qv:o_rv]
        r = row[o_rv:o_c]
        c = row[o_c:]
        S = y[:nsq].reshape(n_x, n_x)
        S = 0.5 * (S + S.T)
        s = y[nsq:]
        M = B.T @ S + P
        rhs = np.concatenate([M, (B.T @ s + r)[:, None]], axis=1)
        X = np.linalg.solve(R, rhs)
        dS = Q + A.T @ S + S @ A - M.T @ X[:, :-1]
        ds = q + A.T @ s + S @ c - M.T @ X[:, -1]
        return np.concatenate([dS.reshape(-1), ds])

    tau_grid = TimeGrid(tf - nodes[::-1])
    y0 = np.concatenate([lq.Qf.reshape(-1), lq.qf])
    try:
        sol = integrate_ode(dre_flow, y0, tau_grid, settings)
    except IntegrationError as exc:
        raise RiccatiError(f"Riccati backward pass failed: {exc}") from exc

    samples = sol.values[::-1]
    S = samples[:, :nsq].reshape(-1, n_x, n_x)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    s = samples[:, nsq:]
    if np.max(np.abs(S)) > s_norm_cap or np.max(np.abs(s)) > s_norm_cap:
        raise RiccatiError("Riccati solution exceeded the blow-up norm cap")

    n_u = lq.input_dim
    K = np.empty((nodes.size, n_u, n_x))
    u_ff = np.empty((nodes.size, n_u))
    for i in range(nodes.size):
        M = lq.B[i].T @ S[i] + lq.P[i]
        rhs = np.concatenate([M, (lq.B[i].T @ s[i] + lq.r[i])[:, None]], axis=1)
        sol_i = np.linalg.solve(lq.R[i], rhs)
        K[i] = -sol_i[:, :-1]
        u_ff[i] = -sol_i[:, -1]
    return (
        RiccatiSolution(grid=lq.grid, S=S, s=s),
        PolicyGains(grid=lq.grid, K=K, u_ff=u_ff),
    )


@dataclass(frozen=True)
class RolloutResult:
    x_traj: Trajectory
    u_traj: Trajectory
    merit: float
    cost: float
    h_samples: np.ndarray
    g_samples: np.ndarray


def forward_rollout(
    ocp: OcpDefinition,
    policy: AffinePolicy,
    gamma: float,
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
    settings: SlqSettings,
) -> RolloutResult:
    """Roll the closed-loop dynamics under the affine policy from ocp.x0."""

    def flow(x, t):
        return ocp.model.flow(x, policy.control(x, t, gamma), t)

    x_traj = integrate_ode(flow, ocp.x0, ocp.horizon, settings.integrator)
    dx = x_traj.values - policy.x_nom.values
    u_nodes = (
        policy.u_nom.values
        + gamma * policy.u_ff
        + np.einsum("nij,nj->ni", policy.K, dx)
    )
    u_traj = Trajectory(ocp.horizon, u_nodes)
    merit, cost, h_all, g_all = evaluate_merit(ocp, x_traj, u_traj, nu, strategy)
    return RolloutResult(
        x_traj=x_traj, u_traj=u_traj, merit=merit, cost=cost,
        h_samples=h_all, g_samples=g_all,
    )


def line_search(
    ocp: OcpDefinition,
    policy: AffinePolicy,
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
    settings: SlqSettings,
    merit0: float,
    expected_decrease: float,
) -> tuple[float, RolloutResult | None, bool]:
    """Armijo-Goldstein backtracking on the feedforward scaling gamma.

    Tries gamma in {1, c, c^2, ...} and accepts the first trial with
    merit(gamma) <= merit0 - sigma * gamma * expected_decrease. On total
    failure returns gamma = 0 with the flag cleared; the caller keeps the
    previous nominal in that case.
    """
    gamma = 1.0
    for _ in range(settings.max_backtracks + 1):
        try:
            rollout = forward_rollout(ocp, policy, gamma, nu, strategy, settings)
        except IntegrationError:
            rollout = None
        if rollout is not None and rollout.merit <= merit0 - (
            settings.armijo_sigma * gamma * expected_decrease
        ):
            return gamma, rollout, True
        gamma *= settings.backtrack_factor
    return 0.0, None, False


def slq_iterate(
    ocp: OcpDefinition,
    nominal: tuple[Trajectory, Trajectory],
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
    settings: SlqSettings,
) -> IterateResult:
    """One full inner-loop pass: quadratize, project, regularize, solve, search."""
    t_start = time.perf_counter()
    x_nom, u_nom = nominal
    merit0, _, _, _ = evaluate_merit(ocp, x_nom, u_nom, nu, strategy)

    lq = quadratize(
        ocp, nominal, nu, strategy,
        exact_constraint_hessian=settings.exact_constraint_hessian,
    )
    lq_w, recons = project_lq_trajectory(lq)
    lq_w, reg_shift = regularize(lq_w, settings.eps_min)
    _, gains = backward_riccati(lq_w, settings.riccati, settings.s_norm_cap)

    w_energy = np.einsum("ni,nij,nj->n", gains.u_ff, lq_w.R, gains.u_ff)
    expected_decrease = float(np.trapezoid(w_energy, lq.grid.nodes))

    if recons is not None:
        K = np.empty_like(gains.K)
        u_ff = np.empty_like(gains.u_ff)
        for i, recon in enumerate(recons):
            K[i], u_ff[i] = recon.rebuild(gains.K[i], gains.u_ff[i])
    else:
        K, u_ff = gains.K, gains.u_ff

    policy = AffinePolicy(
        grid=ocp.horizon, K=K, u_ff=u_ff, x_nom=x_nom, u_nom=u_nom, gamma=1.0
    )
    gamma, rollout, ok = line_search(
        ocp, policy, nu, strategy, settings, merit0, expected_decrease
    )
    if rollout is None:
        merit, cost, h_all, g_all = evaluate_merit(ocp, x_nom, u_nom, nu, strategy)
        x_new, u_new = x_nom, u_nom
    else:
        merit, cost = rollout.merit, rollout.cost
        h_all, g_all = rollout.h_samples, rollout.g_samples
        x_new, u_new = rollout.x_traj, rollout.u_traj

    stats = IterationStats(
        merit=merit,
        cost=cost,
        violation_l2=integrated_violation(ocp.horizon.nodes, h_all),
        eq_residual_inf=float(np.max(np.abs(g_all))) if g_all.size else 0.0,
        gamma=gamma,
        ff_norm=float(np.max(np.abs(u_ff))),
        reg_shift=reg_shift,
        r_condition=hessian_condition(lq_w.R),
        wall_ms=(time.perf_counter() - t_start) * 1e3,
        line_search_ok=ok,
    )
    return IterateResult(
        x_nom=x_new,
        u_nom=u_new,
        policy=replace(policy, gamma=gamma),
        stats=stats,
    )


def write_iteration_log(path: str, stats: Sequence[IterationStats]) -> None:
    """Append inner-loop rows as CSV (iteration, merit, cost, violation, ...)."""
    import csv as _csv
    import os

    new_file = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = _csv.writer(fh)
        if new_file:
            writer.writerow(
                ["iteration", "merit", "cost", "violation_l2", "gamma", "shift", "ms"]
            )
        for i, st in enumerate(stats):
            writer.writerow(
                [i, st.merit, st.cost, st.violation_l2, st.gamma, st.reg_shift,
                 st.wall_ms]
            )


def solve(
    ocp: OcpDefinition,
    nu: Trajectory | None,
    strategy: PenaltyStrategy | None,
    settings: SlqSettings,
    max_iters: int = 10,
    tol: float = 1e-6,
    u_init: Trajectory | None = None,
    log_path: str | None = None,
) -> Solution:
    """Repeat slq_iterate until gamma * feedforward norm drops below tol.

    The initial nominal state trajectory is rolled out from ocp.x0 under
    u_init (zeros when omitted).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if u_init is None:
        u_init = Trajectory.constant(ocp.horizon, np.zeros(ocp.model.input_dim))
    x_nom = roll_nominal(ocp, u_init, settings)
    u_nom = u_init
    history: list[IterationStats] = []
    policy = None
    converged = False
    for _ in range(max_iters):
        result = slq_iterate(ocp, (x_nom, u_nom), nu, strategy, settings)
        x_nom, u_nom, policy = result.x_nom, result.u_nom, result.policy
        history.append(result.stats)
        if result.stats.gamma * result.stats.ff_norm < tol:
            converged = True
            break
    if log_path is not None:
        write_iteration_log(log_path, history)
    return Solution(
        x_nom=x_nom,
        u_nom=u_nom,
        policy=policy,
        stats=tuple(history),
        converged=converged,
    )
