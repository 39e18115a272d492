"""Receding-horizon closed-loop simulation with the real-time iteration scheme.

Each MPC tick performs a single inner forward-backward pass (one Riccati
iteration) followed by a single dual update, then shifts the input and
multiplier trajectories forward. Only tick 0 runs multiple inner iterations
to escape the cold start. The plant and prediction model are identical, so
observed behavior is purely algorithmic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dual import DualRule, DualUpdateConfig, check_stability, initial_multipliers, \
    update_multiplier_trajectory
from .penalties import PenaltyStrategy
from .solver import (
    IntegrationError,
    OcpDefinition,
    SlqSettings,
    SolverError,
    Trajectory,
    integrated_violation,
    roll_nominal,
    slq_iterate,
    solve,
)
from .trajectory import IntegratorSettings, TimeGrid, shift_and_extrapolate

CompletionFn = Callable[[np.ndarray, np.ndarray], float | None]


class MpcAborted(RuntimeError):
    """Three consecutive solver failures stopped the closed loop."""


@dataclass(frozen=True)
class MpcConfig:
    """Closed-loop timing, strategy, and dual-update selection."""

    strategy: PenaltyStrategy
    dual_cfg: DualUpdateConfig
    mpc_rate: float = 100.0
    horizon: float = 3.0
    initial_solve_iters: int = 10
    plant_step: float = 1e-3
    sim_duration: float = 6.0
    grid_dt: float = 0.05
    solver: SlqSettings | None = None

    def __post_init__(self) -> None:
        if self.mpc_rate <= 0.0 or self.horizon <= 0.0 or self.sim_duration <= 0.0:
            raise ValueError("rates and durations must be positive")
        if self.plant_step > 1.0 / self.mpc_rate + 1e-12:
            raise ValueError("plant_step must not exceed the MPC period")
        if self.initial_solve_iters < 1:
            raise ValueError("initial_solve_iters must be at least 1")
        if self.solver is None:
            # Fixed-step RK4 at half the grid resolution for rollouts (the
            # closed-loop flow under feedback is stiffer than the open plant);
            # the Riccati pass is stiffer still and gets an adaptive
            # integrator with a bounded step budget so divergence surfaces as
            # step exhaustion.
            rollout = IntegratorSettings(mode="rk4", step=0.5 * self.grid_dt,
                                         max_steps=200_000)
            riccati = IntegratorSettings(mode="rk45", abs_tol=1e-6, rel_tol=1e-5,
                                         max_steps=20_000)
            object.__setattr__(
                self, "solver",
                SlqSettings(integrator=rollout, riccati_integrator=riccati),
            )

    @property
    def mpc_dt(self) -> float:
        return 1.0 / self.mpc_rate

    @property
    def n_nodes(self) -> int:
        return int(round(self.horizon / self.grid_dt)) + 1


@dataclass
class MpcMetrics:
    """Per-tick series plus the task-completion time.

    Arrays are aligned with the tick index; violation columns are measured
    over the predicted horizon of that tick, matching the per-iteration
    feasibility metric used for method comparison.
    """

    iteration: np.ndarray
    sim_time: np.ndarray
    cost: np.ndarray
    violation_l2: np.ndarray
    max_violation: np.ndarray
    gamma: np.ndarray
    solve_ms: np.ndarray
    riccati_passes: np.ndarray
    dual_updates: np.ndarray
    solver_failures: np.ndarray
    task_completion_time: float | None = None


@dataclass(frozen=True)
class MpcResult:
    metrics: MpcMetrics
    x_closed: Trajectory
    u_closed: Trajectory
    aborted: bool
    abort_reason: str | None
    warnings: tuple[str, ...]
    final_cost: float


def violation_l2(h_traj: Trajectory) -> float:
    """sqrt of the trapezoidal time-integral of the squared negative parts of h."""
    return integrated_violation(h_traj.grid.nodes, h_traj.values)


def _plant_step_rk4(model, policy, x: np.ndarray, t0: float, t1: float,
                    step: float) -> tuple[np.ndarray, list[tuple[float, np.ndarray, np.ndarray]]]:
    """March the plant under the time-varying policy, recording substep samples."""
    n_sub = max(1, int(round((t1 - t0) / step)))
    h = (t1 - t0) / n_sub
    samples = []
    t = t0
    for _ in range(n_sub):
        u_now = policy.control(x, t)
        samples.append((t, x.copy(), u_now))
        k1 = model.flow(x, u_now, t)
        k2 = model.flow(x + 0.5 * h * k1, policy.control(x + 0.5 * h * k1, t + 0.5 * h), t + 0.5 * h)
        k3 = model.flow(x + 0.5 * h * k2, policy.control(x + 0.5 * h * k2, t + 0.5 * h), t + 0.5 * h)
        k4 = model.flow(x + h * k3, policy.control(x + h * k3, t + h), t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if not np.all(np.isfinite(x)):
            raise IntegrationError("plant state became non-finite")
    return x, samples


def _h_nodes(cons, x_traj: Trajectory, u_traj: Trajectory) -> np.ndarray:
    out = np.zeros((len(x_traj.grid), cons.n_ineq))
    for i, t in enumerate(x_traj.grid.nodes):
        out[i] = cons.ineq(x_traj.values[i], u_traj.values[i], t)
    return out


def _policy_warm_start(model, policy, x0: np.ndarray, grid: TimeGrid,
                       settings) -> tuple[Trajectory, Trajectory]:
    """Roll the previous tick's policy from the new measured state.

    Evaluating the (absolute-time) policy on the advanced grid shifts the
    nominal forward and holds the terminal gains on the uncovered tail; the
    feedback term keeps the warm start bounded on unstable plants where an
    open-loop replay of the shifted inputs would diverge.
    """

    def flow(x, t):
        return model.flow(x, policy.control(x, t), t)

    x_nom = integrate_ode(flow, x0, grid, settings.integrator)
    u_vals = np.stack(
        [policy.control(x_nom.values[i], t) for i, t in enumerate(grid.nodes)]
    )
    return x_nom, Trajectory(grid, u_vals)


def run_mpc(
    ocp_template: OcpDefinition,
    config: MpcConfig,
    completion_fn: CompletionFn | None = None,
) -> MpcResult:
    """Simulate the closed loop from ocp_template.x0 for the configured duration.

    Tick 0 runs ``initial_solve_iters`` inner iterations; every later tick
    runs exactly one. A failed tick reuses the previous policy once; three
    consecutive failures abort the run (reported, not raised).
    """
    cfg = config
    strategy = cfg.strategy
    n_ticks = int(round(cfg.sim_duration * cfg.mpc_rate))
    model = ocp_template.model
    cons = ocp_template.constraints
    n_ineq = cons.n_ineq if cons is not None else 0
    warnings = tuple(check_stability(cfg.dual_cfg)) if strategy.uses_multipliers else ()

    grid = TimeGrid.uniform(0.0, cfg.horizon, cfg.n_nodes)
    u_traj = Trajectory.constant(grid, np.zeros(model.input_dim))
    nu_traj = initial_multipliers(cfg.dual_cfg.rule, grid, n_ineq,
                                  cfg.dual_cfg.nu_min) if n_ineq else None

    x_plant = np.asarray(ocp_template.x0, dtype=float).copy()
    policy = None
    consecutive_failures = 0
    aborted = False
    abort_reason = None

    cols = {name: np.zeros(n_ticks) for name in (
        "cost", "violation_l2", "max_violation", "gamma", "solve_ms",
        "riccati_passes", "dual_updates", "solver_failures")}
    closed_samples: list[tuple[float, np.ndarray, np.ndarray]] = []
    final_cost = float("nan")

    for k in range(n_ticks):
        t_k = k * cfg.mpc_dt
        grid_k = TimeGrid.uniform(t_k, t_k + cfg.horizon, cfg.n_nodes)
        ocp_k = ocp_template.with_window(grid_k, x_plant)
        t_tick = time.perf_counter()
        failed = False
        try:
            if k == 0:
                sol = solve(
                    ocp_k, nu_traj, strategy, cfg.solver,
                    max_iters=cfg.initial_solve_iters, tol=0.0, u_init=u_traj,
                )
                policy = sol.policy
                x_new, u_new = sol.x_nom, sol.u_nom
                last = sol.stats[-1]
                passes = len(sol.stats)
            else:
                x_nom = roll_nominal(ocp_k, u_traj, cfg.solver)
                res = slq_iterate(ocp_k, (x_nom, u_traj), nu_traj, strategy, cfg.solver)
                policy = res.policy
                x_new, u_new = res.x_nom, res.u_nom
                last = res.stats
                passes = 1
            consecutive_failures = 0
        except (SolverError, IntegrationError, np.linalg.LinAlgError) as exc:
            failed = True
            consecutive_failures += 1
            cols["solver_failures"][k] = 1.0
            if policy is None or consecutive_failures >= 3:
                aborted = True
                abort_reason = f"solver failed at tick {k}: {exc}"
            else:
                # Reuse the previous policy for one tick; shift the stale
                # trajectories so the next attempt starts from fresh time.
                x_new = shift_and_extrapolate(policy.x_nom, cfg.mpc_dt)
                u_new = shift_and_extrapolate(policy.u_nom, cfg.mpc_dt)
                last = None
                passes = 0

        if aborted:
            cols["solve_ms"][k] = (time.perf_counter() - t_tick) * 1e3
            break

        # Single outer-loop update per MPC call, from the new nominal.
        dual_updates = 0
        if n_ineq:
            h_vals = _h_nodes(cons, x_new, u_new)
            h_traj = Trajectory(u_new.grid, h_vals)
            if strategy.uses_multipliers and nu_traj is not None:
                nu_on_grid = nu_traj if np.array_equal(
                    nu_traj.grid.nodes, u_new.grid.nodes
                ) else Trajectory(u_new.grid, nu_traj.at_times(u_new.grid.nodes))
                nu_traj = update_multiplier_trajectory(nu_on_grid, h_traj, cfg.dual_cfg)
            dual_updates = 1
            cols["violation_l2"][k] = violation_l2(h_traj)
            cols["max_violation"][k] = max(0.0, float(np.max(-h_vals, initial=0.0)))
        else:
            dual_updates = 1

        if last is not None:
            cols["cost"][k] = last.cost
            cols["gamma"][k] = last.gamma
        else:
            cols["cost"][k] = float("nan")
            cols["gamma"][k] = 0.0
        cols["riccati_passes"][k] = passes
        cols["dual_updates"][k] = dual_updates
        final_cost = cols["cost"][k]

        # Drive the plant under the time-varying affine policy until the
        # next tick, then shift inputs and multipliers for the next window.
        x_plant, samples = _plant_step_rk4(
            model, policy, x_plant, t_k, t_k + cfg.mpc_dt, cfg.plant_step
        )
        closed_samples.extend(samples)
        u_traj = shift_and_extrapolate(u_new, cfg.mpc_dt)
        if nu_traj is not None:
            nu_traj = shift_and_extrapolate(nu_traj, cfg.mpc_dt)
        cols["solve_ms"][k] = (time.perf_counter() - t_tick) * 1e3

    n_done = len(closed_samples)
    if n_done == 0:
        times = np.array([0.0, cfg.plant_step])
        xs = np.tile(x_plant, (2, 1))
        us = np.zeros((2, model.input_dim))
    else:
        times = np.array([s[0] for s in closed_samples] + [closed_samples[-1][0] + cfg.plant_step])
        xs = np.vstack([np.array([s[1] for s in closed_samples]), x_plant[None, :]])
        us = np.vstack([np.array([s[2] for s in closed_samples]),
                        np.array(closed_samples[-1][2])[None, :]])
    x_closed = Trajectory(TimeGrid(times), xs)
    u_closed = Trajectory(TimeGrid(times), us)

    metrics = MpcMetrics(
        iteration=np.arange(n_ticks, dtype=float),
        sim_time=np.arange(n_ticks, dtype=float) * cfg.mpc_dt,
        task_completion_time=None,
        **cols,
    )
    if completion_fn is not None and not aborted:
        metrics.task_completion_time = completion_fn(times, xs)
    return MpcResult(
        metrics=metrics,
        x_closed=x_closed,
        u_closed=u_closed,
        aborted=aborted,
        abort_reason=abort_reason,
        warnings=warnings,
        final_cost=final_cost,
    )


@dataclass(frozen=True)
class MethodSummary:
    """Table-schema row for one method run."""

    label: str
    avg_solve_ms: float
    peak_solve_ms: float
    violation_mean: float
    violation_peak: float
    final_cost: float
    task_duration: float | None
    completed: bool
    aborted: bool
    solver_failures: int
    max_closed_loop_violation: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "avg_solve_ms": self.avg_solve_ms,
            "peak_solve_ms": self.peak_solve_ms,
            "violation_mean": self.violation_mean,
            "violation_peak": self.violation_peak,
            "final_cost": self.final_cost,
            "task_duration": self.task_duration,
            "completed": self.completed,
            "aborted": self.aborted,
            "solver_failures": self.solver_failures,
            "max_closed_loop_violation": self.max_closed_loop_violation,
        }


@dataclass(frozen=True)
class ComparisonReport:
    summaries: tuple[MethodSummary, ...]
    results: tuple[MpcResult, ...]
    labels: tuple[str, ...]

    def ordered_by_violation(self) -> list[MethodSummary]:
        return sorted(self.summaries, key=lambda s: s.violation_mean)


def closed_loop_violation(ocp: OcpDefinition, result: MpcResult) -> float:
    """Largest pointwise constraint violation along the applied trajectory."""
    cons = ocp.constraints
    if cons is None or cons.n_ineq == 0:
        return 0.0
    worst = 0.0
    xs, us = result.x_closed.values, result.u_closed.values
    for t, x, u in zip(result.x_closed.grid.nodes, xs, us):
        h = cons.ineq(x, u, float(t))
        worst = max(worst, float(np.max(-h, initial=0.0)))
    return worst


def compare_methods(
    ocp_template: OcpDefinition,
    configs: Sequence[tuple[str, MpcConfig]],
    completion_fn: CompletionFn | None = None,
) -> ComparisonReport:
    """Run several methods on the identical task and collect aligned metrics.

    Runs execute sequentially from the same initial state; per-method
    failures are recorded in the summaries rather than raised, so a partial
    comparison is still emitted.
    """
    if len(configs) < 2:
        raise ValueError("a comparison needs at least two method configs")
    summaries = []
    results = []
    labels = []
    for label, cfg in configs:
        res = run_mpc(ocp_template, cfg, completion_fn)
        m = res.metrics
        done = m.task_completion_time is not None
        ok_ticks = m.solve_ms[m.riccati_passes > 0]
        summaries.append(
            MethodSummary(
                label=label,
                avg_solve_ms=float(np.mean(ok_ticks)) if ok_ticks.size else float("nan"),
                peak_solve_ms=float(np.max(ok_ticks)) if ok_ticks.size else float("nan"),
                violation_mean=float(np.nanmean(m.violation_l2)),
                violation_peak=float(np.nanmax(m.violation_l2)),
                final_cost=res.final_cost,
                task_duration=m.task_completion_time,
                completed=done,
                aborted=res.aborted,
                solver_failures=int(np.sum(m.solver_failures)),
                max_closed_loop_violation=closed_loop_violation(ocp_template, res),
            )
        )
        results.append(res)
        labels.append(label)
    return ComparisonReport(
        summaries=tuple(summaries), results=tuple(results), labels=tuple(labels)
    )
