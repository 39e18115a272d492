"""Time grids, sampled trajectories, and ODE integration.

These containers are shared by every solver stage: nominal state/input
trajectories, multiplier estimates, and Riccati solutions all live on a
common time grid and are interpolated piecewise-linearly between nodes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class IntegrationError(RuntimeError):
    """Base class for ODE integration failures."""


class StepLimitError(IntegrationError):
    """The integrator exhausted its step budget (stiff or diverging flow)."""


class NonFiniteStateError(IntegrationError):
    """The integrated state left the finite domain (NaN or inf)."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time stamps spanning a horizon [t0, tf]."""

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a time grid needs at least 2 one-dimensional nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("time grid nodes must be finite")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("time grid nodes must be strictly increasing")
        nodes = nodes.copy()
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, t0: float, tf: float, n_nodes: int) -> "TimeGrid":
        return cls(np.linspace(float(t0), float(tf), int(n_nodes)))

    @property
    def t0(self) -> float:
        return float(self.nodes[0])

    @property
    def tf(self) -> float:
        return float(self.nodes[-1])

    @property
    def span(self) -> float:
        return self.tf - self.t0

    def __len__(self) -> int:
        return self.nodes.size

    def shifted(self, dt: float) -> "TimeGrid":
        return TimeGrid(self.nodes + float(dt))


@dataclass(frozen=True)
class Trajectory:
    """One fixed-dimension vector per grid node, interpolated linearly.

    Queries outside [t0, tf] clamp to the nearest endpoint: the MPC shift
    naturally asks for values slightly beyond a stale horizon.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] != len(self.grid):
            raise ValueError(
                f"got {values.shape[0]} value rows for {len(self.grid)} grid nodes"
            )
        if values.shape[1] == 0:
            raise ValueError("trajectory values must have at least one dimension")
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: TimeGrid, value: Sequence[float]) -> "Trajectory":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (len(grid), 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Piecewise-linear value at time t, clamped to the grid range."""
        return self.at_times(np.asarray([t]))[0]

    def at_times(self, times: np.ndarray) -> np.ndarray:
        """Vectorized interpolation: returns an array of shape (len(times), dim)."""
        return interp_rows(self.grid.nodes, self.values, np.asarray(times, dtype=float))

    def __call__(self, t: float) -> np.ndarray:
        return self.at(t)


def interp_rows(nodes: np.ndarray, rows: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Linearly interpolate stacked per-node arrays along their first axis.

    ``rows`` may have any shape (n_nodes, ...); out-of-range times clamp to
    the first/last row. Used for vector trajectories and stacked gain/LQ data.
    """
    times = np.clip(times, nodes[0], nodes[-1])
    hi = np.searchsorted(nodes, times, side="left")
    hi = np.clip(hi, 1, nodes.size - 1)
    lo = hi - 1
    denom = nodes[hi] - nodes[lo]
    w = (times - nodes[lo]) / denom
    w = w.reshape(w.shape + (1,) * (rows.ndim - 1))
    return (1.0 - w) * rows[lo] + w * rows[hi]


def interp_single(nodes: np.ndarray, rows: np.ndarray, t: float) -> np.ndarray:
    """Scalar-time fast path of :func:`interp_rows` for integration hot loops."""
    if t <= nodes[0]:
        return rows[0]
    if t >= nodes[-1]:
        return rows[-1]
    hi = int(np.searchsorted(nodes, t, side="left"))
    lo = hi - 1
    w = (t - nodes[lo]) / (nodes[hi] - nodes[lo])
    return (1.0 - w) * rows[lo] + w * rows[hi]


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Functional alias for :meth:`Trajectory.at`."""
    return traj.at(t)


def shift_and_extrapolate(traj: Trajectory, dt: float) -> Trajectory:
    """Shift a trajectory forward in time by dt, holding the final value on the tail.

    The new grid spans [t0+dt, tf+dt]; values on the overlap are interpolated
    from the input and the uncovered tail keeps the last node value constant.
    """
    if dt < 0.0:
        raise ValueError(f"shift dt must be non-negative, got {dt}")
    new_grid = traj.grid.shifted(dt)
    # Clamping interpolation realizes the constant-hold tail rule directly.
    values = traj.at_times(new_grid.nodes)
    return Trajectory(new_grid, values)


@dataclass(frozen=True)
class IntegratorSettings:
    """Step-size policy for the forward and backward integrations.

    mode ``"rk4"`` marches with fixed substeps of at most ``step`` seconds;
    mode ``"rk45"`` is an embedded Dormand-Prince 4(5) pair with PI step
    control holding the per-step local error below abs_tol + rel_tol*|x|.
    """

    mode: str = "rk45"
    step: float = 1e-2
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    max_steps: int = 100_000

    def __post_init__(self) -> None:
        if self.mode not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator mode {self.mode!r}")
        if self.step <= 0.0:
            raise ValueError("fixed step must be positive")
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


# Dormand-Prince 4(5) tableau; row 7 doubles as the 5th-order solution (FSAL).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    ]
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_E = _DP_B5 - _DP_B4


class _Budget:
    """Mutable step counter shared across one integrate_ode call."""

    def __init__(self, max_steps: int) -> None:
        self.left = max_steps

    def spend(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise StepLimitError(
                "integrator exhausted its step budget; the flow is likely stiff "
                "or diverging"
            )


def _check_finite(x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError("integrated state became non-finite")
    return x


def _rk4_span(
    flow: Callable[[np.ndarray, float], np.ndarray],
    x: np.ndarray,
    t0: float,
    t1: float,
    max_step: float,
    budget: _Budget,
) -> np.ndarray:
    span = t1 - t0
    n_sub = max(1, int(np.ceil(abs(span) / max_step - 1e-12)))
    h = span / n_sub
    t = t0
    for _ in range(n_sub):
        budget.spend()
        k1 = flow(x, t)
        k2 = flow(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = flow(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = flow(x + h * k3, t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        _check_finite(x)
    return x


def _rk45_span(
    flow: Callable[[np.ndarray, float], np.ndarray],
    x: np.ndarray,
    t0: float,
    t1: float,
    settings: IntegratorSettings,
    budget: _Budget,
    h_init: float,
    k_last: np.ndarray | None,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Adaptive march from t0 to t1; returns (state, last step size, FSAL stage)."""
    span = t1 - t0
    direction = 1.0 if span >= 0 else -1.0
    t = t0
    h = direction * min(abs(h_init), abs(span))
    err_prev = 1.0
    k = np.empty((7,) + x.shape)
    k[0] = flow(x, t) if k_last is None else k_last
    while direction * (t1 - t) > 1e-14 * max(1.0, abs(t1)):
        h = direction * min(abs(h), abs(t1 - t))
        budget.spend()
        for i in range(1, 6):
            k[i] = flow(x + h * (_DP_A[i, :i] @ k[:i]), t + _DP_C[i] * h)
        x5 = x + h * (_DP_B5[:6] @ k[:6])
        k[6] = flow(x5, t + h)
        err_vec = h * (_DP_E @ k.reshape(7, -1)).reshape(x.shape)
        scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t + h
            x = _check_finite(x5)
            k[0] = k[6]
            # PI controller (Hairer II.4): blend current and previous error.
            err = max(err, 1e-10)
            factor = 0.9 * err ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
            err_prev = err
            h *= min(5.0, max(0.2, factor))
        else:
            h *= max(0.2, 0.9 * err ** (-1.0 / 5.0))
    return x, h, k[0]


def integrate_ode(
    flow: Callable[[np.ndarray, float], np.ndarray],
    x0: Sequence[float],
    grid: TimeGrid,
    settings: IntegratorSettings,
) -> Trajectory:
    """Integrate ``dx/dt = flow(x, t)`` across the grid, sampling at the nodes.

    Raises :class:`StepLimitError` after ``max_steps`` total steps and
    :class:`NonFiniteStateError` as soon as the state stops being finite.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    _check_finite(x)
    nodes = grid.nodes
    out = np.empty((nodes.size, x.size))
    out[0] = x
    budget = _Budget(settings.max_steps)
    if settings.mode == "rk4":
        for i in range(nodes.size - 1):
            x = _rk4_span(flow, x, nodes[i], nodes[i + 1], settings.step, budget)
            out[i + 1] = x
    else:
        h = min(settings.step, grid.span / 10.0)
        k_last: np.ndarray | None = None
        for i in range(nodes.size - 1):
            x, h, k_last = _rk45_span(
                flow, x, nodes[i], nodes[i + 1], settings, budget, h, k_last
            )
            out[i + 1] = x
    return Trajectory(grid, out)


def to_csv(traj: Trajectory, path: str, names: Sequence[str] | None = None,
           header_comment: str | None = None) -> None:
    """Write a trajectory as CSV: time first, then one column per vector entry."""
    if names is None:
        names = [f"v{i}" for i in range(traj.dim)]
    if len(names) != traj.dim:
        raise ValueError("one column name per vector entry is required")
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["time", *names])
        for t, row in zip(traj.grid.nodes, traj.values):
            writer.writerow([repr(float(t)), *(repr(float(v)) for v in row)])


def from_csv(path: str) -> tuple[Trajectory, list[str]]:
    """Read a trajectory written by :func:`to_csv`; returns (trajectory, names)."""
    with open(path, "r", newline="") as fh:
        text = "\n".join(line for line in fh.read().splitlines()
                         if not line.startswith("#"))
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows)
    return Trajectory(TimeGrid(data[:, 0]), data[:, 1:]), header[1:]
