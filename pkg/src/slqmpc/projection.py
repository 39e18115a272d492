"""Null-space projection of linearized state-input equality constraints.

Any input increment satisfying C dx + D du + e = 0 decomposes as
du = -D+ (C dx + e) + N w with N = I - D+ D, so the Riccati pass can
optimize the free directions w while the reconstruction map keeps the
linearized equalities satisfied exactly for every (dx, w).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RankDeficiencyError(ValueError):
    """D lost full row rank: the equalities are inconsistent or redundant."""


@dataclass(frozen=True)
class LinearizedEquality:
    """g(x, u, t) = 0 linearized at a nominal point: C dx + D du + e = 0."""

    C: np.ndarray
    D: np.ndarray
    e: np.ndarray

    @property
    def n_eq(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class InputReconstruction:
    """Affine map (dx, w) -> du = F dx + m + N w restoring full input space."""

    F: np.ndarray
    m: np.ndarray
    N: np.ndarray

    def rebuild(self, K_w: np.ndarray, w_ff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Convert a gain/feedforward pair in w-space into input space."""
        return self.F + self.N @ K_w, self.m + self.N @ w_ff


def projection_terms(
    eq: LinearizedEquality, rank_tol: float = 1e-9
) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse and null-space projector of the input Jacobian D.

    Returns (D_pinv, N) with D @ D_pinv = I and D @ N = 0; N is symmetric
    and idempotent. Rank is decided by SVD with threshold rank_tol * s_max.
    """
    D = np.atleast_2d(np.asarray(eq.D, dtype=float))
    n_g, n_u = D.shape
    if n_g == 0:
        return np.zeros((n_u, 0)), np.eye(n_u)
    if n_g > n_u:
        raise RankDeficiencyError(
            f"{n_g} equalities on {n_u} inputs cannot have full row rank"
        )
    U, s, Vt = np.linalg.svd(D, full_matrices=False)
    if s[-1] <= rank_tol * s[0]:
        raise RankDeficiencyError(
            "input Jacobian of the equality constraints is rank deficient "
            f"(singular values {s})"
        )
    D_pinv = (Vt.T / s) @ U.T
    N = np.eye(n_u) - D_pinv @ D
    return D_pinv, N


def project_lq_subproblem(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    P: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    q0: float,
    eq: LinearizedEquality,
    rank_tol: float = 1e-9,
) -> tuple[dict, InputReconstruction]:
    """Substitute du = F dx + m + N w into one LQ node.

    Returns the node data expressed in (dx, w) plus the reconstruction map.
    The projected dynamics pick up an affine drift c = B m from the
    feasibility correction; the projected input Hessian is N R N plus an
    identity block on the complement of range(N), whose directions are
    decoupled from dynamics and cost and therefore never influence du.
    """
    n_u = B.shape[1]
    if eq.n_eq == 0:
        recon = InputReconstruction(
            F=np.zeros((n_u, A.shape[0])), m=np.zeros(n_u), N=np.eye(n_u)
        )
        node = dict(A=A, B=B, c=np.zeros(A.shape[0]), Q=Q, R=R, P=P, q=q, r=r, q0=q0)
        return node, recon
    D_pinv, N = projection_terms(eq, rank_tol)
    F = -D_pinv @ eq.C
    m = -D_pinv @ eq.e
    Rm_r = R @ m + r
    node = dict(
        A=A + B @ F,
        B=B @ N,
        c=B @ m,
        Q=Q + F.T @ R @ F + F.T @ P + P.T @ F,
        R=N @ R @ N + (np.eye(n_u) - N),
        P=N @ (R @ F + P),
        q=q + F.T @ Rm_r + P.T @ m,
        r=N @ Rm_r,
        q0=q0 + 0.5 * float(m @ R @ m) + float(r @ m),
    )
    return node, InputReconstruction(F=F, m=m, N=N)
