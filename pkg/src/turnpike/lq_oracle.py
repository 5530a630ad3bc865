"""Exact linear-quadratic machinery.

This module is the independent reference for every derived benchmark value:
an algebraic Riccati solver (Newton-Kleinman, with all Lyapunov equations
eliminated densely over the n^2 unknowns), the closed-form static solution of
the LQ steady problem, and the quadratic value function.  It deliberately
shares no solver code with the transcription side of the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceError, DegenerateProblemError,
                     StabilizabilityError, UnsupportedCaseError)
from .model import LinearizationData, kalman_rank
from .static_opt import StaticSolution

_ARE_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class LqProblem:
    """min integral of (y-y_target)' Q (y-y_target) + (u-u_target)' R (u-u_target),
    dynamics dy/dt = A y + B u."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    y_target: np.ndarray | None = None  # None means the origin
    u_target: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0]
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        p = B.shape[1]
        Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        R = np.asarray(self.R, dtype=float).reshape(p, p)
        yt = (np.zeros(n) if self.y_target is None
              else np.asarray(self.y_target, dtype=float).reshape(n))
        ut = (np.zeros(p) if self.u_target is None
              else np.asarray(self.u_target, dtype=float).reshape(p))
        for name, M in (("Q", Q), ("R", R)):
            if not np.allclose(M, M.T, atol=1e-12, rtol=0.0):
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() < 1e-10:
            raise ValueError("R must be positive definite")
        if not kalman_rank(LinearizationData(A=A, B=B,
                                             cost_grad_y=np.zeros(n),
                                             cost_grad_u=np.zeros(p))):
            raise ValueError("(A, B) must satisfy the Kalman rank condition")
        for field_name, value in (("A", A), ("B", B), ("Q", Q), ("R", R),
                                  ("y_target", yt), ("u_target", ut)):
            object.__setattr__(self, field_name, value)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    P: np.ndarray            # stabilizing solution, symmetric
    closed_loop: np.ndarray  # A - B R^-1 B' P
    residual: float          # Frobenius norm of the ARE residual


def solve_lyapunov(M: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve M' X + X M = C by dense elimination over the n^2 unknowns.

    Row-major vectorization: vec(M' X) = kron(M', I) vec(X) and
    vec(X M) = kron(I, M') vec(X).
    """
    n = M.shape[0]
    eye = np.eye(n)
    K = np.kron(M.T, eye) + np.kron(eye, M.T)
    try:
        x = np.linalg.solve(K, C.reshape(n * n))
    except np.linalg.LinAlgError as exc:
        raise DegenerateProblemError(f"singular Lyapunov system: {exc}") from exc
    X = x.reshape(n, n)
    return 0.5 * (X + X.T) if np.allclose(C, C.T, atol=0.0, rtol=1e-12) else X


def is_hurwitz(M: np.ndarray) -> bool:
    """Lyapunov stability test: M' X + X M = -I has a positive definite solution
    iff the spectrum of M lies in the open left half-plane."""
    n = M.shape[0]
    try:
        X = solve_lyapunov(M, -np.eye(n))
    except DegenerateProblemError:
        return False
    # confirm the solve (a near-singular system can return garbage quietly)
    if np.max(np.abs(M.T @ X + X @ M + np.eye(n))) > 1e-6:
        return False
    try:
        np.linalg.cholesky(0.5 * (X + X.T))
    except np.linalg.LinAlgError:
        return False
    return True


def _stabilizing_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Initial gain with A - B K Hurwitz, by a coarse pole shift.

    Shift A by beta = 1 + ||A||_F so every eigenvalue has positive real part,
    solve (A+beta I) W + W (A+beta I)' = 2 B B', and take K = B' W^-1; then
    (A-BK) W + W (A-BK)' = -2 beta W < 0, so A - BK is Hurwitz.
    """
    n = A.shape[0]
    if is_hurwitz(A):
        return np.zeros((B.shape[1], n))
    beta = 1.0 + float(np.linalg.norm(A, "fro"))
    shifted = A + beta * np.eye(n)
    W = solve_lyapunov(shifted.T, 2.0 * B @ B.T)
    try:
        np.linalg.cholesky(0.5 * (W + W.T))
        K = np.linalg.solve(W.T, B).T
    except np.linalg.LinAlgError as exc:
        raise StabilizabilityError(
            "could not construct a stabilizing initial gain "
            "(controllability Gramian surrogate not positive definite)") from exc
    if not is_hurwitz(A - B @ K):
        raise StabilizabilityError("pole-shift gain failed to stabilize A - BK")
    return K


def _are_residual(lq: LqProblem, P: np.ndarray) -> float:
    Rinv_Bt = np.linalg.solve(lq.R, lq.B.T)
    res = lq.A.T @ P + P @ lq.A - P @ lq.B @ Rinv_Bt @ P + lq.Q
    return float(np.linalg.norm(res, "fro"))


def solve_are(lq: LqProblem, max_iterations: int = 100) -> RiccatiSolution:
    """Stabilizing ARE solution by Newton-Kleinman iteration.

    Starting from a stabilizing gain K, each step solves the Lyapunov
    equation (A-BK)' P + P (A-BK) = -(Q + K' R K) and refreshes
    K = R^-1 B' P.  Quadratically convergent; every iterate keeps the
    closed loop Hurwitz.
    """
    A, B, Q, R = lq.A, lq.B, lq.Q, lq.R
    K = _stabilizing_gain(A, B)
    P = np.zeros_like(A)
    residual = np.inf
    for _ in range(max_iterations):
        M = A - B @ K
        P = solve_lyapunov(M, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        K = np.linalg.solve(R, B.T @ P)
        residual = _are_residual(lq, P)
        if residual <= _ARE_TOLERANCE:
            break
    if residual > _ARE_TOLERANCE:
        raise ConvergenceError(
            f"Newton-Kleinman stalled at residual {residual:.3e}", residual)
    closed_loop = A - B @ np.linalg.solve(R, B.T @ P)
    if not is_hurwitz(closed_loop):
        raise ConvergenceError(
            "Riccati iterate converged to a non-stabilizing solution", residual)
    return RiccatiSolution(P=P, closed_loop=closed_loop, residual=residual)


def lq_static(lq: LqProblem) -> StaticSolution:
    """Exact static solution by direct elimination of the linear KKT system.

    Stationarity uses the same sign convention as the Newton solver:
    -grad f0 + (partial f)' lambda = 0 with f0 the quadratic cost and
    f(y,u) = A y + B u.
    """
    n, p = lq.state_dim, lq.control_dim
    A, B, Q, R = lq.A, lq.B, lq.Q, lq.R
    KKT = np.zeros((2 * n + p, 2 * n + p))
    rhs = np.zeros(2 * n + p)
    KKT[:n, :n] = -2.0 * Q
    KKT[:n, n + p:] = A.T
    rhs[:n] = -2.0 * Q @ lq.y_target
    KKT[n:n + p, n:n + p] = -2.0 * R
    KKT[n:n + p, n + p:] = B.T
    rhs[n:n + p] = -2.0 * R @ lq.u_target
    KKT[n + p:, :n] = A
    KKT[n + p:, n:n + p] = B
    try:
        sol = np.linalg.solve(KKT, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateProblemError(f"singular LQ KKT system: {exc}") from exc
    y_bar, u_bar, lam = sol[:n], sol[n:n + p], sol[n + p:]
    dy, du = y_bar - lq.y_target, u_bar - lq.u_target
    v_bar = float(dy @ Q @ dy + du @ R @ du)
    residual = float(np.max(np.abs(KKT @ sol - rhs)))
    return StaticSolution(y_bar=y_bar, u_bar=u_bar, lambda_bar=lam,
                          v_bar=v_bar, kkt_residual=residual,
                          interior_margin=np.inf)


def lq_value(p, static: StaticSolution, x) -> float:
    """Quadratic infinite-horizon value (x - y_bar)' P (x - y_bar).

    ``p`` is a :class:`RiccatiSolution` or the bare matrix P.  Valid only
    when the static multiplier vanishes; with lambda_bar != 0 the exact
    value picks up cross terms this module does not implement, so the
    caller is pointed at the numerical estimator instead.
    """
    if float(np.max(np.abs(static.lambda_bar))) > 1e-10:
        raise UnsupportedCaseError(
            "quadratic value form requires lambda_bar = 0; "
            "use the infinite-horizon estimator for this problem")
    P = np.asarray(getattr(p, "P", p), dtype=float)
    dx = np.atleast_1d(np.asarray(x, dtype=float)) - static.y_bar
    return float(dx @ P @ dx)


def power_iteration_bound(M: np.ndarray, iterations: int = 100,
                          seed: int = 0) -> float:
    """Dominant-eigenvalue magnitude estimate by plain power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    ratio = 0.0
    for _ in range(iterations):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        ratio = norm
        v = w / norm
    return float(ratio)
