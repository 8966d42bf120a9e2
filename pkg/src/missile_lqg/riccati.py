"""Continuous algebraic Riccati equations by Newton-Kleinman iteration.

The same solver produces the LQR gain (control ARE) and, through duality, the
Kalman gain (filter ARE).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import (
    InvalidParams,
    NoConvergence,
    NotHurwitz,
    NotStabilizable,
    SingularMatrix,
    Uncontrollable,
    Unobservable,
)
from .plant import StateSpaceModel, controllability_matrix

logger = logging.getLogger(__name__)

MAX_NEWTON_ITER = 50
STEP_TOL = 1e-10
STAGNATION_TOL = 1e-6
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class NoiseSpec:
    """Process intensity ``Xi``, measurement intensity ``Theta`` and LTR factor ``q``.

    The filter is designed with the inflated process intensity ``q * Xi``.
    """

    Xi: float = 1e-3
    Theta: float = 1e-7
    q: float = 1.0

    def __post_init__(self):
        if not self.Theta > 0:
            raise InvalidParams(f"Theta must be positive, got {self.Theta}")
        if not self.Xi >= 0:
            raise InvalidParams(f"Xi must be non-negative, got {self.Xi}")
        if not self.q >= 0:
            raise InvalidParams(f"q must be non-negative, got {self.q}")

    @property
    def design_Xi(self) -> float:
        return self.q * self.Xi

    def with_q(self, q: float) -> "NoiseSpec":
        return NoiseSpec(self.Xi, self.Theta, q)

    def to_dict(self) -> dict:
        return {"Xi": self.Xi, "Theta": self.Theta, "q": self.q}


@dataclass(frozen=True)
class WeightSpec:
    """LQR state weight ``Q`` and scalar control weight ``R`` (no cross term)."""

    Q: np.ndarray
    R: float = 1.0

    def __post_init__(self):
        Q = nx.as_matrix(self.Q, "Q")
        if Q.shape[0] != Q.shape[1]:
            raise InvalidParams(f"Q must be square, got {Q.shape}")
        if nx.max_norm(Q - Q.T) > 1e-12 * (1 + nx.max_norm(Q)):
            raise InvalidParams("Q must be symmetric")
        if Q.size and np.min(np.linalg.eigvalsh(Q)) < -1e-9:
            raise InvalidParams("Q must be positive semi-definite")
        if not self.R > 0:
            raise InvalidParams(f"R must be positive, got {self.R}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", float(self.R))

    @classmethod
    def diagonal(cls, q_diag: Sequence[float], R: float) -> "WeightSpec":
        return cls(np.diag(np.asarray(q_diag, dtype=float)), R)

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "R": self.R}


@dataclass(frozen=True)
class GainSet:
    """Control, filter and (optional) integral gains with their provenance."""

    K_c: np.ndarray
    K_f: np.ndarray
    K_i: Optional[np.ndarray] = None
    weights: Optional[WeightSpec] = None
    noise: Optional[NoiseSpec] = None
    Q_i: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"K_c": self.K_c.tolist(), "K_f": self.K_f.tolist(),
               "K_i": None if self.K_i is None else self.K_i.tolist()}
        if self.weights is not None:
            out["weights"] = self.weights.to_dict()
        if self.noise is not None:
            out["noise"] = self.noise.to_dict()
        if self.Q_i is not None:
            out["Q_i"] = self.Q_i
        return out


def default_poles(n: int) -> list[float]:
    return [-(k + 2.0) for k in range(n)]


def stabilizing_gain(A, B, poles: Optional[Sequence[complex]] = None) -> np.ndarray:
    """Ackermann pole placement for a single-input pair."""
    A = nx.as_matrix(A, "A")
    n = A.shape[0]
    B = nx.as_matrix(B, "B").reshape(n, -1)
    if B.shape[1] != 1:
        raise ValueError("Ackermann's formula needs a single input")
    poles = default_poles(n) if poles is None else list(poles)
    if len(poles) != n:
        raise ValueError(f"need {n} poles, got {len(poles)}")
    if any(complex(p).real >= 0 for p in poles):
        raise ValueError("requested poles must lie in the open left half-plane")
    ctrb = controllability_matrix(A, B)
    if nx.matrix_rank(ctrb) < n:
        raise Uncontrollable("controllability matrix is rank deficient")
    phi = nx.poly_from_roots(poles)
    phi_A = np.zeros((n, n))
    for c in phi:
        phi_A = phi_A @ A + c * np.eye(n)
    e_last = np.zeros((n, 1))
    e_last[-1, 0] = 1.0
    # e_n^T C^-1 == (C^-T e_n)^T
    try:
        row = nx.lu_solve(ctrb.T, e_last).T
    except SingularMatrix as exc:
        raise Uncontrollable(str(exc)) from exc
    return row @ phi_A


def care_residual(A, B, Q, R, P) -> np.ndarray:
    Rinv = np.linalg.inv(np.atleast_2d(R))
    return A.T @ P + P @ A - P @ B @ Rinv @ B.T @ P + Q


def solve_care(A, B, Q, R, poles=None, return_history: bool = False):
    """Stabilising solution of ``A'P + PA - P B R^-1 B' P + Q = 0``.

    Newton-Kleinman: seed with an Ackermann gain, then alternate a Lyapunov solve
    for the current closed loop with the gain update ``K = R^-1 B' P``.

    Raises:
        NotStabilizable: the Ackermann seed could not be built.
        NoConvergence: iteration limit reached or final residual too large.
    """
    A = nx.as_matrix(A, "A")
    n = A.shape[0]
    B = nx.as_matrix(B, "B").reshape(n, -1)
    Q = nx.as_matrix(Q, "Q")
    R = nx.as_matrix(R, "R")
    Rinv = np.linalg.inv(R)
    try:
        K = stabilizing_gain(A, B, poles)
    except Uncontrollable as exc:
        raise NotStabilizable(str(exc)) from exc
    if not nx.is_hurwitz(A - B @ K):
        raise NotStabilizable("Ackermann seed does not stabilise the pair")

    history = []
    P_prev = None
    prev_step = math.inf
    for _ in range(MAX_NEWTON_ITER):
        Acl = A - B @ K
        try:
            P = nx.solve_lyapunov(Acl, Q + K.T @ R @ K)
        except (NotHurwitz, SingularMatrix) as exc:
            raise NoConvergence(f"Newton step lost stability: {exc}") from exc
        history.append(P)
        K = Rinv @ B.T @ P
        if P_prev is not None:
            step = nx.max_norm(P - P_prev) / (1 + nx.max_norm(P_prev))
            if step <= STEP_TOL:
                break
            # Round-off floor: steps already small and no longer shrinking.
            if step <= STAGNATION_TOL and step >= prev_step:
                break
            prev_step = step
        P_prev = P
    else:
        raise NoConvergence(f"no convergence in {MAX_NEWTON_ITER} Newton steps")

    res = nx.max_norm(care_residual(A, B, Q, R, P))
    if res > RESIDUAL_TOL * (1 + nx.max_norm(P)):
        raise NoConvergence(f"CARE residual {res:.3g} above tolerance")
    logger.debug("CARE solved in %d Newton steps, residual %.2e", len(history), res)
    if return_history:
        return P, history
    return P


def lqr_gain(sys: StateSpaceModel, weights: WeightSpec) -> np.ndarray:
    """``K_c = R^-1 B' P_c`` for the feedback law ``u = -K_c x``."""
    if weights.Q.shape != sys.A.shape:
        raise InvalidParams(f"Q must be {sys.A.shape}, got {weights.Q.shape}")
    R = np.array([[weights.R]])
    P = solve_care(sys.A, sys.B, weights.Q, R)
    return sys.B.T @ P / weights.R


def kalman_gain(sys: StateSpaceModel, noise: NoiseSpec) -> np.ndarray:
    """``K_f = P_f C' Theta^-1`` from the dual ARE with process intensity ``q * Xi``."""
    return filter_covariance(sys, noise) @ sys.C.T / noise.Theta


def filter_covariance(sys: StateSpaceModel, noise: NoiseSpec) -> np.ndarray:
    obsv = controllability_matrix(sys.A.T, sys.C.T)
    if nx.matrix_rank(obsv) < sys.n_states:
        raise Unobservable("observability matrix is rank deficient")
    W = noise.design_Xi * (sys.Gamma @ sys.Gamma.T)
    return solve_care(sys.A.T, sys.C.T, W, np.array([[noise.Theta]]))
