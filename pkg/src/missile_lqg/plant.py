"""Canard missile pitch model, its integrator-augmented form, and SISO analysis."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import DegenerateNumerator, DimensionMismatch, InvalidParams, NotSISO


@dataclass(frozen=True)
class MissileParams:
    """Aerodynamic derivatives and seeker parameters of the canard missile.

    Defaults are the typical airframe values with the nominal simulation point
    ``h = 0.5 s`` and ``delta_M_alpha = 0``.
    """

    Z_alpha: float = -2.7
    Z_delta: float = 0.27
    M_alpha: float = -5.5
    M_q: float = -0.4
    M_delta: float = -19.0
    tau_s: float = 0.05
    h: float = 0.5
    delta_M_alpha: float = 0.0

    def validate(self) -> "MissileParams":
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise InvalidParams(f"{f.name} must be finite, got {v!r}")
        if self.tau_s <= 0:
            raise InvalidParams(f"tau_s must be positive, got {self.tau_s}")
        return self

    def in_nominal_envelope(self) -> bool:
        return -1.0 <= self.delta_M_alpha <= 1.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MissileParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidParams(f"unknown MissileParams keys: {sorted(unknown)}")
        try:
            values = {k: float(v) for k, v in data.items()}
        except (TypeError, ValueError) as exc:
            raise InvalidParams(str(exc)) from exc
        return cls(**values)


def _rows(M, n: int, name: str) -> np.ndarray:
    """Coerce to an ``n``-row matrix; a flat vector of length ``n`` becomes a column."""
    M = nx.as_matrix(M, name)
    if M.shape[0] != n:
        if M.size != n:
            raise DimensionMismatch(f"{name} must have {n} rows, got shape {M.shape}")
        M = M.reshape(n, 1)
    return M


@dataclass(frozen=True)
class StateSpaceModel:
    """``x' = A x + B u + Gamma xi (+ E r)``, ``y = C x + D u``.

    ``E`` is the exogenous reference channel; only the integrator-augmented
    model carries one.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Gamma: np.ndarray
    state_labels: tuple = ()
    E: Optional[np.ndarray] = None

    def __post_init__(self):
        A = nx.as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B = _rows(self.B, n, "B")
        C = nx.as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {n}")
        D = nx.as_matrix(self.D, "D")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        G = _rows(self.Gamma, n, "Gamma")
        labels = tuple(self.state_labels) or tuple(f"x{i + 1}" for i in range(n))
        if len(labels) != n:
            raise DimensionMismatch("state_labels length differs from state count")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "Gamma", G)
        object.__setattr__(self, "state_labels", labels)
        if self.E is not None:
            object.__setattr__(self, "E", _rows(self.E, n, "E"))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def is_siso(self) -> bool:
        return self.n_inputs == 1 and self.n_outputs == 1


@dataclass(frozen=True)
class TransferFunction:
    """Real rational function ``num(s) / den(s)`` with a monic denominator."""

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        den = nx.trim_poly(self.den, rtol=0.0)
        if np.all(den == 0):
            raise ValueError("denominator is identically zero")
        num = nx.trim_poly(self.num, rtol=0.0) / den[0]
        den = den / den[0]
        if num.size > den.size:
            raise ValueError("improper transfer function")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        return nx.polyval(self.num, s) / nx.polyval(self.den, s)

    @property
    def order(self) -> int:
        return self.den.size - 1

    def is_zero(self) -> bool:
        return bool(np.all(self.num == 0))

    def poles(self) -> np.ndarray:
        return nx.poly_roots(self.den) if self.order else np.zeros(0, complex)

    def zeros(self) -> np.ndarray:
        if self.is_zero():
            raise DegenerateNumerator("numerator is identically zero")
        if self.num.size < 2:
            return np.zeros(0, complex)
        return nx.poly_roots(self.num)

    def high_frequency_gain(self) -> float:
        return float(self.num[0])

    def to_dict(self) -> dict:
        return {"num": self.num.tolist(), "den": self.den.tolist()}


STATE_LABELS = ("alpha", "pitch_rate", "delta")


def build_missile_model(params: MissileParams = MissileParams()) -> StateSpaceModel:
    """Linearised short-period plus seeker model with states (alpha, q, delta)."""
    p = params.validate()
    A = np.array(
        [
            [p.Z_alpha, 1.0, p.Z_delta],
            [p.M_alpha + p.delta_M_alpha, p.M_q, p.M_delta],
            [0.0, p.h / p.tau_s, -1.0 / p.tau_s],
        ]
    )
    B = np.array([[0.0], [0.0], [1.0 / p.tau_s]])
    C = np.array([[1.0, 0.0, 0.0]])
    D = np.zeros((1, 1))
    Gamma = np.array([[0.0], [0.0], [1.0]])
    return StateSpaceModel(A, B, C, D, Gamma, STATE_LABELS)


def controllability_matrix(A, B) -> np.ndarray:
    A = nx.as_matrix(A)
    B = nx.as_matrix(B).reshape(A.shape[0], -1)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def reachability_ranks(sys: StateSpaceModel) -> tuple[int, int]:
    """(controllability rank, observability rank)."""
    ctrb = controllability_matrix(sys.A, sys.B)
    obsv = controllability_matrix(sys.A.T, sys.C.T).T
    return nx.matrix_rank(ctrb), nx.matrix_rank(obsv)


def ss_to_tf(sys: StateSpaceModel, input_index: int = 0, output_index: int = 0) -> TransferFunction:
    """SISO channel transfer function via the Faddeev-LeVerrier adjugate."""
    den, adj = nx.char_poly(sys.A, return_adjugate=True)
    b = sys.B[:, input_index]
    c = sys.C[output_index, :]
    num = np.concatenate([[0.0], [c @ M @ b for M in adj]])
    num = num + sys.D[output_index, input_index] * den
    num_scale = max(nx.max_norm(num), nx.max_norm(c) * nx.max_norm(b))
    if nx.max_norm(num) <= 1e-13 * max(num_scale, 1e-300):
        num = np.zeros(1)
    else:
        # Leading coefficients at round-off level relative to the rest.
        num = nx.trim_poly(num, rtol=1e-11)
    return TransferFunction(num, den)


def state_space_resolvent(sys: StateSpaceModel, s: complex, input_index: int = 0,
                          output_index: int = 0) -> complex:
    """Pointwise ``C (sI - A)^-1 B + D`` by a complex linear solve."""
    n = sys.n_states
    x = np.linalg.solve(s * np.eye(n) - sys.A, sys.B[:, input_index].astype(complex))
    return complex(sys.C[output_index] @ x + sys.D[output_index, input_index])


def system_zeros(sys: StateSpaceModel) -> np.ndarray:
    if not sys.is_siso():
        raise NotSISO("system_zeros requires a SISO model")
    return ss_to_tf(sys).zeros()


def augment_with_integrator(sys: StateSpaceModel) -> StateSpaceModel:
    """Append ``x_i' = r - C x``; the reference enters through ``E = [0; 1]``."""
    if not sys.is_siso():
        raise NotSISO("integrator augmentation requires a SISO plant")
    if np.any(sys.D != 0):
        raise DimensionMismatch("integrator augmentation requires D = 0")
    n = sys.n_states
    A = np.block([[sys.A, np.zeros((n, 1))], [-sys.C, np.zeros((1, 1))]])
    B = np.vstack([sys.B, np.zeros((1, 1))])
    C = np.hstack([sys.C, np.zeros((1, 1))])
    Gamma = np.vstack([sys.Gamma, np.zeros((1, sys.Gamma.shape[1]))])
    E = np.zeros((n + 1, 1))
    E[n, 0] = 1.0
    return StateSpaceModel(A, B, C, sys.D, Gamma, sys.state_labels + ("x_i",), E)


def series(first: StateSpaceModel, second: StateSpaceModel) -> StateSpaceModel:
    """``second`` driven by the output of ``first`` (SISO, realised in state space)."""
    n1, n2 = first.n_states, second.n_states
    A = np.block(
        [[first.A, np.zeros((n1, n2))], [second.B @ first.C, second.A]]
    )
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    Gamma = np.zeros((n1 + n2, 1))
    return StateSpaceModel(A, B, C, D, Gamma)


def from_matrices(A, B, C, D=None, Gamma=None) -> StateSpaceModel:
    A = nx.as_matrix(A)
    n = A.shape[0]
    B = _rows(B, n, "B")
    C = nx.as_matrix(C, "C")
    if C.shape[1] != n and C.size == n:
        C = C.reshape(1, n)
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else D
    Gamma = np.zeros((n, 1)) if Gamma is None else Gamma
    return StateSpaceModel(A, B, C, D, Gamma)


def tf_to_ss(tf: TransferFunction) -> StateSpaceModel:
    """Controllable canonical realisation of a proper transfer function."""
    den = tf.den
    n = den.size - 1
    num = np.concatenate([np.zeros(den.size - tf.num.size), tf.num])
    d = num[0]
    if n == 0:
        raise ValueError("static gain has no state-space realisation here")
    strictly = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = strictly.reshape(1, n)
    return from_matrices(A, B, C, [[d]])


def tf_from_roots(gain: float, zeros: Sequence[complex], poles: Sequence[complex]) -> TransferFunction:
    return TransferFunction(gain * nx.poly_from_roots(zeros), nx.poly_from_roots(poles))
