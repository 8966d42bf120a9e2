"""LQG, LQG/LTR and hybrid LQG-LTR-LQI controller assembly.

Sign convention throughout: the plant input is ``u = -K_c x_hat - K_i x_i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numerics as nx
from .errors import DimensionMismatch, MissingIntegralGain
from .plant import (
    StateSpaceModel,
    TransferFunction,
    augment_with_integrator,
    from_matrices,
    series,
    ss_to_tf,
)
from .riccati import GainSet, NoiseSpec, WeightSpec, kalman_gain, lqr_gain

DEFAULT_Q_I = 1.0


class ControllerKind(str, enum.Enum):
    LQG_REGULATOR = "LQG_REGULATOR"
    LQG_LTR = "LQG_LTR"
    HYBRID_SERVO = "HYBRID_SERVO"
    ONE_DOF = "ONE_DOF"


@dataclass(frozen=True)
class ControllerRealization:
    """Controller ``z' = A_k z + B_k v``, ``u = u_sign * (C_k z + D_k v)``.

    ``input_map`` names the entries of ``v``: ``"y"`` (measurement), ``"r"``
    (reference) or ``"e"`` (tracking error ``r - y``). ``n_estimator`` leading
    controller states are the plant-state estimate, when there is one.
    """

    A_k: np.ndarray
    B_k: np.ndarray
    C_k: np.ndarray
    D_k: np.ndarray
    input_map: tuple
    kind: ControllerKind
    u_sign: float = 1.0
    n_estimator: int = 0

    def __post_init__(self):
        n = self.A_k.shape[0]
        m = len(self.input_map)
        if self.B_k.shape != (n, m) or self.C_k.shape != (1, n) or self.D_k.shape != (1, m):
            raise DimensionMismatch("controller matrices are inconsistent with input_map")

    @property
    def order(self) -> int:
        return self.A_k.shape[0]

    def error_input(self) -> np.ndarray:
        """Input column seen by the controller for a unit error with ``y = -e, r = 0``."""
        col = np.zeros(len(self.input_map))
        for j, name in enumerate(self.input_map):
            if name == "y":
                col[j] = -1.0
            elif name == "e":
                col[j] = 1.0
        return col

    def one_dof(self) -> "ControllerRealization":
        """Equivalent single-input controller driven by ``e = r - y``."""
        col = self.error_input()
        B = (self.B_k @ col).reshape(-1, 1)
        D = (self.D_k @ col).reshape(1, 1)
        return ControllerRealization(
            self.A_k, B, self.u_sign * self.C_k, self.u_sign * D, ("e",),
            ControllerKind.ONE_DOF, 1.0, self.n_estimator,
        )

    def error_to_control_tf(self) -> TransferFunction:
        """e -> u transfer function of the 1-DOF equivalent."""
        k = self.one_dof()
        return ss_to_tf(from_matrices(k.A_k, k.B_k, k.C_k, k.D_k))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "input_map": list(self.input_map),
            "u_sign": self.u_sign,
            "A_k": self.A_k.tolist(),
            "B_k": self.B_k.tolist(),
            "C_k": self.C_k.tolist(),
            "D_k": self.D_k.tolist(),
            "tf_e_to_u": self.error_to_control_tf().to_dict(),
        }


@dataclass(frozen=True)
class ClosedLoop:
    """Plant plus controller with exogenous inputs ``(r, xi, theta)``.

    State is ``[x; z]``; ``outputs`` rows are named by ``output_names``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    output_names: tuple
    plant: StateSpaceModel
    controller: ControllerRealization

    input_names = ("r", "xi", "theta")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return nx.eigenvalues(self.A)

    def is_stable(self) -> bool:
        return nx.is_hurwitz(self.A)

    def output_index(self, name: str) -> int:
        return self.output_names.index(name)


def lqg_controller(sys: StateSpaceModel, gains: GainSet,
                   kind: ControllerKind = ControllerKind.LQG_REGULATOR) -> ControllerRealization:
    """Observer-based regulator; its y -> output transfer is ``K_c (sI - A + K_f C + B K_c)^-1 K_f``."""
    n = sys.n_states
    if np.any(sys.D != 0):
        raise DimensionMismatch("lqg_controller assumes D = 0")
    K_c = np.asarray(gains.K_c, dtype=float).reshape(1, -1)
    K_f = np.asarray(gains.K_f, dtype=float).reshape(-1, 1)
    if K_c.shape[1] != n or K_f.shape[0] != n:
        raise DimensionMismatch("gain sizes do not match the plant")
    A_k = sys.A - sys.B @ K_c - K_f @ sys.C
    return ControllerRealization(A_k, K_f, K_c, np.zeros((1, 1)), ("y",), kind,
                                 u_sign=-1.0, n_estimator=n)


def lqi_gains(sys: StateSpaceModel, weights: WeightSpec, Q_i: float = DEFAULT_Q_I):
    """LQR on the integrator-augmented plant, split into ``(K_c, K_i)``."""
    aug = augment_with_integrator(sys)
    n = sys.n_states
    Q_aug = np.zeros((n + 1, n + 1))
    Q_aug[:n, :n] = weights.Q
    Q_aug[n, n] = Q_i
    K = lqr_gain(aug, WeightSpec(Q_aug, weights.R))
    return K[:, :n], K[:, n:]


def design_gains(sys: StateSpaceModel, weights: WeightSpec, noise: NoiseSpec,
                 Q_i: Optional[float] = None) -> GainSet:
    """Kalman gain plus either plain LQR gains or LQI gains when ``Q_i`` is given."""
    K_f = kalman_gain(sys, noise)
    if Q_i is None:
        return GainSet(lqr_gain(sys, weights), K_f, None, weights, noise)
    K_c, K_i = lqi_gains(sys, weights, Q_i)
    return GainSet(K_c, K_f, K_i, weights, noise, Q_i)


def servo_controller(sys: StateSpaceModel, gains: GainSet) -> ControllerRealization:
    """Two-input (r, y) LQG servo with an error integrator.

    States ``(x_hat, x_i)``::

        x_hat' = (A - B K_c - K_f C) x_hat - B K_i x_i + K_f y
        x_i'   = r - y
        u      = -K_c x_hat - K_i x_i
    """
    if gains.K_i is None:
        raise MissingIntegralGain("servo controller needs K_i")
    n = sys.n_states
    K_c = np.asarray(gains.K_c, dtype=float).reshape(1, n)
    K_i = np.asarray(gains.K_i, dtype=float).reshape(1, 1)
    K_f = np.asarray(gains.K_f, dtype=float).reshape(n, 1)
    A_hat = sys.A - sys.B @ K_c - K_f @ sys.C
    A_k = np.block([[A_hat, -sys.B @ K_i], [np.zeros((1, n + 1))]])
    B_k = np.zeros((n + 1, 2))
    B_k[:n, 1:] = K_f
    B_k[n, 0] = 1.0
    B_k[n, 1] = -1.0
    C_k = np.hstack([-K_c, -K_i])
    return ControllerRealization(A_k, B_k, C_k, np.zeros((1, 2)), ("r", "y"),
                                 ControllerKind.HYBRID_SERVO, 1.0, n)


def closed_loop(sys: StateSpaceModel, controller: ControllerRealization) -> ClosedLoop:
    """Interconnect plant and controller.

    A controller without an ``r`` or ``e`` input sees ``y - r`` in place of ``y``
    so the reference still acts on regulator loops. Measurement noise ``theta``
    corrupts only what the controller sees.
    """
    if not sys.is_siso():
        raise DimensionMismatch("closed_loop supports SISO plants only")
    n, nk = sys.n_states, controller.order
    if controller.n_estimator not in (0, n):
        raise DimensionMismatch(f"controller estimates {controller.n_estimator} states, plant has {n}")
    C = sys.C
    has_ref = any(name in ("r", "e") for name in controller.input_map)
    # v = Vx x + Vw w with w = (r, xi, theta)
    Vx = np.zeros((len(controller.input_map), n))
    Vw = np.zeros((len(controller.input_map), 3))
    for j, name in enumerate(controller.input_map):
        if name == "y":
            Vx[j] = C[0]
            Vw[j, 2] = 1.0
            if not has_ref:
                Vw[j, 0] = -1.0
        elif name == "r":
            Vw[j, 0] = 1.0
        elif name == "e":
            Vx[j] = -C[0]
            Vw[j, 0] = 1.0
            Vw[j, 2] = -1.0
        else:
            raise DimensionMismatch(f"unknown controller input {name!r}")
    s = controller.u_sign
    # u = Ux x + Uz z + Uw w
    Ux = s * controller.D_k @ Vx
    Uz = s * controller.C_k
    Uw = s * controller.D_k @ Vw
    Gw = np.zeros((n, 3))
    Gw[:, 1:2] = sys.Gamma[:, :1]
    A = np.block(
        [
            [sys.A + sys.B @ Ux, sys.B @ Uz],
            [controller.B_k @ Vx, controller.A_k],
        ]
    )
    B = np.vstack([sys.B @ Uw + Gw, controller.B_k @ Vw])

    rows = [np.hstack([C, np.zeros((1, nk))]), np.hstack([Ux, Uz])]
    drows = [np.zeros((1, 3)), Uw]
    names = ["y", "u"]
    for i, label in enumerate(sys.state_labels):
        e_i = np.zeros((1, n + nk))
        e_i[0, i] = 1.0
        rows.append(e_i)
        drows.append(np.zeros((1, 3)))
        names.append(label)
    for i in range(controller.n_estimator):
        e_i = np.zeros((1, n + nk))
        e_i[0, i] = 1.0
        e_i[0, n + i] = -1.0
        rows.append(e_i)
        drows.append(np.zeros((1, 3)))
        names.append(f"est_err_{i + 1}")
    return ClosedLoop(A, B, np.vstack(rows), np.vstack(drows), tuple(names), sys, controller)


def plant_tf(sys: StateSpaceModel) -> TransferFunction:
    return ss_to_tf(sys)


def open_loop_tf(sys: StateSpaceModel, gains: GainSet, mode: str = "LQG") -> TransferFunction:
    """Loop transfer broken at the plant input.

    ``LQR``: ``K_c (sI - A)^-1 B``. ``LQG``: the plant in series with the
    observer-based regulator, ``K_c (sI - A + K_f C + B K_c)^-1 K_f C (sI - A)^-1 B``.
    """
    mode = mode.upper()
    K_c = np.asarray(gains.K_c, dtype=float).reshape(1, -1)
    if mode == "LQR":
        return ss_to_tf(from_matrices(sys.A, sys.B, K_c))
    if mode != "LQG":
        raise ValueError(f"mode must be 'LQG' or 'LQR', got {mode!r}")
    k = lqg_controller(sys, gains)
    ctrl = from_matrices(k.A_k, k.B_k, k.C_k, k.D_k)
    plant = from_matrices(sys.A, sys.B, sys.C, sys.D)
    return ss_to_tf(series(plant, ctrl))


def open_loop_pointwise(sys: StateSpaceModel, gains: GainSet, s: complex, mode: str = "LQG") -> complex:
    """Direct resolvent products at one complex frequency (no polynomials)."""
    n = sys.n_states
    I = np.eye(n)
    K_c = np.asarray(gains.K_c, dtype=float).reshape(1, -1)
    plant_vec = np.linalg.solve(s * I - sys.A, sys.B[:, 0].astype(complex))
    if mode.upper() == "LQR":
        return complex(K_c[0] @ plant_vec)
    K_f = np.asarray(gains.K_f, dtype=float).reshape(-1)
    y = complex(sys.C[0] @ plant_vec)
    A_hat = sys.A - sys.B @ K_c - np.outer(K_f, sys.C[0])
    est = np.linalg.solve(s * I - A_hat, K_f.astype(complex))
    return complex(K_c[0] @ est) * y


def loop_tf(sys: StateSpaceModel, controller: ControllerRealization) -> TransferFunction:
    """Return ratio ``G_c(s) P(s)`` of the 1-DOF unity-feedback loop."""
    k = controller.one_dof()
    ctrl = from_matrices(k.A_k, k.B_k, k.C_k, k.D_k)
    plant = from_matrices(sys.A, sys.B, sys.C, sys.D)
    return ss_to_tf(series(plant, ctrl))


def recovery_target_tf(sys: StateSpaceModel, gains: GainSet, side: str = "input") -> TransferFunction:
    """Loop the LTR procedure recovers: ``K_c (sI-A)^-1 B`` (input) or ``C (sI-A)^-1 K_f`` (output)."""
    if side == "input":
        return open_loop_tf(sys, gains, "LQR")
    if side == "output":
        K_f = np.asarray(gains.K_f, dtype=float).reshape(-1, 1)
        return ss_to_tf(from_matrices(sys.A, K_f, sys.C))
    raise ValueError(f"side must be 'input' or 'output', got {side!r}")


def hybrid_design(sys: StateSpaceModel, weights: WeightSpec, noise: NoiseSpec,
                  Q_i: float = DEFAULT_Q_I):
    """Gains, two-input servo controller and closed loop in one call."""
    gains = design_gains(sys, weights, noise, Q_i)
    ctrl = servo_controller(sys, gains)
    return gains, ctrl, closed_loop(sys, ctrl)


def lqg_design(sys: StateSpaceModel, weights: WeightSpec, noise: NoiseSpec):
    gains = design_gains(sys, weights, noise)
    kind = ControllerKind.LQG_LTR if noise.q > 1 else ControllerKind.LQG_REGULATOR
    ctrl = lqg_controller(sys, gains, kind)
    return gains, ctrl, closed_loop(sys, ctrl)


def spectrum_distance(a, b) -> float:
    """Largest pairing error between two eigenvalue multisets under optimal matching."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        return float("inf")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))


def separation_check(sys: StateSpaceModel, gains: GainSet, loop: ClosedLoop) -> dict:
    """Compare the closed-loop spectrum with regulator poles plus estimator poles."""
    K_c = np.asarray(gains.K_c, dtype=float).reshape(1, -1)
    K_f = np.asarray(gains.K_f, dtype=float).reshape(-1, 1)
    if gains.K_i is None:
        regulator = sys.A - sys.B @ K_c
    else:
        aug = augment_with_integrator(sys)
        K = np.hstack([K_c, np.asarray(gains.K_i, dtype=float).reshape(1, 1)])
        regulator = aug.A - aug.B @ K
    expected = np.concatenate([nx.eigenvalues(regulator), nx.eigenvalues(sys.A - K_f @ sys.C)])
    actual = loop.eigenvalues()
    return {
        "regulator_poles": [[float(z.real), float(z.imag)] for z in nx.eigenvalues(regulator)],
        "estimator_poles": [[float(z.real), float(z.imag)] for z in nx.eigenvalues(sys.A - K_f @ sys.C)],
        "max_deviation": spectrum_distance(actual, expected),
        "scale": float(max(1.0, np.max(np.abs(expected)))),
    }


def compare_transfer_functions(tf: TransferFunction, reference: TransferFunction) -> dict:
    """Structural and coefficient-level comparison of two controller transfer functions."""
    def zeros(t):
        return t.zeros() if np.count_nonzero(t.num) and t.num.size > 1 else np.zeros(0)

    z, z_ref = zeros(tf), zeros(reference)
    return {
        "num_degree": int(tf.num.size - 1),
        "den_degree": tf.order,
        "reference_num_degree": int(reference.num.size - 1),
        "reference_den_degree": reference.order,
        "leading_coefficient": float(tf.num[0]),
        "reference_leading_coefficient": float(reference.num[0]),
        "pole_distance": spectrum_distance(tf.poles(), reference.poles()),
        "zero_distance": spectrum_distance(z, z_ref) if z.size == z_ref.size else None,
    }
