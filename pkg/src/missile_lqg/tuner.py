"""Nelder-Mead tuning of the hybrid controller weights against the step ISE."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import ControlError, ObjectiveNaN
from .plant import StateSpaceModel
from .riccati import NoiseSpec, WeightSpec
from .sim import step_ise, write_csv
from .synthesis import DEFAULT_Q_I, hybrid_design

logger = logging.getLogger(__name__)

PENALTY = 1e6
OBJECTIVE_HORIZON = 20.0
OBJECTIVE_DT = 1e-3
Q0_LADDER = (1.0, 10.0, 100.0, 1000.0)


class TuneMode(str, enum.Enum):
    FULL = "full"  # Q1, Q2, Q3, R, q
    FIXED_Q = "fixed_q"  # Q = C'C; R, q


@dataclass(frozen=True)
class SimplexOptions:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_scale: float = 0.05
    zero_step: float = 0.00025
    max_iter: int = 500
    f_tol: float = 1e-6
    x_tol: float = 1e-6

    def __post_init__(self):
        if not (self.reflection > 0 and self.expansion > 1 and 0 < self.contraction < 1
                and 0 < self.shrink < 1):
            raise ValueError("Nelder-Mead coefficients out of range")


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    log: list = field(default_factory=list)


def initial_simplex(x0: np.ndarray, opts: SimplexOptions) -> np.ndarray:
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] = x0[i] * (1 + opts.initial_scale) if x0[i] != 0 else opts.zero_step
    return simplex


def nelder_mead(f: Callable[[np.ndarray], float], x0: Sequence[float],
                opts: SimplexOptions = SimplexOptions()) -> NelderMeadResult:
    """Minimise ``f`` with the reflection / expansion / contraction / shrink simplex.

    Stops once both the function spread and the vertex spread of the simplex
    fall below their tolerances (relative, with a floor of one), or after
    ``opts.max_iter`` iterations.

    Raises:
        ObjectiveNaN: ``f`` returned NaN; the point is attached to the error.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    log: list = []

    def evaluate(x):
        fx = float(f(x))
        log.append((x.copy(), fx))
        if math.isnan(fx):
            err = ObjectiveNaN(x)
            err.log = log
            raise err
        return fx

    simplex = initial_simplex(x0, opts)
    fvals = np.array([evaluate(v) for v in simplex])
    n = x0.size
    nit = 0
    converged = False
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        f_spread = np.max(np.abs(fvals[1:] - fvals[0]))
        x_spread = np.max(np.abs(simplex[1:] - simplex[0]))
        if (f_spread <= opts.f_tol * max(1.0, abs(fvals[0]))
                and x_spread <= opts.x_tol * max(1.0, np.max(np.abs(simplex[0])))):
            converged = True
            break
        if nit >= opts.max_iter:
            break
        nit += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + opts.reflection * (centroid - worst)
        fr = evaluate(xr)
        if fr < fvals[0]:
            xe = centroid + opts.expansion * (xr - centroid)
            fe = evaluate(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + opts.contraction * (xr - centroid)
            fc = evaluate(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + opts.contraction * (worst - centroid)
            fc = evaluate(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + opts.shrink * (simplex[i] - simplex[0])
            fvals[i] = evaluate(simplex[i])

    best = int(np.argmin(fvals))
    return NelderMeadResult(simplex[best].copy(), float(fvals[best]), nit, len(log), converged, log)


def encode(q_diag: Sequence[float], R: float, q: float) -> np.ndarray:
    """Log-space candidate ``(log Q1, log Q2, log Q3, log R, log q)``."""
    return np.log(np.array([*q_diag, R, q], dtype=float))


def decode(candidate: Sequence[float], mode: TuneMode, sys: StateSpaceModel):
    """Candidate vector -> ``(WeightSpec, q)``; FIXED_Q ignores the Q coordinates."""
    z = np.asarray(candidate, dtype=float)
    vals = np.exp(z)
    if mode is TuneMode.FIXED_Q:
        Q = sys.C.T @ sys.C
    else:
        Q = np.diag(vals[:3])
    return WeightSpec(Q, vals[3]), float(vals[4])


def objective(sys: StateSpaceModel, mode: TuneMode, candidate: Sequence[float],
              noise: NoiseSpec = NoiseSpec(), Q_i: float = DEFAULT_Q_I,
              horizon: float = OBJECTIVE_HORIZON, dt: float = OBJECTIVE_DT) -> float:
    """Noise-free unit-step ISE of the hybrid servo loop.

    Synthesis failures return ``PENALTY + |candidate|`` and unstable loops
    ``PENALTY + spectral abscissa`` so the simplex is pushed back toward the
    feasible region rather than stalling on a plateau.
    """
    z = np.asarray(candidate, dtype=float)
    if not np.all(np.isfinite(z)):
        return PENALTY + 1e6
    try:
        weights, q = decode(z, mode, sys)
        _, _, loop = hybrid_design(sys, weights, noise.with_q(q), Q_i)
    except (ControlError, np.linalg.LinAlgError, ValueError, OverflowError) as exc:
        logger.debug("synthesis failed at %s: %s", z, exc)
        return PENALTY + float(np.linalg.norm(z))
    abscissa = nx.spectral_abscissa(loop.A)
    if abscissa >= 0:
        return PENALTY + abscissa
    try:
        return step_ise(loop, horizon, dt)
    except ControlError:
        return PENALTY + float(np.linalg.norm(z))


@dataclass
class TuneResult:
    mode: TuneMode
    J_min: float
    J_initial: float
    q_initial: float
    q_opt: float
    Q_diag: Optional[tuple]
    R: float
    iterations: int
    converged: bool
    candidate: np.ndarray
    log: list = field(default_factory=list, repr=False)

    def row(self) -> list:
        q = self.Q_diag if self.Q_diag is not None else (None, None, None)
        return [self.J_min, self.q_initial, self.q_opt, *q, self.R]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value, "J_min": self.J_min, "J_initial": self.J_initial,
            "q_initial": self.q_initial, "q_opt": self.q_opt,
            "Q_diag": None if self.Q_diag is None else list(self.Q_diag),
            "R": self.R, "iterations": self.iterations, "converged": self.converged,
        }


TABLE_COLUMNS = ("J_min", "q_initial", "q_opt", "Q1", "Q2", "Q3", "R")


def tune(sys: StateSpaceModel, mode: TuneMode, q0_initial: float,
         opts: SimplexOptions = SimplexOptions(), noise: NoiseSpec = NoiseSpec(),
         Q_i: float = DEFAULT_Q_I) -> TuneResult:
    """Nelder-Mead from unit weights and ``q = q0_initial``."""
    mode = TuneMode(mode)
    base = encode([1.0, 1.0, 1.0], 1.0, q0_initial)
    if mode is TuneMode.FULL:
        free = np.arange(5)
    else:
        free = np.array([3, 4])

    def embed(x):
        z = base.copy()
        z[free] = x
        return z

    def f(x):
        return objective(sys, mode, embed(x), noise, Q_i)

    res = nelder_mead(f, base[free], opts)
    z = embed(res.x)
    weights, q = decode(z, mode, sys)
    q_diag = None if mode is TuneMode.FIXED_Q else tuple(float(v) for v in np.diag(weights.Q))
    J0 = res.log[0][1]
    logger.info("tune %s q0=%g: J %.4g -> %.4g in %d iterations", mode.value, q0_initial, J0, res.fun, res.nit)
    return TuneResult(mode, res.fun, J0, float(q0_initial), q, q_diag, weights.R,
                      res.nit, res.converged, z, res.log)


def tune_batch(sys: StateSpaceModel, mode: TuneMode, q0_list: Sequence[float] = Q0_LADDER,
               opts: SimplexOptions = SimplexOptions(), noise: NoiseSpec = NoiseSpec(),
               Q_i: float = DEFAULT_Q_I) -> list[TuneResult]:
    return [tune(sys, mode, q0, opts, noise, Q_i) for q0 in q0_list]


def results_to_csv(results: Sequence[TuneResult]) -> str:
    return write_csv(TABLE_COLUMNS, [r.row() for r in results])
