"""Frequency-domain evaluation: Bode data, stability margins, sensitivity ISE
and the loop-transfer-recovery gap."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import PoleOnGrid, UnstableClosedLoop
from .plant import StateSpaceModel, TransferFunction, tf_to_ss
from .riccati import NoiseSpec, WeightSpec, kalman_gain, lqr_gain, GainSet
from .sim import propagate, write_csv
from .synthesis import open_loop_tf

POLE_TOL = 1e-14
ISE_HORIZON = 50.0


@dataclass(frozen=True)
class FrequencyGrid:
    lo: float = 1e-2
    hi: float = 1e4
    n: int = 400

    def __post_init__(self):
        if not 0 < self.lo < self.hi or self.n < 2:
            raise ValueError("grid needs 0 < lo < hi and n >= 2")

    @property
    def omega(self) -> np.ndarray:
        return np.logspace(np.log10(self.lo), np.log10(self.hi), self.n)


DEFAULT_GRID = FrequencyGrid()


@dataclass
class FrequencyResponse:
    omega: np.ndarray
    values: np.ndarray
    skipped: list = field(default_factory=list)

    @property
    def magnitude_db(self) -> np.ndarray:
        return 20 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.unwrap(np.angle(self.values)))

    def to_csv(self) -> str:
        return write_csv(["omega", "magnitude_db", "phase_deg"],
                         np.column_stack([self.omega, self.magnitude_db, self.phase_deg]))


@dataclass(frozen=True)
class Margins:
    """Gain margin in dB (``math.inf`` when the phase never reaches -180 deg)
    and phase margin in degrees (``None`` without a gain crossover)."""

    gain_margin_db: float
    phase_margin_deg: Optional[float]
    phase_crossover: Optional[float]
    gain_crossover: Optional[float]

    def to_dict(self) -> dict:
        gm = self.gain_margin_db
        return {
            "gain_margin_db": "inf" if math.isinf(gm) else gm,
            "phase_margin_deg": self.phase_margin_deg,
            "phase_crossover": self.phase_crossover,
            "gain_crossover": self.gain_crossover,
        }


def freq_response(tf: TransferFunction, grid: FrequencyGrid = DEFAULT_GRID,
                  strict: bool = False) -> FrequencyResponse:
    """Horner evaluation of ``G(jw)``; grid points on a pole are dropped and listed."""
    w = grid.omega
    s = 1j * w
    den = nx.polyval(tf.den, s)
    scale = np.maximum(1.0, np.abs(s)) ** tf.order * max(1.0, nx.max_norm(tf.den))
    bad = np.abs(den) < POLE_TOL * scale
    if strict and bad.any():
        raise PoleOnGrid(f"pole at omega={w[bad][0]:.6g}")
    keep = ~bad
    vals = nx.polyval(tf.num, s[keep]) / den[keep]
    return FrequencyResponse(w[keep], vals, list(w[bad]))


def _bisect(fun, a: float, b: float, rtol: float = 1e-12, max_iter: int = 200) -> float:
    fa = fun(a)
    for _ in range(max_iter):
        m = math.sqrt(a * b)
        fm = fun(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
        if b - a <= rtol * b:
            break
    return math.sqrt(a * b)


def margins(tf: TransferFunction, grid: FrequencyGrid = DEFAULT_GRID) -> Margins:
    """Gain and phase margins of a negative-feedback loop with return ratio ``tf``.

    Crossovers are bracketed on the grid and refined by bisection. Among several
    crossings the one nearest to instability (smallest |margin|) is reported.
    """
    resp = freq_response(tf, grid)
    w, G = resp.omega, resp.values

    gm, w_pc = math.inf, None
    im = G.imag
    for k in np.nonzero(np.sign(im[:-1]) * np.sign(im[1:]) < 0)[0]:
        wc = _bisect(lambda x: tf(1j * x).imag, w[k], w[k + 1])
        g = tf(1j * wc)
        if g.real >= 0:
            continue
        cand = -20 * math.log10(abs(g))
        if abs(cand) < abs(gm):
            gm, w_pc = cand, wc

    pm, w_gc = None, None
    logmag = np.log(np.abs(G))
    for k in np.nonzero(np.sign(logmag[:-1]) * np.sign(logmag[1:]) < 0)[0]:
        wc = _bisect(lambda x: math.log(abs(tf(1j * x))), w[k], w[k + 1])
        phase = math.degrees(np.angle(tf(1j * wc)))
        cand = (phase + 180.0 + 180.0) % 360.0 - 180.0
        if pm is None or abs(cand) < abs(pm):
            pm, w_gc = cand, wc
    return Margins(gm, pm, w_pc, w_gc)


def closed_loop_poles(open_loop: TransferFunction) -> np.ndarray:
    """Roots of ``den + num`` for unity negative feedback."""
    return nx.poly_roots(np.polyadd(open_loop.den, open_loop.num))


def step_error_tf(open_loop: TransferFunction) -> TransferFunction:
    """``S(s)/s`` with ``S = 1/(1 + L)``; an integrator in ``L`` cancels the 1/s."""
    den_l = open_loop.den
    char = np.polyadd(den_l, open_loop.num)
    tail = abs(den_l[-1])
    if den_l.size > 1 and tail <= 1e-9 * nx.max_norm(den_l):
        return TransferFunction(den_l[:-1], char)
    return TransferFunction(den_l, np.polymul(char, [1.0, 0.0]))


def sensitivity_ise(open_loop: TransferFunction, horizon: float = ISE_HORIZON,
                    dt: Optional[float] = None) -> float:
    """ISE of the unit-step tracking error computed as the impulse response of
    ``S(s)/s`` (controllable canonical form, RK4) integrated by the trapezoid rule."""
    poles = closed_loop_poles(open_loop)
    if poles.size and np.max(poles.real) >= 0:
        raise UnstableClosedLoop(f"closed-loop pole at {poles[np.argmax(poles.real)]:.4g}")
    err = step_error_tf(open_loop)
    ss = tf_to_ss(err)
    if dt is None:
        fastest = float(np.max(np.abs(poles))) if poles.size else 1.0
        dt = min(1e-3, 0.5 / fastest)
    n_steps = int(math.ceil(horizon / dt))
    # Impulse response: x(0) = B, no input; a direct term would be a Dirac.
    w = np.zeros((n_steps + 1, 1))
    X = propagate(ss.A, np.zeros((ss.n_states, 1)), w, dt, x0=ss.B[:, 0])
    y = X @ ss.C[0]
    return nx.trapezoid(y**2, dt)


def recovery_gap(sys: StateSpaceModel, weights: WeightSpec, noise: NoiseSpec,
                 q_list: Sequence[float], grid: FrequencyGrid = DEFAULT_GRID) -> list[tuple]:
    """Max over the grid of ``|G_LQG(jw; q) - G_LQR(jw)|`` for each ``q``."""
    K_c = lqr_gain(sys, weights)
    lqr = freq_response(open_loop_tf(sys, GainSet(K_c, np.zeros((sys.n_states, 1))), "LQR"), grid)
    out = []
    for q in q_list:
        nq = noise.with_q(q)
        gains = GainSet(K_c, kalman_gain(sys, nq), None, weights, nq)
        lqg = open_loop_tf(sys, gains, "LQG")
        vals = lqg(1j * lqr.omega)
        out.append((float(q), float(np.max(np.abs(vals - lqr.values)))))
    return out
