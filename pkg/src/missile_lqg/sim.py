"""Time-domain simulation of closed loops and the sweep / noise-mismatch studies.

Deterministic dynamics advance with classical RK4; because every loop here is
linear with inputs held over each step, one RK4 step is the exact linear map
``x+ = Phi x + Psi w`` and is applied in that form. Stochastic runs add an
Euler-Maruyama process-noise increment on top of the same map.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import Diverged, InvalidParams
from .plant import MissileParams, build_missile_model
from .synthesis import ClosedLoop, ControllerRealization, closed_loop

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e9
SETTLING_BAND = 0.02


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_final: float = 20.0
    step_time: float = 0.0
    step_amplitude: float = 1.0
    noise_enabled: bool = False
    seed: int = 0
    sim_Xi: float = 1e-3
    sim_Theta: float = 1e-7

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParams(f"dt must be positive, got {self.dt}")
        if not self.t_final > self.step_time >= 0:
            raise InvalidParams("need t_final > step_time >= 0")
        if self.sim_Xi < 0 or self.sim_Theta < 0:
            raise InvalidParams("simulation covariances must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParams("seed must fit in 64 unsigned bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Trajectory:
    """Uniform-grid record; ``channels`` maps a name to one sample per grid point."""

    t: np.ndarray
    channels: dict

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self) -> str:
        return write_csv(["t", *self.channels], np.column_stack([self.t, *self.channels.values()]))


@dataclass(frozen=True)
class StepMetrics:
    ise: float
    steady_state_error: float
    overshoot_pct: float
    settling_time: float
    settled: bool
    peak_u: float
    peak_delta: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def format_float(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


def write_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else format_float(v) for v in row])
    return buf.getvalue()


def rk4_map(A: np.ndarray, B: np.ndarray, dt: float):
    """Exact one-step RK4 propagators for ``x' = A x + B w`` with ``w`` held."""
    n = A.shape[0]
    hA = dt * A
    I = np.eye(n)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    Psi = dt * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ B
    return Phi, Psi


def reference_signal(t: np.ndarray, cfg: SimConfig) -> np.ndarray:
    # Small guard so a step time on the grid is not lost to rounding.
    return np.where(t >= cfg.step_time - 1e-9 * cfg.dt, cfg.step_amplitude, 0.0)


def propagate(A, B, w: np.ndarray, dt: float, x0=None, process: Optional[np.ndarray] = None,
              check_every: int = 64) -> np.ndarray:
    """States on the grid; ``w[k]`` is held over ``[t_k, t_k+1)``.

    ``process[k]`` (optional) is an additive state increment applied after step k.
    """
    n = A.shape[0]
    steps = w.shape[0] - 1
    Phi, Psi = rk4_map(A, B, dt)
    drive = w @ Psi.T
    if process is not None:
        drive[:steps] += process[:steps]
    X = np.empty((steps + 1, n))
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    X[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x = Phi @ x + drive[k]
            X[k + 1] = x
            if k % check_every == 0 and not np.max(np.abs(x)) < DIVERGENCE_LIMIT:
                raise Diverged(f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at step {k + 1}")
    if not np.max(np.abs(X[-1])) < DIVERGENCE_LIMIT or not np.all(np.isfinite(X)):
        raise Diverged(f"state magnitude exceeded {DIVERGENCE_LIMIT:g}")
    return X


def simulate(loop: ClosedLoop, cfg: SimConfig, x0=None, rng_seed=None) -> Trajectory:
    """Step-reference simulation of a closed loop.

    With ``noise_enabled`` the process noise enters as ``Gamma * sqrt(sim_Xi * dt) * N(0,1)``
    per step and the measurement sample has variance ``sim_Theta``. The same
    seed always yields the same trajectory.
    """
    N = cfg.n_steps
    t = np.arange(N + 1) * cfg.dt
    w = np.zeros((N + 1, 3))
    w[:, 0] = reference_signal(t, cfg)
    process = None
    if cfg.noise_enabled:
        rng = np.random.default_rng(cfg.seed if rng_seed is None else rng_seed)
        xi = rng.standard_normal(N + 1)
        theta = rng.standard_normal(N + 1)
        w[:, 2] = np.sqrt(cfg.sim_Theta) * theta
        process = np.outer(np.sqrt(cfg.sim_Xi * cfg.dt) * xi, loop.B[:, 1])
    X = propagate(loop.A, loop.B, w, cfg.dt, x0=x0, process=process)
    Y = X @ loop.C.T + w @ loop.D.T
    channels = {"r": w[:, 0]}
    est_cols = []
    for j, name in enumerate(loop.output_names):
        if name.startswith("est_err_"):
            est_cols.append(j)
        else:
            channels[name] = Y[:, j]
    if est_cols:
        channels["est_err_norm"] = np.linalg.norm(Y[:, est_cols], axis=1)
    return Trajectory(t, channels)


def step_metrics(traj: Trajectory, cfg: SimConfig) -> StepMetrics:
    """ISE from the step instant, plus overshoot, 2% settling and peak efforts."""
    t = traj.t
    r = traj["r"]
    e = r - traj["y"]
    start = int(np.searchsorted(t, cfg.step_time - 1e-9 * cfg.dt))
    after = slice(start, None)
    ise = nx.trapezoid(e[after] ** 2, traj.dt)
    amp = cfg.step_amplitude
    y_after = traj["y"][after]
    if amp != 0:
        overshoot = max(0.0, float(np.max((y_after - amp) / amp)) * 100.0)
        outside = np.nonzero(np.abs(e[after]) > SETTLING_BAND * abs(amp))[0]
    else:
        overshoot = 0.0
        outside = np.zeros(0, dtype=int)
    if outside.size == 0:
        settling, settled = 0.0, True
    elif outside[-1] == y_after.size - 1:
        settling, settled = float("inf"), False
    else:
        settling, settled = float(t[start + outside[-1] + 1] - cfg.step_time), True
    return StepMetrics(
        ise=ise,
        steady_state_error=float(abs(e[-1])),
        overshoot_pct=overshoot,
        settling_time=settling,
        settled=settled,
        peak_u=float(np.max(np.abs(traj["u"][after]))),
        peak_delta=float(np.max(np.abs(traj["delta"][after]))) if "delta" in traj.channels else float("nan"),
    )


def step_ise(loop: ClosedLoop, t_final: float = 20.0, dt: float = 1e-3) -> float:
    """Noise-free unit-step ISE with the step at t = 0."""
    cfg = SimConfig(dt=dt, t_final=t_final)
    return step_metrics(simulate(loop, cfg), cfg).ise


METRIC_FIELDS = tuple(f.name for f in dataclasses.fields(StepMetrics))


def param_sweep(base: MissileParams, grid: Iterable[tuple], controller: ControllerRealization,
                cfg: SimConfig) -> list[dict]:
    """Hold the controller fixed and perturb the plant over ``(delta_M_alpha, h)`` pairs."""
    grid = list(grid)
    if not grid:
        raise InvalidParams("sweep grid is empty")
    rows = []
    for dma, h in grid:
        params = dataclasses.replace(base, delta_M_alpha=float(dma), h=float(h))
        row = {"delta_M_alpha": float(dma), "h": float(h), "diverged": False}
        try:
            loop = closed_loop(build_missile_model(params), controller)
            row.update(step_metrics(simulate(loop, cfg), cfg).to_dict())
        except Diverged as exc:
            logger.warning("sweep point dMa=%g h=%g diverged: %s", dma, h, exc)
            row["diverged"] = True
            row.update({k: float("nan") for k in METRIC_FIELDS})
        rows.append(row)
    return rows


def cell_seed(seed: int, cell: int, replicate: int) -> np.random.SeedSequence:
    """Independent RNG stream for one Monte-Carlo replicate of one table cell."""
    return np.random.SeedSequence([int(seed), int(cell), int(replicate)])


def noise_statistics(loop: ClosedLoop, cfg: SimConfig, n_seeds: int = 10, cell: int = 0) -> dict:
    """Seed-averaged canard, output and control statistics of stochastic runs."""
    if n_seeds < 1:
        raise InvalidParams("need at least one seed")
    start = int(np.searchsorted(np.arange(cfg.n_steps + 1) * cfg.dt, cfg.step_time))
    per_seed = []
    for rep in range(n_seeds):
        traj = simulate(loop, cfg.replace(noise_enabled=True), rng_seed=cell_seed(cfg.seed, cell, rep))
        d = traj["delta"][start:]
        tail = slice(start + int(0.75 * (traj.t.size - start)), None)
        per_seed.append(
            (
                float(np.max(np.abs(d))),
                float(np.sqrt(np.mean(d**2))),
                float(np.var(traj["y"][tail])),
                float(np.var(traj["u"][tail])),
                float(np.mean((traj["r"] - traj["y"])[tail])),
            )
        )
    arr = np.array(per_seed)
    mean = arr.mean(axis=0)
    sem = arr.std(axis=0, ddof=1) / np.sqrt(n_seeds) if n_seeds > 1 else np.zeros(arr.shape[1])
    return {
        "delta_peak": mean[0],
        "delta_rms": mean[1],
        "delta_rms_sem": sem[1],
        "y_var": mean[2],
        "u_var": mean[3],
        "tail_error_mean": mean[4],
        "tail_error_sem": sem[4],
        "n_seeds": n_seeds,
    }


MISMATCH_FIELDS = ("delta_peak", "delta_rms", "delta_rms_sem", "y_var", "u_var",
                   "tail_error_mean", "tail_error_sem", "n_seeds")


def covariance_mismatch_study(loop: ClosedLoop, design_Xi: float, design_Theta: float,
                              xi_factors: Sequence[float], theta_factors: Sequence[float],
                              cfg: SimConfig, n_seeds: int = 10) -> list[dict]:
    """Run a fixed controller under inflated simulation covariances.

    One row per ``(xi_factor, theta_factor)`` cell, ordered factor-major; each cell
    owns RNG streams derived from ``(cfg.seed, cell index)``.
    """
    rows = []
    cell = 0
    for fx in xi_factors:
        for ft in theta_factors:
            row = {"xi_factor": float(fx), "theta_factor": float(ft),
                   "sim_Xi": design_Xi * fx, "sim_Theta": design_Theta * ft, "diverged": False}
            c = cfg.replace(sim_Xi=design_Xi * fx, sim_Theta=design_Theta * ft)
            try:
                row.update(noise_statistics(loop, c, n_seeds, cell))
            except Diverged as exc:
                logger.warning("mismatch cell %d diverged: %s", cell, exc)
                row["diverged"] = True
                row.update({k: float("nan") for k in MISMATCH_FIELDS})
            rows.append(row)
            cell += 1
    return rows


def table_to_csv(rows: list[dict], columns: Optional[Sequence[str]] = None) -> str:
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    return write_csv(columns, [[row.get(c) for c in columns] for row in rows])
