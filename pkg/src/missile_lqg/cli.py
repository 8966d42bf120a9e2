"""Command-line front end: JSON config in, CSV/JSON artifacts plus a manifest out.

Precedence of settings: command-line flags > ``MISSILE_LQG_*`` environment
variables > ``--config`` file > built-in defaults. Exit codes: 0 success,
1 usage or configuration error, 2 computation error.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

import jsonschema
import numpy as np

from . import __version__
from . import freq, presets, sim, synthesis, tuner
from .errors import ControlError, DegenerateNumerator, InvalidParams
from .plant import MissileParams, build_missile_model, ss_to_tf, system_zeros
from .riccati import NoiseSpec, WeightSpec

logger = logging.getLogger(__name__)

ENV_PREFIX = "MISSILE_LQG_"
EXIT_OK, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2

_NUM = {"type": "number"}
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


CONFIG_SCHEMA = _obj({
    "plant": _obj({f.name: _NUM for f in dataclasses.fields(MissileParams)}),
    "noise": _obj({"Xi": _NUM, "Theta": _NUM, "q": _NUM}),
    "weights": _obj({"Q_diag": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                     "R": _NUM, "Q_i": _NUM}),
    "controller": {"enum": ["hybrid", "lqg"]},
    "sim": _obj({
        "dt": _NUM, "t_final": _NUM, "step_time": _NUM, "step_amplitude": _NUM,
        "noise_enabled": {"type": "boolean"}, "sim_Xi": _NUM, "sim_Theta": _NUM,
    }),
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "sweep": _obj({"delta_M_alpha": _NUM_LIST, "h": _NUM_LIST}),
    "mismatch": _obj({"xi_factors": _NUM_LIST, "theta_factors": _NUM_LIST,
                      "n_seeds": {"type": "integer", "minimum": 2}}),
    "grid": _obj({"lo": _NUM, "hi": _NUM, "n": {"type": "integer", "minimum": 2}}),
    "q_list": _NUM_LIST,
    "tune": _obj({"mode": {"enum": [m.value for m in tuner.TuneMode]}, "q0": _NUM_LIST,
                  "max_iter": {"type": "integer", "minimum": 1}}),
    "out": {"type": "string"},
})

DEFAULT_CONFIG = {
    "plant": MissileParams().to_dict(),
    "noise": {"Xi": 1e-3, "Theta": 1e-7, "q": 100.0},
    "weights": {"Q_diag": [0.01, 0.01, 0.01], "R": 0.01, "Q_i": synthesis.DEFAULT_Q_I},
    "controller": "hybrid",
    "sim": {"dt": 1e-3, "t_final": 20.0, "step_time": 1.0, "step_amplitude": 1.0,
            "noise_enabled": False, "sim_Xi": 1e-3, "sim_Theta": 1e-7},
    "seed": 0,
    "sweep": {"delta_M_alpha": [-1.0, 0.0, 1.0], "h": [0.05, 0.5]},
    "mismatch": {"xi_factors": [1.0, 10.0, 100.0], "theta_factors": [1.0, 10.0, 100.0], "n_seeds": 10},
    "grid": {"lo": 1e-2, "hi": 1e4, "n": 400},
    "q_list": [1.0, 10.0, 100.0, 1000.0],
    "tune": {"mode": "full", "q0": list(tuner.Q0_LADDER), "max_iter": 500},
    "out": "out",
}


class UsageError(Exception):
    """Bad flags or a config that fails schema validation."""


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _validate(cfg: dict, source: str) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"{source}: {path}: {exc.message}") from None


def load_config_file(path: str) -> dict:
    """Read a config or a previous run's ``manifest.json`` (its ``config`` block)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if isinstance(data, dict) and "manifest_version" in data:
        data = data.get("config", {})
    _validate(data, path)
    return data


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    if ENV_PREFIX + "OUT" in environ:
        out["out"] = environ[ENV_PREFIX + "OUT"]
    if ENV_PREFIX + "SEED" in environ:
        try:
            out["seed"] = int(environ[ENV_PREFIX + "SEED"])
        except ValueError:
            raise UsageError(f"{ENV_PREFIX}SEED must be an integer") from None
    return out


def flag_overrides(args: argparse.Namespace) -> dict:
    o: dict = {}

    def put(path: str, value):
        if value is None:
            return
        node = o
        *head, leaf = path.split(".")
        for key in head:
            node = node.setdefault(key, {})
        node[leaf] = value

    put("out", args.out)
    put("seed", args.seed)
    for name, path in (
        ("q", "noise.q"), ("Q_diag", "weights.Q_diag"), ("R", "weights.R"), ("Q_i", "weights.Q_i"),
        ("controller", "controller"), ("t_final", "sim.t_final"), ("step_time", "sim.step_time"),
        ("dt", "sim.dt"), ("dma", "sweep.delta_M_alpha"), ("h", "sweep.h"),
        ("xi_factors", "mismatch.xi_factors"), ("theta_factors", "mismatch.theta_factors"),
        ("n_seeds", "mismatch.n_seeds"), ("q_list", "q_list"), ("mode", "tune.mode"),
        ("q0", "tune.q0"), ("max_iter", "tune.max_iter"),
    ):
        put(path, getattr(args, name, None))
    if getattr(args, "noise", False):
        put("sim.noise_enabled", True)
    return o


def resolve_config(args: argparse.Namespace, environ=None) -> dict:
    config_path = args.config or (environ or os.environ).get(ENV_PREFIX + "CONFIG")
    cfg = DEFAULT_CONFIG
    if config_path:
        cfg = _merge(cfg, load_config_file(config_path))
    cfg = _merge(cfg, env_overrides(environ))
    cfg = _merge(cfg, flag_overrides(args))
    _validate(cfg, "resolved config")
    return cfg


# -- config -> domain objects ------------------------------------------------

def _plant(cfg: dict):
    return build_missile_model(MissileParams.from_dict(cfg["plant"]))


def _noise(cfg: dict, q: Optional[float] = None) -> NoiseSpec:
    n = cfg["noise"]
    return NoiseSpec(n["Xi"], n["Theta"], n["q"] if q is None else q)


def _weights(cfg: dict) -> WeightSpec:
    return WeightSpec.diagonal(cfg["weights"]["Q_diag"], cfg["weights"]["R"])


def _sim_config(cfg: dict) -> sim.SimConfig:
    return sim.SimConfig(seed=cfg["seed"], **cfg["sim"])


def _grid(cfg: dict) -> freq.FrequencyGrid:
    g = cfg["grid"]
    try:
        return freq.FrequencyGrid(g["lo"], g["hi"], g["n"])
    except ValueError as exc:
        raise InvalidParams(str(exc)) from None


def _design(cfg: dict, sys_, q: Optional[float] = None):
    noise = _noise(cfg, q)
    if cfg["controller"] == "hybrid":
        return synthesis.hybrid_design(sys_, _weights(cfg), noise, cfg["weights"]["Q_i"])
    return synthesis.lqg_design(sys_, _weights(cfg), noise)


def _zeros_or_empty(tf) -> np.ndarray:
    try:
        return tf.zeros()
    except DegenerateNumerator:
        return np.zeros(0)


def _complex_list(vals) -> list:
    return [[float(z.real), float(z.imag)] for z in vals]


# -- commands ----------------------------------------------------------------

def cmd_synth(cfg: dict) -> dict:
    sys_ = _plant(cfg)
    gains, ctrl, loop = _design(cfg, sys_)
    one_dof = ctrl.error_to_control_tf()
    report = {
        "plant": {"tf": ss_to_tf(sys_).to_dict(), "zeros": _complex_list(system_zeros(sys_))},
        "gains": gains.to_dict(),
        "controller": ctrl.to_dict(),
        "one_dof_tf": {**one_dof.to_dict(), "poles": _complex_list(one_dof.poles()),
                       "zeros": _complex_list(_zeros_or_empty(one_dof))},
        "closed_loop_eigenvalues": _complex_list(loop.eigenvalues()),
        "separation": synthesis.separation_check(sys_, gains, loop),
    }
    if ctrl.kind is synthesis.ControllerKind.HYBRID_SERVO:
        report["reference_comparison"] = synthesis.compare_transfer_functions(
            one_dof, presets.published_controller())
    return {"controller.json": json.dumps(report, indent=2)}


def cmd_sim(cfg: dict) -> dict:
    sys_ = _plant(cfg)
    _, _, loop = _design(cfg, sys_)
    scfg = _sim_config(cfg)
    traj = sim.simulate(loop, scfg)
    metrics = sim.step_metrics(traj, scfg).to_dict()
    return {"trajectory.csv": traj.to_csv(), "metrics.json": json.dumps(_jsonable(metrics), indent=2)}


def cmd_sweep(cfg: dict) -> dict:
    sys_ = _plant(cfg)
    _, ctrl, _ = _design(cfg, sys_)
    grid = [(d, h) for d in cfg["sweep"]["delta_M_alpha"] for h in cfg["sweep"]["h"]]
    rows = sim.param_sweep(MissileParams.from_dict(cfg["plant"]), grid, ctrl, _sim_config(cfg))
    return {"sweep.csv": sim.table_to_csv(rows)}


def cmd_mismatch(cfg: dict) -> dict:
    sys_ = _plant(cfg)
    _, _, loop = _design(cfg, sys_)
    m = cfg["mismatch"]
    rows = sim.covariance_mismatch_study(loop, cfg["noise"]["Xi"], cfg["noise"]["Theta"],
                                         m["xi_factors"], m["theta_factors"], _sim_config(cfg),
                                         m["n_seeds"])
    return {"mismatch.csv": sim.table_to_csv(rows)}


def cmd_margins(cfg: dict) -> dict:
    sys_ = _plant(cfg)
    grid = _grid(cfg)
    files, rows = {}, []
    for q in cfg["q_list"]:
        _, ctrl, _ = _design(cfg, sys_, q)
        L = synthesis.loop_tf(sys_, ctrl)
        m = freq.margins(L, grid)
        rows.append([q, m.gain_margin_db, m.phase_margin_deg, m.phase_crossover, m.gain_crossover])
        files[f"bode_q{q:g}.csv"] = freq.freq_response(L, grid).to_csv()
    files["margins.csv"] = sim.write_csv(
        ["q", "gain_margin_db", "phase_margin_deg", "phase_crossover", "gain_crossover"], rows)
    return files


def cmd_recover(cfg: dict) -> dict:
    gaps = freq.recovery_gap(_plant(cfg), _weights(cfg), _noise(cfg), cfg["q_list"], _grid(cfg))
    return {"recovery.csv": sim.write_csv(["q", "gap"], gaps)}


def _tune_table(cfg: dict, mode: str) -> str:
    opts = tuner.SimplexOptions(max_iter=cfg["tune"]["max_iter"])
    results = tuner.tune_batch(_plant(cfg), tuner.TuneMode(mode), cfg["tune"]["q0"], opts,
                               _noise(cfg, 1.0), cfg["weights"]["Q_i"])
    return tuner.results_to_csv(results)


def cmd_tune(cfg: dict) -> dict:
    mode = cfg["tune"]["mode"]
    return {f"tune_{mode}.csv": _tune_table(cfg, mode)}


def cmd_reproduce(cfg: dict) -> dict:
    files = {}
    for mode in tuner.TuneMode:
        files[f"tune_{mode.value}.csv"] = _tune_table(cfg, mode.value)
    files.update(cmd_recover(cfg))
    files.update(cmd_mismatch(cfg))
    files["reference_check.json"] = json.dumps(_jsonable(reference_check()), indent=2)
    return files


def reference_check() -> dict:
    """Compare the 1-DOF controller from each candidate weight set with the printed reference."""
    nominal = build_missile_model()
    noise = presets.DESIGN_NOISE.with_q(presets.TUNED_FULL_Q100_Q)
    reference = presets.published_controller()
    out = {}
    candidates = {"tabulated": presets.TUNED_FULL_Q100, "shifted": presets.TUNED_FULL_Q100_SHIFTED,
                  "heuristic": presets.HEURISTIC_WEIGHTS}
    for name, weights in candidates.items():
        _, ctrl, _ = synthesis.hybrid_design(nominal, weights, noise)
        out[name] = synthesis.compare_transfer_functions(ctrl.error_to_control_tf(), reference)
    out["closest"] = min(candidates, key=lambda k: out[k]["pole_distance"])
    return out


COMMANDS: dict[str, Callable[[dict], dict]] = {
    "synth": cmd_synth,
    "sim": cmd_sim,
    "sweep": cmd_sweep,
    "mismatch": cmd_mismatch,
    "margins": cmd_margins,
    "recover": cmd_recover,
    "tune": cmd_tune,
    "reproduce": cmd_reproduce,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        # Subparsers use SUPPRESS so they do not overwrite flags given before the command.
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--config", default=default, help="JSON config or a previous manifest.json")
        p.add_argument("--out", default=default, help="output directory")
        p.add_argument("--seed", type=int, default=default, help="base RNG seed (unsigned 64-bit)")
        p.add_argument("-v", "--verbose", action="store_true",
                       default=False if default is None else default)
        return p

    common = global_flags(argparse.SUPPRESS)

    design = argparse.ArgumentParser(add_help=False)
    design.add_argument("--Q-diag", dest="Q_diag", type=_float_list, help="state weight diagonal, e.g. 1,1,1")
    design.add_argument("--R", type=float, help="control weight")
    design.add_argument("--Q-i", dest="Q_i", type=float, help="integral-state weight")
    design.add_argument("--controller", choices=["hybrid", "lqg"])

    simflags = argparse.ArgumentParser(add_help=False)
    simflags.add_argument("--t-final", dest="t_final", type=float)
    simflags.add_argument("--step-time", dest="step_time", type=float)
    simflags.add_argument("--dt", type=float)

    parser = argparse.ArgumentParser(prog="missile-lqg", description=__doc__.splitlines()[0],
                                     parents=[global_flags(None)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def single_q(p):
        p.add_argument("--q", type=float, help="fictitious noise factor for the filter design")
        return p

    single_q(sub.add_parser("synth", parents=[common, design], help="controller gains, 1-DOF TF, eigenvalues"))
    p = single_q(sub.add_parser("sim", parents=[common, design, simflags], help="step response trajectory"))
    p.add_argument("--noise", action="store_true", help="enable process and measurement noise")
    p = single_q(sub.add_parser("sweep", parents=[common, design, simflags], help="fixed controller over perturbed plants"))
    p.add_argument("--dma", type=_float_list, help="delta_M_alpha values")
    p.add_argument("--h", type=_float_list, help="radome slope values")
    p = single_q(sub.add_parser("mismatch", parents=[common, design, simflags], help="noise covariance mismatch table"))
    p.add_argument("--xi-factors", dest="xi_factors", type=_float_list)
    p.add_argument("--theta-factors", dest="theta_factors", type=_float_list)
    p.add_argument("--n-seeds", dest="n_seeds", type=int)
    p = sub.add_parser("margins", parents=[common, design], help="gain/phase margins over q")
    p.add_argument("--q", "--q-list", dest="q_list", type=_float_list, help="comma-separated q ladder")
    p = sub.add_parser("recover", parents=[common, design], help="loop transfer recovery gap over q")
    p.add_argument("--q", "--q-list", dest="q_list", type=_float_list, help="comma-separated q ladder")
    p = sub.add_parser("tune", parents=[common], help="simplex tuning table")
    p.add_argument("--mode", choices=[m.value for m in tuner.TuneMode])
    p.add_argument("--q0", type=_float_list)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p = single_q(sub.add_parser("reproduce", parents=[common, design, simflags], help="both tuning tables, recovery and mismatch"))
    p.add_argument("--q0", type=_float_list)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    return parser


def _write_error(out: Optional[str], code: str, message: str) -> None:
    payload = json.dumps({"error": code, "message": message})
    print(payload, file=sys.stderr)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(payload + "\n", encoding="utf-8")
        except OSError:
            pass


def main(argv: Optional[Sequence[str]] = None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_hint = args.out or (environ or os.environ).get(ENV_PREFIX + "OUT")
    try:
        cfg = resolve_config(args, environ)
    except UsageError as exc:
        _write_error(out_hint, "UsageError", str(exc))
        return EXIT_USAGE
    out = Path(cfg["out"])
    start = time.perf_counter()
    try:
        files = COMMANDS[args.command](cfg)
    except ControlError as exc:
        _write_error(str(out), exc.code, str(exc))
        return EXIT_COMPUTE
    elapsed = time.perf_counter() - start
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    manifest = {
        "manifest_version": 1,
        "command": args.command,
        "version": __version__,
        "config": cfg,
        "outputs": sorted(files),
        "wall_clock_s": elapsed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"command": args.command, "out": str(out), "outputs": sorted(files)}))
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
