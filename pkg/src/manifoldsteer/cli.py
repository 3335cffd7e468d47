"""Command-line front end.

Every subcommand reads one JSON document (``--config``) carrying
``"schema_version": 1`` and writes CSV/JSON/binary files into ``--out``.
Exit status: 0 on success, 1 on a numerical failure, 2 on a bad
configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import control as ctl
from . import ridge_verify as rv
from .advect import Grid
from .decomposition import DEFAULT_THRESHOLD, decompose
from .errors import ConfigError, ManifoldSteerError, NumericalError
from .flow_model import (
    PlanarVelocityField,
    TrajectorySignal,
    constant,
    cosine,
    find_saddle,
    linear_field,
    smoothed_ramp,
    smoothed_step,
    superpose,
    tabulated,
    taylor_green,
)
from .gridio import SampledField, read_sampled_field, sample_field, write_sampled_field
from .manifold import manifold_series, write_states_csv

log = logging.getLogger("manifoldsteer")

SCHEMA_VERSION = 1
EXPERIMENTS = ("periodic", "scaling", "finite_T", "abrupt", "ftle_snapshot")


# --------------------------------------------------------------------------
# config parsing


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    return cfg


def _num(d: dict, key: str, default=None, positive: bool = False) -> float:
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"missing numeric parameter {key!r}")
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key!r} must be a number") from exc
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"{key!r} must be {'positive and ' if positive else ''}finite, got {v}")
    return v


def parse_times(spec) -> tuple[float, ...]:
    if isinstance(spec, dict):
        n = int(spec.get("num", 0))
        if n < 1:
            raise ConfigError("times.num must be >= 1")
        return tuple(float(t) for t in np.linspace(_num(spec, "start"), _num(spec, "stop"), n))
    if isinstance(spec, list) and spec:
        return tuple(float(t) for t in spec)
    raise ConfigError("times must be a nonempty list or {start, stop, num}")


def parse_grid(spec: dict | None, default: Grid = rv.DEFAULT_GRID) -> Grid:
    if spec is None:
        return default
    try:
        g = Grid(tuple(map(float, spec.get("x_bounds", default.x_bounds))),
                 tuple(map(float, spec.get("y_bounds", default.y_bounds))),
                 int(spec.get("nx", default.nx)), int(spec.get("ny", default.ny)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc
    if g.hx <= 0 or g.hy <= 0:
        raise ConfigError("grid bounds must be increasing")
    return g


def parse_signal(spec) -> "object | None":
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "constant":
        return constant(_num(spec, "value", 0.0))
    if kind == "cosine":
        return cosine(_num(spec, "amplitude"), _num(spec, "omega"), _num(spec, "phase", 0.0))
    if kind == "smoothed_step":
        return smoothed_step(_num(spec, "amplitude"), _num(spec, "t0"), _num(spec, "width", positive=True))
    if kind == "smoothed_ramp":
        return smoothed_ramp(_num(spec, "slope"), _num(spec, "center"), _num(spec, "t_on"), _num(spec, "t_off"),
                             _num(spec, "width", positive=True))
    if kind == "tabulated":
        return tabulated(spec["times"], spec["values"])
    raise ConfigError(f"unknown signal kind {kind!r}")


def parse_field(spec: dict) -> PlanarVelocityField:
    if not isinstance(spec, dict):
        raise ConfigError("field must be an object with a 'kind'")
    kind = spec.get("kind")
    if kind == "taylor_green":
        return taylor_green(_num(spec, "A", 1.0, positive=True))
    if kind == "linear":
        return linear_field(np.asarray(spec["matrix"], dtype=float), tuple(map(tuple, spec.get("domain", [[-1, 1], [-1, 1]]))))
    if kind in ("periodic", "abrupt"):
        prog = parse_program(spec)
        return superpose(taylor_green(prog.meta["A"]), ctl.compile_control_field(prog), name=kind)
    if kind == "sampled":
        fld, report = decompose(read_sampled_field(spec["path"]), _num(spec, "threshold", DEFAULT_THRESHOLD))
        log.info("decomposed %s: eps/|f| = %.3g", spec["path"], report.ratio)
        return fld
    raise ConfigError(f"unknown field kind {kind!r}")


def parse_program(spec: dict) -> ctl.ControlProgram:
    kind = spec.get("kind")
    A = _num(spec, "A", 1.0, positive=True)
    if kind == "periodic":
        return ctl.periodic_program(A=A, omega=_num(spec, "omega", 2 * math.pi), delta=_num(spec, "delta", 0.2, True),
                                    T=_num(spec, "T", 2.0, True))
    if kind == "abrupt":
        return ctl.abrupt_program(A=A, delta=_num(spec, "delta", 0.1, True), T=_num(spec, "T", 2.0, True))
    if kind == "zero":
        return ctl.zero_program(ctl.taylor_green_frames(A), _num(spec, "delta", 0.2, True), _num(spec, "T", 2.0, True))
    if kind == "custom":
        base = parse_field(spec["field"])
        T = _num(spec, "T", 2.0, True)
        anchors = []
        for a in spec.get("anchors", []):
            frame = find_saddle(base, a["guess"])
            traj = a.get("a_tilde")
            a_tilde = None
            if traj is not None:
                a_tilde = TrajectorySignal(frame.a, parse_signal(traj.get("x")) or constant(0.0),
                                           parse_signal(traj.get("y")) or constant(0.0))
            anchors.append(ctl.Anchor(frame, a_tilde, parse_signal(a.get("theta_s")), parse_signal(a.get("theta_u"))))
        if not anchors:
            raise ConfigError("custom program needs at least one anchor")
        return ctl.ControlProgram(anchors=tuple(anchors), delta=_num(spec, "delta", positive=True), window=(-T, T),
                                  point_localization=spec.get("point_localization", "bump"),
                                  domain=base.domain, meta={"kind": "custom", "A": A})
    raise ConfigError(f"unknown program kind {kind!r}")


def parse_window(spec: dict | None) -> rv.RidgeWindow:
    if spec is None:
        return rv.DEFAULT_WINDOW
    excl = spec.get("exclude_through", rv.DEFAULT_WINDOW.exclude_through)
    return rv.RidgeWindow(x1=tuple(spec.get("x1", rv.DEFAULT_WINDOW.x1)), x2=tuple(spec.get("x2", rv.DEFAULT_WINDOW.x2)),
                          exclude_through=None if excl is None else tuple(excl),
                          exclude_direction=tuple(spec.get("exclude_direction", rv.DEFAULT_WINDOW.exclude_direction)))


def parse_params(spec: dict, workers: int, **defaults) -> rv.ExperimentParams:
    base = rv.ExperimentParams(**defaults)
    thr = _num(spec, "threshold", base.threshold)
    if not 0 < thr < 1:
        raise ConfigError("threshold must lie in (0, 1)")
    return rv.ExperimentParams(
        A=_num(spec, "A", base.A, True), omega=_num(spec, "omega", base.omega), delta=_num(spec, "delta", base.delta),
        T=_num(spec, "T", base.T, True), grid=parse_grid(spec.get("grid"), base.grid),
        step=_num(spec, "step", base.step, True),
        slices=parse_times(spec["slices"]) if "slices" in spec else base.slices,
        window=parse_window(spec.get("window")), threshold=thr, workers=workers,
        max_widen=int(spec.get("max_widen", base.max_widen)),
    )


# --------------------------------------------------------------------------
# commands


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def cmd_decompose(cfg: dict, out: Path, workers: int) -> None:
    src = cfg.get("field")
    if isinstance(src, str):
        data = read_sampled_field(src)
    elif isinstance(src, dict) and src.get("kind") != "sampled":
        data = sample_field(parse_field(src), parse_grid(cfg.get("grid")), parse_times(cfg.get("times")))
    elif isinstance(src, dict):
        data = read_sampled_field(src["path"])
    else:
        raise ConfigError("decompose needs 'field' (header path or field spec)")
    fld, report = decompose(data, _num(cfg, "threshold", DEFAULT_THRESHOLD))
    f_grid = fld.eval_f(data.grid.nodes())
    write_sampled_field(SampledField(data.grid, np.array([0.0]), f_grid[None]), out / "f.json")
    write_sampled_field(SampledField(data.grid, data.times, data.values - f_grid), out / "g.json")
    _write_json(out / "report.json", report.to_dict())


def cmd_saddle(cfg: dict, out: Path, workers: int) -> None:
    fld = parse_field(cfg["field"])
    fr = find_saddle(fld, cfg.get("guess", [1.0, 0.0]))
    _write_json(out / "saddle.json", {
        "a": fr.a.tolist(), "lambda_s": fr.lambda_s, "lambda_u": fr.lambda_u,
        "v_s": fr.v_s.tolist(), "v_u": fr.v_u.tolist(), "residual": float(np.linalg.norm(fld.eval_f(fr.a))),
    })


def cmd_manifold(cfg: dict, out: Path, workers: int) -> None:
    fld = parse_field(cfg["field"])
    fr = find_saddle(fld, cfg.get("guess", [1.0, 0.0]))
    T = _num(cfg, "T", positive=True) if "T" in cfg else None
    states = manifold_series(fld, fr, parse_times(cfg.get("times")), T)
    write_states_csv(states, out / "manifold.csv")


def cmd_control(cfg: dict, out: Path, workers: int) -> None:
    prog = parse_program(cfg["program"])
    c = ctl.compile_control_field(prog)
    grid = parse_grid(cfg.get("grid"))
    times = parse_times(cfg.get("times", {"start": prog.window[0], "stop": prog.window[1], "num": 101}))
    write_sampled_field(sample_field(c, grid, times), out / "control.json")
    bound = ctl.realized_smoothness_bound(prog, c, n_time=int(cfg.get("bound_samples", 401)))
    bound["spikes"] = bool(bound["Dc"] >= 1.0 / prog.delta)
    _write_json(out / "control_report.json", bound)


def cmd_experiment(cfg: dict, out: Path, workers: int) -> None:
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    spec = cfg.get("params", {})
    if name == "periodic":
        res = rv.experiment_periodic(parse_params(spec, workers))
    elif name == "scaling":
        res = rv.experiment_scaling(cfg.get("deltas", rv.SCALING_DELTAS), parse_params(spec, workers, T=1.0))
    elif name == "finite_T":
        Ts = parse_times(cfg["T_values"]) if "T_values" in cfg else rv.FINITE_T_VALUES
        res = rv.experiment_finite_T(Ts, parse_params(spec, workers))
    elif name == "abrupt":
        res = rv.experiment_abrupt(parse_params(spec, workers, delta=0.1))
    else:
        p = parse_params(spec, workers)
        fwd, bwd = rv.ftle_snapshot(p, _num(cfg, "t", 0.0), cfg.get("kind", "periodic"))
        for tag, fl in (("forward", fwd), ("backward", bwd)):
            fl.to_csv(out / f"ftle_{tag}.csv")
            fl.to_binary(out / f"ftle_{tag}.bin")
        return
    res.to_csv(out / f"{name}.csv")
    res.to_json(out / f"{name}.json")


COMMANDS = {
    "decompose": cmd_decompose,
    "saddle": cmd_saddle,
    "manifold": cmd_manifold,
    "control": cmd_control,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="manifoldsteer", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--workers", type=int, default=rv.default_workers(), help="parallel slice jobs")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ManifoldSteerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
