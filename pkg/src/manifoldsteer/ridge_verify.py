"""FTLE ridge extraction, line fits and the Taylor-Green verification runs.

Each experiment slice advects only the patch of the FTLE lattice that
covers the ridge window (plus a one-node halo for the differences), so the
values are identical to those of a full-lattice computation at a fraction
of the cost. The lattice is extended beyond the field's box when the window
requires it; the Taylor-Green formula is valid everywhere.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .advect import DEFAULT_STEP, FtleField, Grid, ftle_field
from .control import abrupt_program, compile_control_field, periodic_program
from .errors import BelowResolutionFloor, DegenerateHorizon, DegeneratePoints, EmptyWindow, InsufficientPoints, NoRidge
from .flow_model import superpose, taylor_green

DEFAULT_GRID = Grid((0.0, 2.0), (0.0, 1.0), 400, 200)
# 10x finer lattice with the same origin; only patches of it are ever advected
FINE_GRID = Grid((0.0, 2.0), (0.0, 1.0), 4001, 2001)
PERIODIC_SLICES = tuple(round(-2.0 + 0.04 * k, 10) for k in range(101))
FINITE_T_VALUES = tuple(round(0.2 + 0.04 * k, 10) for k in range(21))
SCALING_DELTAS = (0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)


@dataclass(frozen=True)
class RidgeWindow:
    """Open box ``x1 in (lo, hi)``, ``x2 in (lo, hi)``.

    ``exclude_through``/``exclude_direction`` describe a line (the unstable
    direction through the anchor) whose nodes are dropped: in the
    double-gyre that line is itself a forward-time ridge crossing the window.
    """

    x1: tuple[float, float] = (0.85, 1.15)
    x2: tuple[float, float] = (-0.04, 0.04)
    exclude_through: tuple[float, float] | None = (1.0, 0.0)
    exclude_direction: tuple[float, float] = (1.0, 0.0)

    def widened(self, factor: float = 2.0) -> "RidgeWindow":
        c1, c2 = 0.5 * sum(self.x1), 0.5 * sum(self.x2)
        w1, w2 = 0.5 * factor * (self.x1[1] - self.x1[0]), 0.5 * factor * (self.x2[1] - self.x2[0])
        return replace(self, x1=(c1 - w1, c1 + w1), x2=(c2 - w2, c2 + w2))

    def mask(self, nodes: np.ndarray, cell: float) -> np.ndarray:
        m = (
            (nodes[..., 0] > self.x1[0]) & (nodes[..., 0] < self.x1[1])
            & (nodes[..., 1] > self.x2[0]) & (nodes[..., 1] < self.x2[1])
        )
        if self.exclude_through is not None:
            d = np.asarray(self.exclude_direction, dtype=float)
            n = np.array([-d[1], d[0]]) / np.linalg.norm(d)
            dist = np.abs((nodes - np.asarray(self.exclude_through)) @ n)
            m &= dist >= 0.5 * cell
        return m


DEFAULT_WINDOW = RidgeWindow()


def patch(grid: Grid, window: RidgeWindow, halo: int = 1) -> Grid:
    """Sub-lattice of ``grid`` (same spacing and origin) covering ``window``."""
    x0, y0 = grid.x_bounds[0], grid.y_bounds[0]
    i0 = math.floor((window.x1[0] - x0) / grid.hx) - halo
    i1 = math.ceil((window.x1[1] - x0) / grid.hx) + halo
    j0 = math.floor((window.x2[0] - y0) / grid.hy) - halo
    j1 = math.ceil((window.x2[1] - y0) / grid.hy) + halo
    return Grid((x0 + i0 * grid.hx, x0 + i1 * grid.hx), (y0 + j0 * grid.hy, y0 + j1 * grid.hy),
                i1 - i0 + 1, j1 - j0 + 1)


def angular_resolution(grid: Grid, window: RidgeWindow) -> float:
    """Tilt corresponding to a one-cell shift across the window height."""
    return math.atan(grid.hx / (window.x2[1] - window.x2[0]))


def extract_ridge(ftle: FtleField, window: RidgeWindow = DEFAULT_WINDOW, threshold_frac: float = 0.95) -> np.ndarray:
    if not 0.0 < threshold_frac < 1.0:
        raise ValueError("threshold_frac must lie in (0, 1)")
    nodes = ftle.grid.nodes()
    m = window.mask(nodes, min(ftle.grid.hx, ftle.grid.hy)) & np.isfinite(ftle.values)
    if not np.any(m):
        raise EmptyWindow("no FTLE nodes inside the ridge window")
    top = float(np.max(ftle.values[m]))
    sel = m & (ftle.values >= threshold_frac * top)
    pts = nodes[sel]
    if len(pts) < 3:
        raise NoRidge(f"only {len(pts)} nodes above threshold")
    return pts


@dataclass(frozen=True)
class RidgeFit:
    points: np.ndarray
    slope_x1_on_x2: float
    intercept_x1: float
    theta: float
    r2: float
    widened: int = 0

    @property
    def n_points(self) -> int:
        return len(self.points)


def fit_ridge(points, anchor_x2: float = 0.0) -> RidgeFit:
    """Least-squares line ``x1 = b + m x2``.

    ``theta = -atan(m)`` is the anticlockwise tilt from the vertical and
    ``intercept_x1`` the line's x1 at ``x2 = anchor_x2``. ``r2`` is the
    share of the points' scatter about their centroid explained by the line
    (one minus perpendicular residual over total), which stays meaningful
    for exactly vertical ridges.
    """
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        raise DegeneratePoints("need at least 3 points")
    x1, x2 = p[:, 0], p[:, 1]
    if np.ptp(x2) == 0.0:
        raise DegeneratePoints("all points share the same x2")
    m, b = np.polyfit(x2, x1, 1)
    resid = (x1 - (b + m * x2)) / math.sqrt(1.0 + m * m)
    total = float(np.sum((p - p.mean(axis=0)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / total
    return RidgeFit(points=p, slope_x1_on_x2=float(m), intercept_x1=float(b + m * anchor_x2),
                    theta=-math.atan(m), r2=min(1.0, max(0.0, r2)))


# --------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentParams:
    A: float = 1.0
    omega: float = 2 * math.pi
    delta: float = 0.2
    T: float = 2.0
    grid: Grid = DEFAULT_GRID
    step: float = DEFAULT_STEP
    slices: tuple[float, ...] = PERIODIC_SLICES
    window: RidgeWindow = DEFAULT_WINDOW
    threshold: float = 0.95
    workers: int = 1
    max_widen: int = 3

    def as_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {"x_bounds": list(self.grid.x_bounds), "y_bounds": list(self.grid.y_bounds),
                     "nx": self.grid.nx, "ny": self.grid.ny}
        d["slices"] = list(self.slices)
        return d


@dataclass
class ExperimentResult:
    name: str
    columns: tuple[str, ...]
    rows: list[dict]
    params: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c]
                            for c in self.columns])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"experiment": self.name, "parameters": self.params, "summary": self.summary},
                      fh, indent=2, sort_keys=True, default=float)


@dataclass(frozen=True)
class SliceJob:
    kind: str
    A: float
    omega: float
    delta: float
    T: float
    t0: float
    t1: float
    grid: Grid
    window: RidgeWindow
    step: float
    threshold: float
    max_widen: int


def build_field(kind: str, A: float, omega: float, delta: float, T: float):
    if kind == "periodic":
        prog = periodic_program(A=A, omega=omega, delta=delta, T=T)
    elif kind == "abrupt":
        prog = abrupt_program(A=A, delta=delta, T=T)
    elif kind == "uncontrolled":
        return taylor_green(A)
    else:
        raise ValueError(f"unknown program kind {kind!r}")
    return superpose(taylor_green(A), compile_control_field(prog), name=kind)


def measure_slice(job: SliceJob) -> RidgeFit:
    """Forward FTLE over ``[t0, t1]`` on the window patch, ridge, line fit.

    The window is doubled (up to ``max_widen`` times) when no ridge shows.
    """
    fld = build_field(job.kind, job.A, job.omega, job.delta, job.T)
    win = job.window
    for k in range(job.max_widen + 1):
        ftle = ftle_field(fld, patch(job.grid, win), job.t0, job.t1, job.step)
        try:
            pts = extract_ridge(ftle, win, job.threshold)
        except (NoRidge, EmptyWindow):
            if k == job.max_widen:
                raise
            win = win.widened()
            continue
        anchor_x2 = win.exclude_through[1] if win.exclude_through is not None else 0.0
        return replace(fit_ridge(pts, anchor_x2), widened=k)
    raise NoRidge("unreachable")


def _try_slice(job: SliceJob) -> RidgeFit | None:
    # slices at t = T have no forward data; a slice without a ridge is
    # reported as missing rather than aborting the whole series
    try:
        return measure_slice(job)
    except (DegenerateHorizon, NoRidge, EmptyWindow, DegeneratePoints):
        return None


def _run_jobs(jobs: list[SliceJob], workers: int) -> list[RidgeFit | None]:
    if workers <= 1 or len(jobs) <= 1:
        return [_try_slice(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_try_slice, jobs))


_MISSING = {"theta": math.nan, "intercept_x1": math.nan, "r2": math.nan, "n_points": 0, "widened": -1}


def _fit_values(fit: RidgeFit | None) -> dict:
    if fit is None:
        return dict(_MISSING)
    return {"theta": fit.theta, "intercept_x1": fit.intercept_x1, "r2": fit.r2, "n_points": fit.n_points,
            "widened": fit.widened}


def _job(p: ExperimentParams, kind: str, t0: float, t1: float, delta: float | None = None, T: float | None = None):
    return SliceJob(kind=kind, A=p.A, omega=p.omega, delta=p.delta if delta is None else delta,
                    T=p.T if T is None else T, t0=t0, t1=t1, grid=p.grid, window=p.window, step=p.step,
                    threshold=p.threshold, max_widen=p.max_widen)


def experiment_periodic(params: ExperimentParams | None = None) -> ExperimentResult:
    """Track the stable tangent under the in-phase periodic control.

    At each slice the forward FTLE uses all data in ``[t, T]``.
    """
    p = params or ExperimentParams()
    fits = _run_jobs([_job(p, "periodic", t, p.T) for t in p.slices], p.workers)
    gap = 2 * math.pi ** 2 * p.A
    rows = []
    for t, fit in zip(p.slices, fits):
        fit = _fit_values(fit)
        rows.append({
            "t": float(t),
            "theta_s_measured": fit["theta"],
            "x1_measured": fit["intercept_x1"],
            "theta_s_target": p.delta * math.cos(p.omega * t),
            "theta_s_predicted": p.delta * math.cos(p.omega * t)
            - p.delta * math.exp(-gap * (p.T - t)) * math.cos(p.omega * p.T),
            "r2": fit["r2"],
            "n_points": fit["n_points"],
            "widened": fit["widened"],
        })
    res = ExperimentResult("periodic", tuple(rows[0].keys()), rows, p.as_dict())
    th_err = np.abs(res.column("theta_s_measured") - res.column("theta_s_target"))
    res.summary = {
        "n_missing": int(np.isnan(th_err).sum()),
        "max_theta_error": float(np.nanmax(th_err)),
        "max_x1_error": float(np.nanmax(np.abs(res.column("x1_measured") - 1.0))),
        "min_r2": float(np.nanmin(res.column("r2"))),
        "angular_resolution": angular_resolution(p.grid, p.window),
    }
    return res


def _loglog_fit(x, y) -> tuple[float, float]:
    slope, icpt = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(icpt)


def experiment_scaling(deltas=SCALING_DELTAS, params: ExperimentParams | None = None, t: float = 0.0) -> ExperimentResult:
    """Error ``|delta - theta_measured(t)|`` against ``delta`` and its log-log slope."""
    p = params or ExperimentParams(T=1.0)
    deltas = [float(d) for d in deltas]
    if len(deltas) < 2:
        raise InsufficientPoints("an exponent fit needs at least two deltas")
    fits = _run_jobs([_job(p, "periodic", t, p.T, delta=d) for d in deltas], p.workers)
    rows = []
    for d, fit in zip(deltas, fits):
        fit = _fit_values(fit)
        target = d * math.cos(p.omega * t)
        rows.append({"delta": d, "theta_s_measured": fit["theta"], "E": abs(target - fit["theta"]), "r2": fit["r2"]})
    res = ExperimentResult("scaling", ("delta", "theta_s_measured", "E", "r2"), rows, p.as_dict())
    theta = res.column("theta_s_measured")
    # a vertical fit through symmetric node columns leaves only round-off
    if np.all(np.abs(theta[np.isfinite(theta)]) < 1e-12):
        raise BelowResolutionFloor("every measured angle is zero; refine the grid")
    E = res.column("E")
    keep = np.isfinite(E) & (E > 0)
    if keep.sum() < 2:
        raise InsufficientPoints("fewer than two nonzero errors to fit")
    slope, icpt = _loglog_fit(res.column("delta")[keep], E[keep])
    res.summary = {"exponent": slope, "log_prefactor": icpt, "n_fitted": int(keep.sum()),
                   "angular_resolution": angular_resolution(p.grid, p.window)}
    return res


def finite_T_prediction(delta: float, A: float, omega: float, T: float, t: float = 0.0) -> float:
    return -delta * math.exp(-2 * math.pi ** 2 * A * (T - t)) * math.cos(omega * T)


def experiment_finite_T(T_values=FINITE_T_VALUES, params: ExperimentParams | None = None) -> ExperimentResult:
    """Effect of clipping the data at ``T``: the slice ``t = 0`` uses data on ``[0, T]`` only."""
    p = params or ExperimentParams()
    Ts = [float(T) for T in T_values]
    fits = _run_jobs([_job(p, "periodic", 0.0, T, T=T) for T in Ts], p.workers)
    rows = []
    for T, fit in zip(Ts, fits):
        fit = _fit_values(fit)
        rows.append({
            "T": T,
            "theta_s_measured": fit["theta"],
            "measured_error": fit["theta"] - p.delta,
            "predicted_error": finite_T_prediction(p.delta, p.A, p.omega, T),
            "r2": fit["r2"],
        })
    res = ExperimentResult("finite_T", ("T", "theta_s_measured", "measured_error", "predicted_error", "r2"),
                           rows, p.as_dict())
    res.summary = finite_T_summary(res, angular_resolution(p.grid, p.window), 2 * math.pi ** 2 * p.A)
    return res


def finite_T_summary(res: ExperimentResult, resolution: float, expected_rate: float) -> dict:
    T = res.column("T")
    meas = res.column("measured_error")
    pred = res.column("predicted_error")
    resolved = (np.abs(pred) > resolution) & np.isfinite(meas)
    agree = np.sign(meas[resolved]) == np.sign(pred[resolved])
    nz = np.isfinite(meas) & (np.abs(meas) > 0)
    rate = math.nan
    if nz.sum() >= 2:
        slope, _ = np.polyfit(T[nz], np.log(np.abs(meas[nz])), 1)
        rate = float(-slope)
    return {
        "angular_resolution": resolution,
        "n_resolved": int(resolved.sum()),
        "sign_agreement": float(agree.mean()) if resolved.any() else math.nan,
        "decay_rate": rate,
        "expected_rate": expected_rate,
        "decay_rate_rel_error": abs(rate - expected_rate) / expected_rate if math.isfinite(rate) else math.nan,
    }


def _nanmax_or_inf(a: np.ndarray) -> float:
    # a missing slice counts as a failed measurement
    return math.inf if np.any(np.isnan(a)) else float(np.max(a))


def abrupt_targets(delta: float, t) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed step of the stable tangent and smoothed ramp of x1."""
    t = np.asarray(t, dtype=float)
    w = delta ** 2
    theta = delta * np.tanh((t - 0.5) / w)
    x1 = 1.0 + delta * (2 * t - 1) * (np.tanh((t - 0.25) / w) - np.tanh((t - 0.75) / w))
    return theta, x1


def experiment_abrupt(params: ExperimentParams | None = None) -> ExperimentResult:
    p = params or ExperimentParams(delta=0.1)
    fits = _run_jobs([_job(p, "abrupt", t, p.T) for t in p.slices], p.workers)
    rows = []
    for t, fit in zip(p.slices, fits):
        fit = _fit_values(fit)
        th, x1 = abrupt_targets(p.delta, t)
        rows.append({"t": float(t), "theta_s_measured": fit["theta"], "x1_measured": fit["intercept_x1"],
                     "theta_s_target": float(th), "x1_target": float(x1), "r2": fit["r2"],
                     "widened": fit["widened"]})
    res = ExperimentResult("abrupt", tuple(rows[0].keys()), rows, p.as_dict())
    t = res.column("t")
    away = (np.abs(t - 0.25) > 0.1) & (np.abs(t - 0.5) > 0.1) & (np.abs(t - 0.75) > 0.1)
    res.summary = {
        "max_theta_error_away": _nanmax_or_inf(np.abs(res.column("theta_s_measured") - res.column("theta_s_target"))[away]),
        "max_x1_error_away": _nanmax_or_inf(np.abs(res.column("x1_measured") - res.column("x1_target"))[away]),
        "n_away": int(away.sum()),
    }
    return res


def ftle_snapshot(params: ExperimentParams | None = None, t: float = 0.0, kind: str = "periodic") -> tuple[FtleField, FtleField]:
    """Forward (``[t, T]``) and backward (``[t, -T]``) FTLE on the full grid."""
    p = params or ExperimentParams()
    fld = build_field(kind, p.A, p.omega, p.delta, p.T)
    return ftle_field(fld, p.grid, t, p.T, p.step), ftle_field(fld, p.grid, t, -p.T, p.step)


def default_workers() -> int:
    return os.cpu_count() or 1
