"""Split sampled data into a time mean and an unsteady remainder."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, EmptyGrid, NonUniformTimeGrid, NotNearlyAutonomous
from .flow_model import PlanarVelocityField
from .gridio import SampledField

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class DecompositionReport:
    eps: float
    f_norm: float
    ratio: float
    valid: bool
    rule: str = "simpson"
    threshold: float = DEFAULT_THRESHOLD

    def to_dict(self) -> dict:
        return asdict(self)


def _sup(v: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(v, axis=-1)))


def time_mean(values: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, str]:
    """Quadrature mean over the first axis: Simpson for odd sample counts,
    trapezoid otherwise."""
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise EmptyGrid("need at least 3 time samples")
    dt = np.diff(times)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * abs(dt[0]):
        raise NonUniformTimeGrid("time samples must be increasing and uniformly spaced")
    h = float(times[-1] - times[0]) / (len(times) - 1)
    if len(times) % 2 == 1:
        total, rule = simpson(values, dx=h, axis=0), "simpson"
    else:
        total, rule = trapezoid(values, dx=h, axis=0), "trapezoid"
    return total / (times[-1] - times[0]), rule


def decompose(data: SampledField, threshold: float = DEFAULT_THRESHOLD) -> tuple[PlanarVelocityField, DecompositionReport]:
    """Time mean ``f`` and remainder ``g = u - f`` as an interpolating field.

    Space is interpolated bilinearly and time linearly; positions outside the
    lattice are clamped to its edge.
    """
    times = data.times
    if abs(times[0] + times[-1]) > 1e-9 * max(1.0, abs(times[0])):
        raise ConfigError("time window must be symmetric about 0")
    f_grid, rule = time_mean(data.values, times)
    g_grid = data.values - f_grid
    f_norm = _sup(f_grid)
    # a mean at round-off level of the data counts as vanishing
    if f_norm <= 64 * np.finfo(float).eps * _sup(data.values):
        raise NotNearlyAutonomous("time mean vanishes everywhere; no steady skeleton")
    eps = _sup(g_grid)
    ratio = eps / f_norm
    report = DecompositionReport(eps=eps, f_norm=f_norm, ratio=ratio, valid=ansatz_check_ratio(ratio, threshold),
                                 rule=rule, threshold=threshold)
    if not report.valid:
        log.warning("eps/|f| = %.3g exceeds %.3g; leading-order results may be inaccurate", ratio, threshold)

    grid = data.grid
    xs, ys = grid.x, grid.y
    f_interp = RegularGridInterpolator((ys, xs), f_grid)
    g_interp = RegularGridInterpolator((times, ys, xs), g_grid)
    lo = np.array([grid.x_bounds[0], grid.y_bounds[0]])
    hi = np.array([grid.x_bounds[1], grid.y_bounds[1]])

    def f(x):
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        return f_interp(x[..., ::-1].reshape(-1, 2)).reshape(x.shape)

    def g(x, t):
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        t = np.clip(np.asarray(t, dtype=float), times[0], times[-1])
        shape = np.broadcast_shapes(x.shape[:-1], t.shape)
        x = np.broadcast_to(x, shape + (2,))
        t = np.broadcast_to(t, shape)
        q = np.concatenate([t[..., None], x[..., ::-1]], axis=-1)
        return g_interp(q.reshape(-1, 3)).reshape(x.shape)

    fld = PlanarVelocityField(
        f=f, g=g, domain=(grid.x_bounds, grid.y_bounds), window=(float(times[0]), float(times[-1])),
        zero_extend=True, analytic=False, cell=min(grid.hx, grid.hy), name="decomposed",
    )
    return fld, report


def ansatz_check_ratio(ratio: float, threshold: float = DEFAULT_THRESHOLD) -> bool:
    return bool(ratio <= threshold)


def ansatz_check(report: DecompositionReport, threshold: float = DEFAULT_THRESHOLD) -> bool:
    if not report.f_norm > 0:
        raise ValueError("report has a vanishing steady part")
    return ansatz_check_ratio(report.ratio, threshold)


def split_samples(data: SampledField) -> tuple[np.ndarray, np.ndarray, str]:
    """Raw gridded ``f`` (ny, nx, 2) and ``g`` (nt, ny, nx, 2)."""
    f_grid, rule = time_mean(data.values, data.times)
    return f_grid, data.values - f_grid, rule
