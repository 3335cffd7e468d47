"""Particle advection, FTLE fields and the variational-equation oracle."""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateHorizon, LeftDomain, OutOfDomain, SingularFundamentalMatrix
from .flow_model import PlanarVelocityField, SaddleFrame

DEFAULT_STEP = 0.01


@dataclass(frozen=True)
class Grid:
    """Uniform ``nx x ny`` node lattice including the box edges."""

    x_bounds: tuple[float, float]
    y_bounds: tuple[float, float]
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_bounds[0], self.x_bounds[1], self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_bounds[0], self.y_bounds[1], self.ny)

    @property
    def hx(self) -> float:
        return (self.x_bounds[1] - self.x_bounds[0]) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_bounds[1] - self.y_bounds[0]) / (self.ny - 1)

    def nodes(self) -> np.ndarray:
        """Node positions, shape ``(ny, nx, 2)`` (rows run along x2)."""
        X, Y = np.meshgrid(self.x, self.y, indexing="xy")
        return np.stack([X, Y], axis=-1)


def _steps(t0: float, t1: float, step: float) -> tuple[int, float]:
    span = t1 - t0
    if span == 0:
        return 0, 0.0
    n = max(1, math.ceil(abs(span) / step - 1e-9))
    return n, span / n


def advect(field: PlanarVelocityField, points, t0: float, t1: float, step: float = DEFAULT_STEP):
    """Classical RK4 from ``t0`` to ``t1`` for an array of points.

    Returns ``(images, left)`` where ``left`` flags trajectories that strayed
    further than ``field.exit_tolerance`` outside the box of a field that is
    only known on that box.
    """
    x = np.array(points, dtype=float)
    n, h = _steps(t0, t1, step)
    left = np.zeros(x.shape[:-1], dtype=bool)
    t = float(t0)
    u = field.velocity
    for k in range(n):
        t = t0 + k * h
        k1 = u(x, t)
        k2 = u(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = u(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = u(x + h * k3, t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not field.analytic:
            left |= ~field.contains(x, pad=field.exit_tolerance)
    return x, left


def flow_map(field: PlanarVelocityField, x0, t0: float, t1: float, step: float = DEFAULT_STEP) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if not field.contains(x0):
        raise OutOfDomain(f"{x0} outside domain {field.domain}")
    x, left = advect(field, x0, t0, t1, step)
    if np.any(left):
        raise LeftDomain(f"trajectory from {x0} left {field.domain}")
    return x


@dataclass(frozen=True)
class FlowMapGrid:
    grid: Grid
    t0: float
    t1: float
    step: float
    images: np.ndarray
    left: np.ndarray


def flow_map_grid(field: PlanarVelocityField, grid: Grid, t0: float, t1: float,
                  step: float = DEFAULT_STEP) -> FlowMapGrid:
    n, h = _steps(t0, t1, step)
    images, left = advect(field, grid.nodes(), t0, t1, step)
    return FlowMapGrid(grid=grid, t0=t0, t1=t1, step=abs(h), images=images, left=left)


def _diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    # central differences, one-sided at the edges
    return np.gradient(a, h, axis=axis, edge_order=1)


def ftle_from_images(images: np.ndarray, grid: Grid, duration: float) -> np.ndarray:
    X, Y = images[..., 0], images[..., 1]
    f11 = _diff(X, 1, grid.hx)
    f12 = _diff(X, 0, grid.hy)
    f21 = _diff(Y, 1, grid.hx)
    f22 = _diff(Y, 0, grid.hy)
    c11 = f11 * f11 + f21 * f21
    c12 = f11 * f12 + f21 * f22
    c22 = f12 * f12 + f22 * f22
    half_tr = 0.5 * (c11 + c22)
    disc = np.sqrt(np.maximum(0.25 * (c11 - c22) ** 2 + c12 * c12, 0.0))
    lam_max = half_tr + disc
    with np.errstate(divide="ignore"):
        return np.log(lam_max) / (2.0 * abs(duration))


@dataclass(frozen=True)
class FtleField:
    grid: Grid
    values: np.ndarray
    direction: str
    horizon: tuple[float, float]
    left: np.ndarray | None = None

    def to_csv(self, path) -> None:
        nodes = self.grid.nodes()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x1", "x2", "value"])
            for (p, v) in zip(nodes.reshape(-1, 2), self.values.reshape(-1)):
                w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(v))])

    _HEADER = struct.Struct("<ii6d")

    def to_bytes(self) -> bytes:
        g = self.grid
        head = self._HEADER.pack(g.nx, g.ny, *g.x_bounds, *g.y_bounds, *self.horizon)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "FtleField":
        nx, ny, x0, x1, y0, y1, t0, t1 = cls._HEADER.unpack_from(data)
        vals = np.frombuffer(data, dtype="<f8", offset=cls._HEADER.size).reshape(ny, nx).copy()
        return cls(Grid((x0, x1), (y0, y1), nx, ny), vals, "forward" if t1 > t0 else "backward", (t0, t1))

    @classmethod
    def from_binary(cls, path) -> "FtleField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def ftle_field(field: PlanarVelocityField, grid: Grid, t0: float, t1: float,
               step: float = DEFAULT_STEP) -> FtleField:
    if t0 == t1:
        raise DegenerateHorizon("FTLE horizon has zero length")
    if grid.nx < 3 or grid.ny < 3:
        raise ValueError("FTLE grid needs at least 3 nodes per axis")
    fm = flow_map_grid(field, grid, t0, t1, step)
    values = ftle_from_images(fm.images, grid, t1 - t0)
    return FtleField(grid=grid, values=values, direction="forward" if t1 > t0 else "backward",
                     horizon=(t0, t1), left=fm.left)


# --------------------------------------------------------------------------
# variational oracle


@dataclass(frozen=True)
class VariationalDirections:
    stable_dir: np.ndarray
    unstable_dir: np.ndarray
    stable_singular_values: np.ndarray
    unstable_singular_values: np.ndarray

    def __iter__(self):
        return iter((self.stable_dir, self.unstable_dir))


def fundamental_matrix(field: PlanarVelocityField, a_path: Callable[[float], np.ndarray], t0: float, t1: float,
                       step: float = DEFAULT_STEP) -> np.ndarray:
    """RK4 solution of ``Y' = DF(a(tau), tau) Y`` with ``Y(t0) = I``."""
    n, h = _steps(t0, t1, step)
    Y = np.eye(2)

    def rhs(tau, Y):
        return field.jacobian(np.asarray(a_path(tau), dtype=float), tau) @ Y

    for k in range(n):
        t = t0 + k * h
        k1 = rhs(t, Y)
        k2 = rhs(t + 0.5 * h, Y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, Y + 0.5 * h * k2)
        k4 = rhs(t + h, Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def _orient(v: np.ndarray, ref: np.ndarray | None) -> np.ndarray:
    v = v / np.linalg.norm(v)
    if ref is not None and float(v @ ref) < 0:
        return -v
    return v


def variational_directions(field: PlanarVelocityField, a_path: Callable[[float], np.ndarray], t: float, T: float,
                           step: float = DEFAULT_STEP, frame: SaddleFrame | None = None) -> VariationalDirections:
    """Finite-time stable/unstable directions at time ``t`` along ``a_path``.

    Stable: the input direction least stretched by the linearized flow over
    ``[t, T]``. Unstable: the output direction most stretched by the
    linearized flow over ``[-T, t]``.
    """
    Yf = fundamental_matrix(field, a_path, t, T, step)
    Yb = fundamental_matrix(field, a_path, -T, t, step)
    for Y in (Yf, Yb):
        if not np.all(np.isfinite(Y)) or abs(np.linalg.det(Y)) == 0.0:
            raise SingularFundamentalMatrix("fundamental matrix is singular or not finite")
    _, sf, Vt = np.linalg.svd(Yf)
    U, sb, _ = np.linalg.svd(Yb)
    stable = _orient(Vt[-1], None if frame is None else frame.v_s)
    unstable = _orient(U[:, 0], None if frame is None else frame.v_u)
    return VariationalDirections(stable, unstable, sf, sb)


def signed_angle(v_from, v_to) -> float:
    """Anticlockwise angle from ``v_from`` to ``v_to`` in (-pi, pi]."""
    a = np.asarray(v_from, dtype=float)
    b = np.asarray(v_to, dtype=float)
    return math.atan2(a[0] * b[1] - a[1] * b[0], float(a @ b))
