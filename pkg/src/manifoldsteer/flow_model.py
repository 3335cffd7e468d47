"""Velocity fields, saddle frames, bump functions and time signals.

Positions are numpy arrays whose last axis has length 2; every field
callable broadcasts over the leading axes. Jacobians carry two trailing
axes with ``J[..., i, j] = d u_i / d x_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NoConvergence, NotSaddle, OutOfDomain

Box = tuple[tuple[float, float], tuple[float, float]]
VecFn = Callable[[np.ndarray], np.ndarray]
TimeVecFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def perp(v) -> np.ndarray:
    """Rotate ``v`` anticlockwise by pi/2."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _broadcast_xt(x, t):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], t.shape)
    return np.broadcast_to(x, shape + (2,)), np.broadcast_to(t, shape)


@dataclass(frozen=True)
class PlanarVelocityField:
    """Total velocity ``u(x, t) = f(x) + g(x, t)`` on a box.

    ``window`` is ``(-T, T)`` or ``None`` for unbounded data. With
    ``zero_extend`` the nonautonomous part is switched off outside the
    window. ``df``/``dg`` are optional analytic Jacobians; without them the
    Jacobians fall back to central differences. ``analytic`` marks fields
    whose formula stays valid outside ``domain``.
    """

    f: VecFn
    g: TimeVecFn | None = None
    domain: Box = ((0.0, 1.0), (0.0, 1.0))
    window: tuple[float, float] | None = None
    zero_extend: bool = True
    df: Callable[[np.ndarray], np.ndarray] | None = None
    dg: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    analytic: bool = True
    name: str = "field"
    cell: float | None = None

    @property
    def jacobian_mode(self) -> str:
        return "analytic" if self.df is not None and (self.g is None or self.dg is not None) else "finite-difference"

    @property
    def fd_step(self) -> float:
        (x0, x1), (y0, y1) = self.domain
        return 1e-6 * math.hypot(x1 - x0, y1 - y0)

    @property
    def exit_tolerance(self) -> float:
        """Distance outside ``domain`` tolerated before a trajectory counts
        as having left it (one grid cell for gridded data)."""
        if self.cell is not None:
            return self.cell
        (x0, x1), (y0, y1) = self.domain
        return 0.01 * math.hypot(x1 - x0, y1 - y0)

    @property
    def horizon(self) -> float:
        """Half-length ``T`` of the data window (``inf`` when unbounded)."""
        if self.window is None:
            return math.inf
        return 0.5 * (self.window[1] - self.window[0])

    def contains(self, x, pad: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        (x0, x1), (y0, y1) = self.domain
        return (
            (x[..., 0] >= x0 - pad) & (x[..., 0] <= x1 + pad)
            & (x[..., 1] >= y0 - pad) & (x[..., 1] <= y1 + pad)
        )

    def _active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.window is None or not self.zero_extend:
            return np.ones(t.shape, dtype=bool)
        return (t >= self.window[0]) & (t <= self.window[1])

    def eval_f(self, x) -> np.ndarray:
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def eval_g(self, x, t) -> np.ndarray:
        x, t = _broadcast_xt(x, t)
        if self.g is None:
            return np.zeros(x.shape)
        out = np.asarray(self.g(x, t), dtype=float)
        out = np.broadcast_to(out, x.shape)
        active = self._active(t)
        if not np.all(active):
            out = np.where(active[..., None], out, 0.0)
        return out

    def velocity(self, x, t) -> np.ndarray:
        x, t = _broadcast_xt(x, t)
        return self.eval_f(x) + self.eval_g(x, t)

    def jacobian_f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.df is not None:
            return np.asarray(self.df(x), dtype=float)
        return _central_jacobian(lambda y: self.eval_f(y), x, self.fd_step)

    def jacobian_g(self, x, t) -> np.ndarray:
        x, t = _broadcast_xt(x, t)
        if self.g is None:
            return np.zeros(x.shape + (2,))
        if self.dg is not None:
            out = np.broadcast_to(np.asarray(self.dg(x, t), dtype=float), x.shape + (2,))
            active = self._active(t)
            if not np.all(active):
                out = np.where(active[..., None, None], out, 0.0)
            return out
        return _central_jacobian(lambda y: self.eval_g(y, t), x, self.fd_step)

    def jacobian(self, x, t) -> np.ndarray:
        x, t = _broadcast_xt(x, t)
        return self.jacobian_f(x) + self.jacobian_g(x, t)


def _central_jacobian(fn, x, h) -> np.ndarray:
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def superpose(base: PlanarVelocityField, *extras: PlanarVelocityField, name: str | None = None) -> PlanarVelocityField:
    """Field with autonomous part ``base.f`` and every extra field's total
    velocity folded into the nonautonomous part.

    Each component keeps its own zero extension, so the result does not
    apply another one.
    """

    def g(x, t):
        out = base.eval_g(x, t)
        for e in extras:
            out = out + e.velocity(x, t)
        return out

    dg = None
    if (base.g is None or base.dg is not None) and all(e.jacobian_mode == "analytic" for e in extras):
        def dg(x, t):
            out = base.jacobian_g(x, t)
            for e in extras:
                out = out + e.jacobian(x, t)
            return out

    window = base.window
    for e in extras:
        if e.window is not None:
            window = e.window if window is None else (min(window[0], e.window[0]), max(window[1], e.window[1]))
    return PlanarVelocityField(
        f=base.f, g=g, domain=base.domain, window=window, zero_extend=False,
        df=base.df, dg=dg, analytic=base.analytic and all(e.analytic for e in extras), cell=base.cell,
        name=name or "+".join([base.name] + [e.name for e in extras]),
    )


# --------------------------------------------------------------------------
# builtin fields


def taylor_green(A: float = 1.0) -> PlanarVelocityField:
    """Steady Taylor-Green double gyre on ``[0, 2] x [0, 1]``."""
    if A == 0:
        raise ValueError("Taylor-Green amplitude must be nonzero")
    pa = math.pi * A
    pi = math.pi

    def f(x):
        s1, c1 = np.sin(pi * x[..., 0]), np.cos(pi * x[..., 0])
        s2, c2 = np.sin(pi * x[..., 1]), np.cos(pi * x[..., 1])
        return np.stack([-pa * s1 * c2, pa * c1 * s2], axis=-1)

    def df(x):
        s1, c1 = np.sin(pi * x[..., 0]), np.cos(pi * x[..., 0])
        s2, c2 = np.sin(pi * x[..., 1]), np.cos(pi * x[..., 1])
        k = pi * pa
        row0 = np.stack([-k * c1 * c2, k * s1 * s2], axis=-1)
        row1 = np.stack([-k * s1 * s2, k * c1 * c2], axis=-1)
        return np.stack([row0, row1], axis=-2)

    return PlanarVelocityField(f=f, df=df, domain=((0.0, 2.0), (0.0, 1.0)), name=f"taylor_green(A={A:g})")


def linear_field(matrix, domain: Box = ((-1.0, 1.0), (-1.0, 1.0))) -> PlanarVelocityField:
    """Autonomous linear field ``f(x) = M x``."""
    M = np.asarray(matrix, dtype=float)

    def f(x):
        return np.einsum("ij,...j->...i", M, x)

    def df(x):
        return np.broadcast_to(M, np.shape(x)[:-1] + (2, 2))

    return PlanarVelocityField(f=f, df=df, domain=domain, name="linear")


# --------------------------------------------------------------------------
# saddle analysis


@dataclass(frozen=True)
class SaddleFrame:
    a: np.ndarray
    lambda_s: float
    lambda_u: float
    v_s: np.ndarray
    v_u: np.ndarray

    @property
    def v_s_perp(self) -> np.ndarray:
        return perp(self.v_s)

    @property
    def v_u_perp(self) -> np.ndarray:
        return perp(self.v_u)

    @property
    def gap(self) -> float:
        """Eigenvalue gap ``lambda_u - lambda_s``."""
        return self.lambda_u - self.lambda_s

    @classmethod
    def from_jacobian(cls, a, jac) -> "SaddleFrame":
        w, V = np.linalg.eig(np.asarray(jac, dtype=float))
        if np.any(np.abs(np.imag(w)) > 1e-12 * max(1.0, np.max(np.abs(w)))):
            raise NotSaddle(f"complex eigenvalues {w}")
        w = np.real(w)
        V = np.real(V)
        if not (w.min() < 0.0 < w.max()):
            raise NotSaddle(f"eigenvalues {w} do not straddle zero")
        i_s, i_u = int(np.argmin(w)), int(np.argmax(w))
        return cls(
            a=np.asarray(a, dtype=float).copy(),
            lambda_s=float(w[i_s]),
            lambda_u=float(w[i_u]),
            v_s=_canonical_sign(V[:, i_s]),
            v_u=_canonical_sign(V[:, i_u]),
        )


def _canonical_sign(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    for comp in v:
        if abs(comp) > 1e-14:
            return v if comp > 0 else -v
    return v


def find_saddle(field: PlanarVelocityField, guess, tol: float = 1e-12, max_iter: int = 50) -> SaddleFrame:
    """Newton search for a zero of ``field.f`` followed by eigen-analysis."""
    x = np.asarray(guess, dtype=float).copy()
    if not field.contains(x):
        raise OutOfDomain(f"guess {x} outside domain {field.domain}")
    h = field.fd_step
    fx = field.eval_f(x)
    res = float(np.linalg.norm(fx))
    for _ in range(max_iter):
        if res < tol:
            break
        J = _central_jacobian(field.eval_f, x, h)
        try:
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian at {x}") from exc
        step = 1.0
        while True:
            x_new = x + step * dx
            f_new = field.eval_f(x_new)
            r_new = float(np.linalg.norm(f_new))
            if r_new < res or step < 1e-6:
                break
            step *= 0.5
        x, fx, res = x_new, f_new, r_new
    if res >= tol:
        raise NoConvergence(f"|f| = {res:.3e} after {max_iter} Newton iterations")
    return SaddleFrame.from_jacobian(x, field.jacobian_f(x))


def rotate(v, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]]) @ np.asarray(v, dtype=float)


# --------------------------------------------------------------------------
# bump function


def _tanh_diff(a, b):
    # tanh(a) - tanh(b) for a >= b without cancellation when both are large
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(over="ignore"):
        ea, eb = np.exp(-2.0 * np.abs(a)), np.exp(-2.0 * np.abs(b))
        stable = 2.0 * (eb - ea) / ((1.0 + ea) * (1.0 + eb))
    return np.where(b >= 0.0, stable, np.tanh(a) - np.tanh(b))


def sech2(z):
    z = np.abs(np.asarray(z, dtype=float))
    e = np.exp(-2.0 * z)
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class BumpFunction:
    """Smoothed indicator of the ``delta``-ball around ``center``."""

    center: np.ndarray
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("bump radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def peak(self) -> float:
        return math.tanh(1.0 / self.delta)

    def radius(self, x) -> np.ndarray:
        return np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1)

    def __call__(self, x) -> np.ndarray:
        r = self.radius(x)
        d2 = self.delta ** 2
        return 0.5 * _tanh_diff((r + self.delta) / d2, (r - self.delta) / d2)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x - self.center
        r = np.linalg.norm(diff, axis=-1)
        d2 = self.delta ** 2
        dIdr = 0.5 * (sech2((r + self.delta) / d2) - sech2((r - self.delta) / d2)) / d2
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, diff / r[..., None], 0.0)
        return dIdr[..., None] * unit


def bump_eval(b: BumpFunction, x) -> np.ndarray:
    return b(x)


# --------------------------------------------------------------------------
# time signals


@dataclass(frozen=True)
class TimeSignal:
    """Scalar signal with its time derivative."""

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    kind: str
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, t):
        return self.value(np.asarray(t, dtype=float))

    def sup_norm(self, times) -> float:
        """``sup |s| + sup |s'|`` over the sample ``times``."""
        t = np.asarray(times, dtype=float)
        return float(np.max(np.abs(self.value(t))) + np.max(np.abs(self.derivative(t))))


def constant(c: float = 0.0) -> TimeSignal:
    return TimeSignal(
        value=lambda t: np.full(np.shape(t), float(c)),
        derivative=lambda t: np.zeros(np.shape(t)),
        kind="constant", params={"value": c},
    )


def cosine(amplitude: float, omega: float, phase: float = 0.0) -> TimeSignal:
    return TimeSignal(
        value=lambda t: amplitude * np.cos(omega * t + phase),
        derivative=lambda t: -amplitude * omega * np.sin(omega * t + phase),
        kind="cosine", params={"amplitude": amplitude, "omega": omega, "phase": phase},
    )


def smoothed_step(amplitude: float, t0: float, width: float) -> TimeSignal:
    """``amplitude * tanh((t - t0) / width)``."""
    return TimeSignal(
        value=lambda t: amplitude * np.tanh((t - t0) / width),
        derivative=lambda t: amplitude * sech2((t - t0) / width) / width,
        kind="smoothed-step", params={"amplitude": amplitude, "t0": t0, "width": width},
    )


def smoothed_ramp(slope: float, center: float, t_on: float, t_off: float, width: float) -> TimeSignal:
    """``slope (t - center) [tanh((t - t_on)/w) - tanh((t - t_off)/w)]``."""

    def value(t):
        return slope * (t - center) * (np.tanh((t - t_on) / width) - np.tanh((t - t_off) / width))

    def derivative(t):
        gate = np.tanh((t - t_on) / width) - np.tanh((t - t_off) / width)
        dgate = (sech2((t - t_on) / width) - sech2((t - t_off) / width)) / width
        return slope * gate + slope * (t - center) * dgate

    return TimeSignal(
        value=value, derivative=derivative, kind="smoothed-ramp",
        params={"slope": slope, "center": center, "t_on": t_on, "t_off": t_off, "width": width},
    )


def tabulated(times: Sequence[float], values: Sequence[float]) -> TimeSignal:
    """Piecewise-linear signal; derivative from centred differences on the
    samples (one-sided at the ends), itself linearly interpolated."""
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=float)
    if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
        raise ValueError("tabulated signal needs matching 1-D times/values with >= 2 samples")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("tabulated times must be strictly increasing")
    dv = np.gradient(vs, ts, edge_order=1)
    return TimeSignal(
        value=lambda t: np.interp(t, ts, vs),
        derivative=lambda t: np.interp(t, ts, dv),
        kind="tabulated", params={"times": ts.tolist(), "values": vs.tolist()},
    )


@dataclass(frozen=True)
class TrajectorySignal:
    """Planar signal ``origin + (x(t), y(t))``."""

    origin: np.ndarray
    x: TimeSignal
    y: TimeSignal

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.origin + np.stack([self.x.value(t), self.y.value(t)], axis=-1)

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([self.x.derivative(t), self.y.derivative(t)], axis=-1)

    def sup_norm(self, times) -> float:
        """``sup |a~ - origin| + sup |a~'|`` over the sample ``times``."""
        t = np.asarray(times, dtype=float)
        off = np.linalg.norm(self.value(t) - self.origin, axis=-1)
        return float(np.max(off) + np.max(np.linalg.norm(self.derivative(t), axis=-1)))


def stationary(origin) -> TrajectorySignal:
    return TrajectorySignal(origin, constant(0.0), constant(0.0))
