"""Synthesis of localized control velocities.

Given a steady saddle and prescribed time signals for the trajectory
location and for the stable/unstable tangent rotations, build a control
field ``c(x, t)`` whose point value and directional shears at the saddle
produce those motions to leading order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import AnchorsTooClose, ConfigError, DegenerateFrame
from .flow_model import (
    BumpFunction,
    PlanarVelocityField,
    SaddleFrame,
    TimeSignal,
    TrajectorySignal,
    cosine,
    find_saddle,
    smoothed_ramp,
    smoothed_step,
    stationary,
    constant,
    taylor_green,
)


@dataclass(frozen=True)
class Anchor:
    """Targets attached to one saddle. Missing signals mean 'leave alone'."""

    frame: SaddleFrame
    a_tilde: TrajectorySignal | None = None
    theta_s: TimeSignal | None = None
    theta_u: TimeSignal | None = None

    def trajectory(self) -> TrajectorySignal:
        return self.a_tilde if self.a_tilde is not None else stationary(self.frame.a)


@dataclass(frozen=True)
class ControlProgram:
    anchors: tuple[Anchor, ...]
    delta: float
    window: tuple[float, float] | None = None
    point_localization: str = "bump"
    normalize_bump: bool = True
    check_separation: bool = True
    domain: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 2.0), (0.0, 1.0))
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.point_localization not in ("bump", "uniform"):
            raise ConfigError(f"unknown point_localization {self.point_localization!r}")

    def epsilon(self, samples: int = 4001) -> float:
        """Largest of ``sup|a~ - a| + sup|a~'|`` and ``sup|theta~| + sup|theta~'|``
        over the window (sampled)."""
        if self.window is None:
            raise ConfigError("program epsilon needs a finite window")
        ts = np.linspace(self.window[0], self.window[1], samples)
        eps = 0.0
        for anc in self.anchors:
            eps = max(eps, anc.trajectory().sup_norm(ts))
            for sig in (anc.theta_s, anc.theta_u):
                if sig is not None:
                    eps = max(eps, sig.sup_norm(ts))
        return eps


def required_point_velocity(anchor: Anchor, t) -> np.ndarray:
    """Velocity the control must have at the saddle to carry the hyperbolic
    trajectory along ``a~``."""
    fr = anchor.frame
    traj = anchor.trajectory()
    t = np.asarray(t, dtype=float)
    off = traj.value(t) - fr.a
    rate = traj.derivative(t)
    rhs_s = (rate - fr.lambda_u * off) @ fr.v_s_perp
    rhs_u = (rate - fr.lambda_s * off) @ fr.v_u_perp
    M = np.stack([fr.v_s_perp, fr.v_u_perp])
    if abs(np.linalg.det(M)) < 1e-12:
        raise DegenerateFrame("stable and unstable directions are parallel")
    rhs = np.stack([rhs_s, rhs_u], axis=-1)
    return np.linalg.solve(M, rhs[..., None])[..., 0] if rhs.ndim > 1 else np.linalg.solve(M, rhs)


def required_shears(anchor: Anchor, t) -> tuple[np.ndarray, np.ndarray]:
    gap = anchor.frame.gap
    t = np.asarray(t, dtype=float)
    sig_s = np.zeros(t.shape)
    sig_u = np.zeros(t.shape)
    if anchor.theta_s is not None:
        sig_s = anchor.theta_s.derivative(t) - gap * anchor.theta_s.value(t)
    if anchor.theta_u is not None:
        sig_u = anchor.theta_u.derivative(t) + gap * anchor.theta_u.value(t)
    return sig_s, sig_u


def shear_basis(frame: SaddleFrame) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-Frobenius-norm matrices realizing a unit stable / unit
    unstable shear with zero shear in the other direction."""
    Ps = np.outer(frame.v_s_perp, frame.v_s)
    Pu = np.outer(frame.v_u_perp, frame.v_u)
    c2 = float(frame.v_s @ frame.v_u) ** 2
    det = 1.0 - c2 * c2
    if det < 1e-12:
        raise DegenerateFrame("stable and unstable directions are parallel")
    Bs = (Ps - c2 * Pu) / det
    Bu = (Pu - c2 * Ps) / det
    return Bs, Bu


def shear_matrix(anchor: Anchor, t) -> np.ndarray:
    Bs, Bu = shear_basis(anchor.frame)
    sig_s, sig_u = required_shears(anchor, t)
    return sig_s[..., None, None] * Bs + sig_u[..., None, None] * Bu


def compile_control_field(program: ControlProgram, name: str = "control") -> PlanarVelocityField:
    d = program.delta
    anchors = program.anchors
    for p, q in combinations(anchors, 2):
        if program.check_separation and np.linalg.norm(p.frame.a - q.frame.a) <= 4.0 * d:
            raise AnchorsTooClose(f"anchors {p.frame.a} and {q.frame.a} closer than 4*delta")
    if program.point_localization == "uniform" and len(anchors) > 1:
        raise ConfigError("uniform point localization supports a single anchor only")

    bumps = [BumpFunction(a.frame.a, d) for a in anchors]
    scale = [1.0 / b.peak if program.normalize_bump else 1.0 for b in bumps]
    uniform = program.point_localization == "uniform"

    def g(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], t.shape) + (2,))
        for anc, bump, k in zip(anchors, bumps, scale):
            B = k * bump(x)
            p = required_point_velocity(anc, t)
            S = shear_matrix(anc, t)
            lin = np.einsum("...ij,...j->...i", S, x - anc.frame.a)
            out = out + (p if uniform else p * B[..., None]) + lin * B[..., None]
        return out

    def dg(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], t.shape) + (2, 2))
        for anc, bump, k in zip(anchors, bumps, scale):
            B = k * bump(x)
            gB = k * bump.gradient(x)
            p = required_point_velocity(anc, t)
            S = shear_matrix(anc, t)
            lin = np.einsum("...ij,...j->...i", S, x - anc.frame.a)
            out = out + S * B[..., None, None] + lin[..., :, None] * gB[..., None, :]
            if not uniform:
                out = out + p[..., :, None] * gB[..., None, :]
        return out

    return PlanarVelocityField(
        f=lambda x: np.zeros(np.shape(x)), g=g, dg=dg, df=lambda x: np.zeros(np.shape(x) + (2,)),
        domain=program.domain, window=program.window, zero_extend=True, name=name,
    )


def realized_smoothness_bound(program: ControlProgram, control: PlanarVelocityField | None = None,
                              n_space: int = 41, n_time: int = 801) -> dict:
    """Sampled ``sup |c| + |Dc| + |D^2 c| + |dc/dt|`` over the bump supports
    and the window, with the ratio to the program's epsilon."""
    c = control or compile_control_field(program)
    if program.window is None:
        raise ConfigError("smoothness report needs a finite window")
    ts = np.linspace(program.window[0], program.window[1], n_time)
    d = program.delta
    h = 1e-5
    worst = {"c": 0.0, "Dc": 0.0, "D2c": 0.0, "dcdt": 0.0}
    for anc in program.anchors:
        s = np.linspace(-2 * d, 2 * d, n_space)
        X = anc.frame.a + np.stack(np.meshgrid(s, s, indexing="xy"), axis=-1).reshape(-1, 2)
        for t in ts:
            v = c.velocity(X, t)
            J = c.jacobian(X, t)
            # one-sided at the window ends, where the field is cut to zero
            lo, hi = max(t - h, ts[0]), min(t + h, ts[-1])
            dt = (c.velocity(X, hi) - c.velocity(X, lo)) / (hi - lo)
            hess = 0.0
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                hj = (c.jacobian(X + e, t) - c.jacobian(X - e, t)) / (2 * h)
                hess = hess + np.sum(hj ** 2, axis=(-2, -1))
            worst["c"] = max(worst["c"], float(np.max(np.linalg.norm(v, axis=-1))))
            worst["Dc"] = max(worst["Dc"], float(np.max(np.linalg.norm(J, axis=(-2, -1)))))
            worst["D2c"] = max(worst["D2c"], float(np.max(np.sqrt(hess))))
            worst["dcdt"] = max(worst["dcdt"], float(np.max(np.linalg.norm(dt, axis=-1))))
    total = sum(worst.values())
    eps = program.epsilon()
    return {**worst, "total": total, "epsilon": eps, "A_realized": total / eps if eps > 0 else math.inf}


# --------------------------------------------------------------------------
# Taylor-Green programs used by the verification experiments


def taylor_green_frames(A: float = 1.0) -> tuple[SaddleFrame, SaddleFrame]:
    tg = taylor_green(A)
    return find_saddle(tg, (0.9, 0.1)), find_saddle(tg, (0.9, 0.9))


def periodic_program(A: float = 1.0, omega: float = 2 * math.pi, delta: float = 0.2, T: float = 2.0,
                     normalize_bump: bool = True) -> ControlProgram:
    """Both tangents oscillate in phase as ``delta cos(omega t)``; the
    saddles at (1, 0) and (1, 1) stay put."""
    low, high = taylor_green_frames(A)
    sig = cosine(delta, omega)
    return ControlProgram(
        anchors=(Anchor(low, theta_s=sig), Anchor(high, theta_u=sig)),
        delta=delta, window=(-T, T), normalize_bump=normalize_bump, check_separation=False,
        meta={"kind": "periodic", "A": A, "omega": omega, "delta": delta, "T": T},
    )


def abrupt_program(A: float = 1.0, delta: float = 0.1, T: float = 2.0, normalize_bump: bool = True) -> ControlProgram:
    """Smoothed step of the stable tangent at t = 1/2 and a smoothed ramp of
    the lower saddle's x1 coordinate over [1/4, 3/4]."""
    low, _ = taylor_green_frames(A)
    w = delta ** 2
    a_tilde = TrajectorySignal(low.a, smoothed_ramp(2 * delta, 0.5, 0.25, 0.75, w), constant(0.0))
    return ControlProgram(
        anchors=(Anchor(low, a_tilde=a_tilde, theta_s=smoothed_step(delta, 0.5, w)),),
        delta=delta, window=(-T, T), point_localization="uniform", normalize_bump=normalize_bump,
        meta={"kind": "abrupt", "A": A, "delta": delta, "T": T},
    )


def zero_program(frames: Sequence[SaddleFrame], delta: float, T: float | None = None) -> ControlProgram:
    return ControlProgram(anchors=tuple(Anchor(f) for f in frames), delta=delta,
                          window=None if T is None else (-T, T))
