"""Leading-order hyperbolic trajectory and manifold tangent rotations.

All quantities are linear functionals of the nonautonomous part ``g``
evaluated at the steady saddle ``a``. A finite data window ``[-T, T]``
clips the integrals (``g`` is taken as zero outside); ``T = inf`` recovers
the infinite-time formulas through quadrature truncation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateFrame, OutOfDomain, OutsideWindow
from .flow_model import PlanarVelocityField, SaddleFrame
from .quadrature import exp_integral

CSV_COLUMNS = ("t", "alpha_s", "alpha_u", "a1", "a2", "theta_s", "theta_u")


@dataclass(frozen=True)
class ManifoldState:
    t: float
    alpha_s: float
    alpha_u: float
    a_star: np.ndarray
    theta_s: float
    theta_u: float

    @property
    def perturbative(self) -> bool:
        """False once either angle leaves (-pi/2, pi/2)."""
        return abs(self.theta_s) < math.pi / 2 and abs(self.theta_u) < math.pi / 2

    def row(self) -> list[float]:
        return [self.t, self.alpha_s, self.alpha_u, float(self.a_star[0]), float(self.a_star[1]),
                self.theta_s, self.theta_u]


@dataclass(frozen=True)
class ShearSignal:
    """Shears of ``g`` at the saddle, as functions of time."""

    field: PlanarVelocityField
    frame: SaddleFrame

    def _both(self, t):
        D = self.field.jacobian_g(self.frame.a, t)
        s = np.einsum("i,...ij,j->...", self.frame.v_s_perp, D, self.frame.v_s)
        u = np.einsum("i,...ij,j->...", self.frame.v_u_perp, D, self.frame.v_u)
        return s, u

    def sigma_s(self, t) -> np.ndarray:
        return self._both(t)[0]

    def sigma_u(self, t) -> np.ndarray:
        return self._both(t)[1]


def _resolve_T(field: PlanarVelocityField, T: float | None) -> float:
    return field.horizon if T is None else float(T)


def _check_t(t: float, T: float) -> None:
    if not (-T <= t <= T):
        raise OutsideWindow(f"t = {t} outside [-{T}, {T}]")


def g_normal_components(field: PlanarVelocityField, frame: SaddleFrame, x, t) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if not np.all(field.contains(x)):
        raise OutOfDomain(f"{x} outside domain {field.domain}")
    g = field.eval_g(x, t)
    return g @ frame.v_s_perp, g @ frame.v_u_perp


def _normal_at_saddle(field, frame, which: str):
    vp = frame.v_s_perp if which == "s" else frame.v_u_perp

    def h(tau):
        return field.eval_g(frame.a, tau) @ vp

    return h


def alpha_projections(field: PlanarVelocityField, frame: SaddleFrame, t: float, T: float | None = None,
                      abs_tol: float = 1e-11) -> tuple[float, float]:
    T = _resolve_T(field, T)
    _check_t(t, T)
    alpha_s = -exp_integral(_normal_at_saddle(field, frame, "s"), -frame.lambda_u, t, T, shift=t, abs_tol=abs_tol)
    alpha_u = exp_integral(_normal_at_saddle(field, frame, "u"), -frame.lambda_s, -T, t, shift=t, abs_tol=abs_tol)
    return alpha_s, alpha_u


def reconstruct_position(frame: SaddleFrame, alpha_s: float, alpha_u: float) -> np.ndarray:
    """Point whose projections on ``v_s_perp``/``v_u_perp`` about ``a`` are the
    given alphas."""
    denom = float(frame.v_s @ frame.v_u_perp)
    if abs(denom) < 1e-12:
        raise DegenerateFrame("stable and unstable directions are parallel")
    coeff = (alpha_u * float(frame.v_u @ frame.v_s) - alpha_s) / denom
    return frame.a + alpha_u * frame.v_u_perp + coeff * frame.v_u


def hyperbolic_trajectory(field: PlanarVelocityField, frame: SaddleFrame, t: float, T: float | None = None) -> np.ndarray:
    return reconstruct_position(frame, *alpha_projections(field, frame, t, T))


def tangent_angles(field: PlanarVelocityField, frame: SaddleFrame, t: float, T: float | None = None,
                   abs_tol: float = 1e-11) -> tuple[float, float]:
    """Anticlockwise rotations of ``v_s`` and ``v_u`` at time ``t``."""
    T = _resolve_T(field, T)
    _check_t(t, T)
    shear = ShearSignal(field, frame)
    gap = frame.gap
    theta_s = -exp_integral(shear.sigma_s, -gap, t, T, shift=t, abs_tol=abs_tol)
    theta_u = exp_integral(shear.sigma_u, gap, -T, t, shift=t, abs_tol=abs_tol)
    return theta_s, theta_u


def manifold_state(field: PlanarVelocityField, frame: SaddleFrame, t: float, T: float | None = None) -> ManifoldState:
    a_s, a_u = alpha_projections(field, frame, t, T)
    th_s, th_u = tangent_angles(field, frame, t, T)
    return ManifoldState(t=float(t), alpha_s=a_s, alpha_u=a_u, a_star=reconstruct_position(frame, a_s, a_u),
                         theta_s=th_s, theta_u=th_u)


def manifold_series(field: PlanarVelocityField, frame: SaddleFrame, times: Iterable[float],
                    T: float | None = None) -> list[ManifoldState]:
    return [manifold_state(field, frame, float(t), T) for t in times]


def write_states_csv(states: Iterable[ManifoldState], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in states:
            w.writerow([repr(float(v)) for v in s.row()])


def finite_window_trajectory_bounds(eps: float, frame: SaddleFrame, t: float, T: float) -> tuple[float, float]:
    """Leading-order bounds on the trajectory projections contributed by
    data outside ``[-T, T]`` of size at most ``eps``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    bound_s = eps * math.exp(frame.lambda_u * (t - T)) / frame.lambda_u
    bound_u = -eps * math.exp(frame.lambda_s * (t + T)) / frame.lambda_s
    return bound_s, bound_u


def finite_window_angle_bounds(eps_S: float, frame: SaddleFrame, t: float, T: float) -> tuple[float, float]:
    """Bounds on the angle errors caused by shears of size at most ``eps_S``
    outside ``[-T, T]``."""
    if eps_S < 0:
        raise ValueError("eps_S must be nonnegative")
    gap = frame.gap
    return (eps_S * math.exp(gap * (t - T)) / gap, eps_S * math.exp(-gap * (t + T)) / gap)


def shear_sup(field: PlanarVelocityField, frame: SaddleFrame, T: float | None = None, samples: int = 2001) -> float:
    """Grid supremum of ``|sigma_s|`` and ``|sigma_u|`` over the window."""
    T = _resolve_T(field, T)
    if math.isinf(T):
        raise ValueError("shear supremum needs a finite window")
    ts = np.linspace(-T, T, samples)
    s = ShearSignal(field, frame)
    return float(max(np.max(np.abs(s.sigma_s(ts))), np.max(np.abs(s.sigma_u(ts)))))
