"""Exponentially weighted time integrals.

Computes ``int_lower^upper exp(rate (tau - shift)) h(tau) dtau`` with an
adaptive composite Simpson rule. Infinite endpoints are allowed on the side
toward which the weight decays; they are replaced by the point where the
weight has dropped by ``tail`` relative to the finite endpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergentWeight, ToleranceNotMet

MIN_PANELS = 64
MAX_DEPTH = 40
MAX_ACTIVE_PANELS = 1 << 20


@dataclass(frozen=True)
class ExpWeightedIntegral:
    rate: float
    integrand: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float
    abs_tol: float = 1e-10
    shift: float = 0.0
    tail: float = 1e-14

    def weight(self, tau) -> np.ndarray:
        return np.exp(self.rate * (np.asarray(tau, dtype=float) - self.shift))


def truncation_window(spec: ExpWeightedIntegral) -> tuple[float, float]:
    lo, hi = float(spec.lower), float(spec.upper)
    if math.isinf(lo) and math.isinf(hi):
        raise DivergentWeight("at most one endpoint may be infinite")
    span = math.log(1.0 / spec.tail) / abs(spec.rate) if spec.rate != 0 else math.inf
    if math.isinf(hi):
        if hi < 0:
            raise DivergentWeight("upper endpoint is -inf")
        if not spec.rate < 0:
            raise DivergentWeight(f"rate {spec.rate} does not decay toward +inf")
        hi = lo + span
    if math.isinf(lo):
        if lo > 0:
            raise DivergentWeight("lower endpoint is +inf")
        if not spec.rate > 0:
            raise DivergentWeight(f"rate {spec.rate} does not decay toward -inf")
        lo = hi - span
    return lo, hi


def _adaptive_simpson(F, lo: float, hi: float, tol: float) -> float:
    edges = np.linspace(lo, hi, MIN_PANELS + 1)
    a, b = edges[:-1], edges[1:]
    m = 0.5 * (a + b)
    fe = F(edges)
    Fa, Fb = fe[:-1], fe[1:]
    Fm = F(m)
    total = 0.0
    width = hi - lo
    for _ in range(MAX_DEPTH):
        l, r = 0.5 * (a + m), 0.5 * (m + b)
        lr = F(np.concatenate([l, r]))
        Fl, Fr = lr[: l.size], lr[l.size:]
        h = b - a
        coarse = h / 6.0 * (Fa + 4.0 * Fm + Fb)
        fine = h / 12.0 * (Fa + 4.0 * Fl + 2.0 * Fm + 4.0 * Fr + Fb)
        err = np.abs(fine - coarse)
        ok = err <= 15.0 * tol * h / width
        total += float(np.sum(fine[ok] + (fine[ok] - coarse[ok]) / 15.0))
        if np.all(ok):
            return total
        bad = ~ok
        if 2 * int(bad.sum()) > MAX_ACTIVE_PANELS:
            break
        a, m, b = a[bad], m[bad], b[bad]
        Fa, Fm, Fb, Fl, Fr = Fa[bad], Fm[bad], Fb[bad], Fl[bad], Fr[bad]
        # children [a, m] and [m, b]
        a, m, b = np.concatenate([a, m]), np.concatenate([l[bad], r[bad]]), np.concatenate([m, b])
        Fa, Fm, Fb = np.concatenate([Fa, Fm]), np.concatenate([Fl, Fr]), np.concatenate([Fm, Fb])
    raise ToleranceNotMet(f"{int(np.sum(~ok))} panels still above tolerance (depth or panel budget exhausted)")


def integrate_decaying(spec: ExpWeightedIntegral) -> float:
    lo, hi = truncation_window(spec)
    if hi == lo:
        return 0.0
    sign = 1.0
    if hi < lo:
        lo, hi, sign = hi, lo, -1.0

    def F(tau):
        vals = np.asarray(spec.integrand(tau), dtype=float)
        return spec.weight(tau) * np.broadcast_to(vals, np.shape(tau))

    return sign * _adaptive_simpson(F, lo, hi, spec.abs_tol)


def exp_integral(integrand, rate: float, lower: float, upper: float, *, shift: float = 0.0,
                 abs_tol: float = 1e-10) -> float:
    return integrate_decaying(ExpWeightedIntegral(rate, integrand, lower, upper, abs_tol=abs_tol, shift=shift))
