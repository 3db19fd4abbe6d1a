"""Planar period function ``T(x0)``, its derivative and amplitude scans.

After the substitution ``r = y0 sin s`` the period is a smooth periodic
integral, ``T(y0) = int_0^{2 pi} (u^{-1})'(y0 sin s) ds``, so the trapezoid
rule converges geometrically; nodes are doubled until two levels agree.
"""
import csv
import json
from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NumericalError
from .funcmodel import check_amplitude
from .isochrony import u_inverse, u_map
from .numerics import gauss_legendre01


@dataclass(frozen=True)
class PeriodSample:
    x0: float
    y0: float
    T: float
    T_prime: Optional[float]
    quadrature_error_estimate: float


@dataclass
class PeriodScan:
    model_ref: str
    samples: list
    critical_amplitudes: list = field(default_factory=list)

    @property
    def periods(self):
        return np.array([s.T for s in self.samples])

    def summary(self):
        T = self.periods
        return {
            "model": self.model_ref,
            "n": len(self.samples),
            "T_min": float(T.min()),
            "T_max": float(T.max()),
            "spread_rel": float((T.max() - T.min()) / T.mean()),
            "critical_amplitudes": [float(c) for c in self.critical_amplitudes],
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "y0", "T", "T_prime", "err_estimate"])
            for s in self.samples:
                tp = "" if s.T_prime is None else f"{s.T_prime:.17g}"
                w.writerow([f"{s.x0:.17g}", f"{s.y0:.17g}", f"{s.T:.17g}", tp, f"{s.quadrature_error_estimate:.17g}"])

    def write_json(self, path, extra=None):
        out = self.summary()
        if extra:
            out.update(extra)
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)


def inverse_derivative(model, r):
    """``(u^{-1})'(r) = u(x)/g(x)`` at ``x = u^{-1}(r)``; ``1/sqrt(V''(0))`` at 0."""
    r = np.asarray(r, dtype=float)
    x = u_inverse(model, r)
    with np.errstate(all="ignore"):
        out = r / model.g(x)
    return np.where(r == 0.0, 1.0 / sqrt(model.stiffness), out)


def period_of_energy_level(model, y0, atol=1e-10, rtol=1e-14, n_start=32, n_max=1 << 16):
    """``(T, error_estimate)`` for the orbit with ``u``-amplitude ``y0 > 0``."""
    # (u^{-1})'(y0 sin s) is symmetric about s = pi/2 and 3 pi/2: one half-period of s suffices
    n = n_start
    s = pi * (np.arange(n) + 0.5) / n - 0.5 * pi
    total = np.sum(inverse_derivative(model, y0 * np.sin(s)))
    T = 2.0 * pi * total / n
    while n < n_max:
        s_new = pi * (np.arange(2 * n) + 0.5) / (2 * n) - 0.5 * pi
        total = np.sum(inverse_derivative(model, y0 * np.sin(s_new)))
        T_new = 2.0 * pi * total / (2 * n)
        err = abs(T_new - T)
        n *= 2
        T = T_new
        if err <= max(atol, rtol * abs(T)):
            return T, err
    raise NumericalError("period", f"trapezoid rule did not converge with {n} nodes (last change {err:.3e})")


def period(model, x0, atol=1e-10):
    """Period of the planar orbit through ``(x0, 0)``."""
    x0 = float(x0)
    check_amplitude(model, x0)
    y0 = abs(float(u_map(model, x0)))
    T, err = period_of_energy_level(model, y0, atol=atol)
    if not (np.isfinite(T) and T > 0):
        raise NumericalError("period", f"non-positive or non-finite period {T!r} at x0={x0}")
    return PeriodSample(x0=x0, y0=y0, T=float(T), T_prime=None, quadrature_error_estimate=float(err))


def period_turning_point(model, x0, epsabs=1e-13, epsrel=1e-12):
    """Period from the direct turning-point integral ``2 int_{h(x0)}^{x0} dx / sqrt(2(V(x0) - V(x)))``.

    Both endpoint singularities are removed by ``x = c (1 - w^2)`` on each half.
    ``V(x0) - V(x)`` is integrated from ``g`` so it keeps relative accuracy.
    """
    x0 = float(x0)
    check_amplitude(model, x0)
    e0 = float(model.V(x0))
    lo, hi = model.domain
    other = lo if x0 > 0 else hi
    far = other * (1 - 1e-12)
    v_far = float(model.V(far)) if np.isfinite(model.V(far)) else np.inf
    if not v_far > e0:
        raise DomainError(f"no conjugate turning point for x0={x0} inside J")
    x1 = brentq(lambda s: float(model.V(s)) - e0, 0.0, far, xtol=1e-15, rtol=8.9e-16)
    nodes, weights = gauss_legendre01(40)

    def drop(x, top):
        # V(top) - V(x) = int_x^top g
        span = top - x
        return span * np.sum(weights * model.g(x + span * nodes))

    def half(turn):
        def integrand(w):
            x = turn * (1.0 - w * w)
            d = drop(x, turn)
            return 2.0 * abs(turn) * w / sqrt(2.0 * d)

        val, _ = quad(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=200)
        return val

    return 2.0 * (half(x0) + half(x1))


def period_derivative(model, x0, rel_step=0.02, levels=3):
    """``dT/dx0`` by Richardson-extrapolated central differences of the period."""
    x0 = float(x0)
    check_amplitude(model, x0)
    c = model.center
    edge = c.x_max_pos if x0 > 0 else c.x_max_neg
    h = min(rel_step * abs(x0), 0.25 * abs(edge - x0), 0.25 * abs(x0))
    if h < 1e-8 * abs(x0):
        raise NumericalError("period_derivative", f"step underflow at x0={x0} (too close to the domain edge)")
    estimates = []
    for k in range(levels):
        step = h / 2**k
        tp = period(model, x0 + step, atol=1e-13).T
        tm = period(model, x0 - step, atol=1e-13).T
        estimates.append((tp - tm) / (2 * step))
    for k in range(1, levels):
        f = 4.0**k - 1.0
        estimates = [estimates[i + 1] + (estimates[i + 1] - estimates[i]) / f for i in range(len(estimates) - 1)]
    return float(estimates[0])


def _noise_band(model, x0, T):
    return 1e-8 * T / abs(x0)


def period_scan(model, x_lo, x_hi, n=20, locate=True):
    """Periods on ``n`` geometrically spaced amplitudes in ``[x_lo, x_hi]``."""
    if not 0 < x_lo < x_hi:
        raise DomainError(f"need 0 < x_lo < x_hi, got ({x_lo}, {x_hi})")
    if n < 8:
        raise ValueError("period_scan needs n >= 8")
    check_amplitude(model, x_lo)
    check_amplitude(model, x_hi)
    xs = x_lo * (x_hi / x_lo) ** (np.arange(n) / (n - 1))
    samples = []
    for x in xs:
        s = period(model, x)
        tp = period_derivative(model, x)
        samples.append(PeriodSample(s.x0, s.y0, s.T, tp, s.quadrature_error_estimate))
    critical = []
    if locate:
        signs = []
        for s in samples:
            band = _noise_band(model, s.x0, s.T)
            signs.append(0 if abs(s.T_prime) <= band else int(np.sign(s.T_prime)))
        last = None
        for i, sg in enumerate(signs):
            if sg == 0:
                continue
            if last is not None and sg != signs[last]:
                a, b = samples[last].x0, samples[i].x0
                critical.append(
                    brentq(lambda x: period_derivative(model, x), a, b, xtol=1e-8 * b, rtol=1e-8)
                )
            last = i
    return PeriodScan(model_ref=model.name, samples=samples, critical_amplitudes=critical)
