"""Finite differences, monotone inversion and fixed quadrature rules."""
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import NumericalError

EPS = np.finfo(float).eps


@lru_cache(maxsize=None)
def central_weights(order):
    """Weights of the O(h^2) central stencil for the ``order``-th derivative.

    Returns ``(offsets, weights)``; the derivative is ``sum(w * f(x + o*h)) / h**order``.
    """
    p = (order + 1) // 2
    offsets = np.arange(-p, p + 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(2 * p + 1)
    rhs[order] = factorial(order)
    return offsets, np.linalg.solve(vander, rhs)


def derivative(f, x, order=1, h=None, levels=4, bounds=None):
    """Richardson-extrapolated central difference of ``f`` at ``x`` (vectorized in ``x``).

    The base step follows ``max(|x|, 1) * eps**(1/(order+2))`` inflated by
    ``2**(levels-1)`` so the finest level sits at the roundoff-optimal step.
    ``bounds`` keeps every stencil point strictly inside an open interval.
    """
    x = np.asarray(x, dtype=float)
    offsets, weights = central_weights(order)
    reach = offsets[-1]
    if h is None:
        h = np.maximum(np.abs(x), 1.0) * EPS ** (1.0 / (order + 2)) * 2.0 ** (levels - 1)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape).copy()
    if bounds is not None:
        lo, hi = bounds
        room = np.minimum(x - lo, hi - x) / (reach * 1.05)
        h = np.minimum(h, room)
    estimates = []
    for level in range(levels):
        step = h / 2.0**level
        acc = np.zeros_like(x)
        for o, w in zip(offsets, weights):
            if w != 0.0:
                acc = acc + w * f(x + o * step)
        estimates.append(acc / step**order)
    # Neville tableau in h^2
    for k in range(1, levels):
        factor = 4.0**k - 1.0
        estimates = [
            estimates[i + 1] + (estimates[i + 1] - estimates[i]) / factor
            for i in range(len(estimates) - 1)
        ]
    return estimates[0]


def invert_increasing(f, df, target, lo, hi, guess=None, rtol=4 * EPS, maxiter=200):
    """Solve ``f(x) = target`` for increasing ``f`` on ``(lo, hi)``, elementwise.

    Newton steps are kept inside a shrinking bracket and replaced by bisection
    whenever they leave it.  ``f`` and ``df`` must accept arrays.
    """
    target = np.asarray(target, dtype=float)
    a = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    b = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    if guess is None:
        x = 0.5 * (a + b)
    else:
        x = np.broadcast_to(np.asarray(guess, dtype=float), target.shape).copy()
        inside = (x > a) & (x < b)
        x = np.where(inside, x, 0.5 * (a + b))
    active = np.ones(target.shape, dtype=bool)
    for _ in range(maxiter):
        with np.errstate(all="ignore"):
            fx = f(x) - target
            d = df(x)
        exact = fx == 0
        b = np.where(fx > 0, x, b)
        a = np.where(fx < 0, x, a)
        with np.errstate(all="ignore"):
            xn = x - fx / d
        bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        xn = np.where(bad, 0.5 * (a + b), xn)
        xn = np.where(exact | ~active, x, xn)
        step = np.abs(xn - x)
        scale = np.maximum(np.abs(xn), np.finfo(float).tiny)
        done = exact | (step <= rtol * scale) | (b - a <= rtol * np.maximum(np.abs(a), np.abs(b)))
        x = xn
        active &= ~done
        if not active.any():
            return x
    raise NumericalError("invert_increasing", f"no convergence after {maxiter} iterations")


@lru_cache(maxsize=None)
def gauss_legendre01(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def integrate_from_zero(f, x, n=32, panels=8):
    """``int_0^x f`` by composite Gauss-Legendre, vectorized over ``x``.

    Scales with ``x`` so the result keeps relative accuracy as ``x -> 0``.
    """
    x = np.asarray(x, dtype=float)
    nodes, weights = gauss_legendre01(n)
    t = ((np.arange(panels)[:, None] + nodes[None, :]) / panels).ravel()
    w = np.tile(weights, panels) / panels
    vals = f(x[..., None] * t)
    return x * np.sum(vals * w, axis=-1)


def taylor_coefficients_complex(f, n_coeffs, radius, n_points=64):
    """Taylor coefficients of an analytic ``f`` at 0 from its values on a circle.

    ``f`` must accept complex arrays and be analytic on the closed disc.
    """
    k = np.arange(n_points)
    z = radius * np.exp(2j * np.pi * k / n_points)
    coeffs = np.fft.fft(f(z)) / n_points
    return np.real(coeffs[:n_coeffs]) / radius ** np.arange(n_coeffs)


def series_compose(outer, inner, n):
    """Coefficients of ``outer(inner(x))`` truncated to degree ``n - 1``; ``inner[0]`` must be 0."""
    out = np.zeros(n)
    power = np.zeros(n)
    power[0] = 1.0
    inner = np.asarray(inner, dtype=float)[:n]
    for c in outer[:n]:
        out += c * power
        power = np.convolve(power, inner)[:n]
    return out


def series_revert(coeffs, n):
    """Compositional inverse of ``sum coeffs[k] x^k`` (``coeffs[0] = 0``, ``coeffs[1] != 0``).

    Fixed-point iteration ``t <- (x - sum_{k>=2} a_k t^k) / a_1`` gains one
    correct order per sweep.
    """
    a = np.zeros(n)
    m = min(n, len(coeffs))
    a[:m] = coeffs[:m]
    if a[0] != 0.0 or a[1] == 0.0:
        raise ValueError("series must vanish at 0 with non-zero linear term")
    higher = a.copy()
    higher[:2] = 0.0
    t = np.zeros(n)
    t[1] = 1.0 / a[1]
    for _ in range(n):
        t = -series_compose(higher, t, n) / a[1]
        t[1] += 1.0 / a[1]
    return t
