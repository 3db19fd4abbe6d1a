"""The map u, the involution h, isochrony verdicts and isochronous designs.

``u(x) = sgn(x) sqrt(2 V(x))`` straightens the energy, ``h = u^{-1}(-u)``
pairs the two turning points of an orbit, and a center is isochronous exactly
when ``V = (V''(0)/8) (x - h(x))^2``.
"""
import csv
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, pi, sqrt
from typing import Optional

import numpy as np

from .errors import DomainError, ModelValidationError, NumericalError
from .expr import compile_expression
from .funcmodel import (
    TAYLOR_ORDER,
    ForceModel,
    contour_taylor_stack,
    fd_taylor_stack,
    validate_model,
)
from .numerics import derivative, invert_increasing, series_compose, series_revert

ISOCHRONOUS = "Isochronous"
NOT_ISOCHRONOUS = "NotIsochronous"
INCONCLUSIVE = "Inconclusive"

# ---------------------------------------------------------------- u and its inverse


def u_map(model, x):
    x = np.asarray(x, dtype=float)
    model.check_in_domain(x)
    return np.sign(x) * np.sqrt(2.0 * np.maximum(model.V(x), 0.0))


def u_prime(model, x):
    """``u'(x) = g(x)/u(x)``, with the limit ``sqrt(V''(0))`` at 0."""
    x = np.asarray(x, dtype=float)
    u = np.sign(x) * np.sqrt(2.0 * np.maximum(model.V(x), 0.0))
    with np.errstate(all="ignore"):
        out = model.g(x) / u
    return np.where(x == 0.0, sqrt(model.stiffness), out)


def image_interval(model):
    """``I = u(J)``, using limits at singular domain ends."""
    return model.u_image


def u_inverse(model, y):
    y = np.asarray(y, dtype=float)
    i_lo, i_hi = image_interval(model)
    if np.any((y <= i_lo) | (y >= i_hi)):
        bad = y[(y <= i_lo) | (y >= i_hi)].ravel()[0]
        raise DomainError(f"y={bad!r} outside the image interval I=({i_lo:.17g}, {i_hi:.17g})")
    if model.u_inverse_exact is not None:
        return np.asarray(model.u_inverse_exact(y), dtype=float)
    lo, hi = model.domain
    # u^-1(y) = y/sqrt(k) (1 + O(y)); below 1e-100 the correction is invisible
    shape = y.shape
    y = y.reshape(-1)
    x = y / sqrt(model.stiffness)
    nz = np.abs(y) >= 1e-100
    if np.any(nz):
        t = y[nz]
        x[nz] = invert_increasing(
            lambda s: u_map_unchecked(model, s),
            lambda s: u_prime(model, s),
            t,
            np.where(t < 0, lo, 0.0),
            np.where(t < 0, 0.0, hi),
            guess=t / sqrt(model.stiffness),
        )
    return x.reshape(shape)


def u_map_unchecked(model, x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.sqrt(2.0 * np.maximum(model.V(x), 0.0))


# ---------------------------------------------------------------- involution


@dataclass(frozen=True)
class InvolutionProbe:
    x: float
    h_x: float
    residual_V: float
    bracket: tuple


def quadratic_coefficient(model):
    """``a`` in ``h(x) = -x + a x^2 + ...``, i.e. ``-V'''(0) / (3 V''(0))``."""
    t = model.taylor_V0
    return -t[3] / (3.0 * t[2])


def involution_map(model, x):
    """Vectorized ``h(x)``; very small ``|x|`` uses the quadratic Taylor polynomial."""
    x = np.asarray(x, dtype=float)
    model.check_in_domain(x)
    y = -u_map_unchecked(model, x)
    i_lo, i_hi = image_interval(model)
    if np.any(y <= i_lo) or np.any(y >= i_hi):
        bad = x[(y <= i_lo) | (y >= i_hi)].ravel()[0]
        short = "negative" if bad > 0 else "positive"
        raise DomainError(
            f"conjugate point of x={bad!r} escapes J={model.domain}: the {short} side is too short"
        )
    h = u_inverse(model, y)
    lo, hi = model.domain
    tiny = np.abs(x) < 1e-6 * (hi - lo)
    if np.any(tiny):
        a = quadratic_coefficient(model)
        h = np.where(tiny, -x + a * x**2 - a * a * x**3, h)
    return h


def involution(model, x):
    x = float(x)
    h = float(involution_map(model, x))
    lo, hi = model.domain
    bracket = (lo, 0.0) if x > 0 else (0.0, hi)
    return InvolutionProbe(x=x, h_x=h, residual_V=abs(float(model.V(h) - model.V(x))), bracket=bracket)


def involution_probes(model, n=64, radius=None):
    """Probes at Chebyshev points of ``[-radius, radius]``, clustered toward 0 by default."""
    if radius is None:
        c = model.center
        radius = 0.1 * min(-c.x_max_neg, c.x_max_pos)
    k = np.arange(n)
    xs = radius * np.cos(pi * (k + 0.5) / n)
    xs = np.sort(xs)
    hs = involution_map(model, xs)
    res = np.abs(model.V(hs) - model.V(xs))
    lo, hi = model.domain
    return [
        InvolutionProbe(float(x), float(h), float(r), (lo, 0.0) if x > 0 else (0.0, hi))
        for x, h, r in zip(xs, hs, res)
    ]


def write_probes_csv(probes, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "h_x", "residual_V"])
        for p in probes:
            w.writerow([f"{p.x:.17g}", f"{p.h_x:.17g}", f"{p.residual_V:.17g}"])


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class IsochronyReport:
    model: str
    residual_sup: float
    nc4_residual: Optional[float]
    nc6_residual: Optional[float]
    verdict: str
    residual_tol: float
    nc_tol: float
    grid_n: int

    def to_dict(self):
        return dict(self.__dict__)


def necessary_residuals(taylor):
    """The order-4 and order-6 conditions an isochronous potential must satisfy."""
    v2, v3, v4, v5, v6 = (taylor[k] for k in range(2, 7))
    nc4 = v4 - 5.0 * v3**2 / (3.0 * v2)
    nc6 = v6 - 7.0 * v3 * v5 / v2 + 140.0 * v3**4 / (9.0 * v2**3)
    return nc4, nc6


def symmetric_grid(model, grid_n):
    c = model.center
    half = grid_n // 2
    s = np.linspace(0.0, 0.98, half + 1)[1:]
    return np.concatenate([c.x_max_neg * s[::-1], c.x_max_pos * s[: grid_n - half]])


def isochrony_report(model, grid_n=64):
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    k = model.stiffness
    xs = symmetric_grid(model, grid_n)
    hs = involution_map(model, xs)
    residual_sup = float(np.max(np.abs(model.V(xs) - k / 8.0 * (xs - hs) ** 2)))
    lo, hi = model.domain
    residual_tol = 1e-7 * k * (hi - lo) ** 2
    nc_tol = 1e-5 * k
    nc4 = nc6 = None
    t = model.taylor_V0
    if t is not None and len(t) > 6 and all(np.isfinite(t)):
        nc4, nc6 = (float(v) for v in necessary_residuals(t))
    if nc4 is not None and (abs(nc4) > nc_tol or abs(nc6) > nc_tol):
        verdict = NOT_ISOCHRONOUS
    elif residual_sup > residual_tol:
        verdict = NOT_ISOCHRONOUS
    elif nc4 is None:
        verdict = INCONCLUSIVE
    else:
        verdict = ISOCHRONOUS
    return IsochronyReport(
        model=model.name,
        residual_sup=residual_sup,
        nc4_residual=nc4,
        nc6_residual=nc6,
        verdict=verdict,
        residual_tol=residual_tol,
        nc_tol=nc_tol,
        grid_n=int(xs.size),
    )


def h_taylor_fit(probes, degree=None):
    """Fit ``h(x) + x`` by a polynomial starting at ``x^2``.

    Returns ``(a, b, odd_residuals)`` with ``a``, ``b`` the ``x^2`` and ``x^4``
    coefficients and ``odd_residuals = (c3 + a^2, c5 - (2 a^4 - 3 a b))``.
    """
    if len(probes) < 8:
        raise NumericalError("h_taylor_fit", f"need at least 8 probes, got {len(probes)}")
    x = np.array([p.x for p in probes])
    h = np.array([p.h_x for p in probes])
    r = float(np.max(np.abs(x)))
    if r < 1e-6:
        raise NumericalError("h_taylor_fit", f"probes span too small a range (max |x| = {r:.3e})")
    if degree is None:
        degree = min(len(probes) - 2, 15)
    degree = max(degree, 5)
    s = x / r
    powers = np.arange(2, degree + 1)
    A = s[:, None] ** powers[None, :]
    cond = np.linalg.cond(A)
    if not cond < 1e12:
        raise NumericalError("h_taylor_fit", f"ill-conditioned fit (condition number {cond:.3e})")
    coef, *_ = np.linalg.lstsq(A, h + x, rcond=None)
    fit_err = float(np.max(np.abs(A @ coef - (h + x))))
    if fit_err > 1e-6 * r:
        raise NumericalError(
            "h_taylor_fit", f"probes span too large a range for a degree-{degree} fit (misfit {fit_err:.3e})"
        )
    c = coef / r ** powers
    a, c3, b, c5 = c[0], c[1], c[2], c[3]
    return float(a), float(b), (float(c3 + a * a), float(c5 - (2 * a**4 - 3 * a * b)))


# ---------------------------------------------------------------- designs


@dataclass(frozen=True)
class DesignSpec:
    """``payload`` holds ``h`` / ``f`` (expression or callable) or ``coeffs``."""

    kind: str
    omega: float = 1.0
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("from_involution", "from_even_function", "from_period_polynomial"):
            raise ModelValidationError(f"unknown design kind {self.kind!r}")
        if not self.omega > 0:
            raise ModelValidationError(f"omega must be positive, got {self.omega}")


def _as_function(obj, what):
    if isinstance(obj, str):
        return compile_expression(obj), obj
    if callable(obj):
        return obj, None
    raise ModelValidationError(f"{what} must be an expression string or a callable")


def _complex_capable(fn):
    try:
        with np.errstate(all="ignore"):
            v = np.asarray(fn(np.array([1e-3 + 1e-3j])))
    except (TypeError, ValueError):
        return False
    return np.iscomplexobj(v) and np.all(np.isfinite(v)) and abs(v[0].imag) > 0


def _first_derivative(fn, bounds):
    """Complex-step derivative when ``fn`` is analytic-capable, otherwise Richardson."""
    if _complex_capable(fn):
        step = 1e-30

        def d(x):
            x = np.asarray(x, dtype=float)
            return np.imag(fn(x + 1j * step)) / step

        return d, True
    return (lambda x: derivative(fn, x, 1, bounds=bounds)), False


def _finish(name, domain, g, dg, d2g, V, taylor, mode, method, params, spec, u_inv=None):
    model = ForceModel(
        u_inverse_exact=u_inv,
        name=name,
        domain=domain,
        g=g,
        dg=dg,
        d2g=d2g,
        V=V,
        taylor_V0=tuple(float(v) for v in taylor),
        derivative_mode=mode,
        taylor_method=method,
        params=params,
        spec=spec,
    )
    validate_model(model)
    return model


def _taylor_from_V(Vc, g, domain, complex_ok):
    if complex_ok:
        stack = contour_taylor_stack(Vc, domain, order=TAYLOR_ORDER + 1)
        if stack is not None:
            stack[0] = stack[1] = 0.0
            return stack, "contour"
    return [0.0, *fd_taylor_stack(g, domain)], "finite-difference"


def design_from_involution(h, omega=1.0, domain=None, dh=None, d2h=None, name="designed_h", n_check=201):
    """Isochronous model ``V = (omega^2/8)(x - h(x))^2`` from an involution ``h`` of ``domain``."""
    if domain is None:
        raise ModelValidationError("design_from_involution needs a domain containing 0")
    lo, hi = map(float, domain)
    if not lo < 0 < hi:
        raise ModelValidationError(f"domain {domain} must contain 0 in its interior")
    hf, source = _as_function(h, "h")
    w2 = omega**2
    complex_ok = _complex_capable(hf)
    if dh is None:
        dh, exact = _first_derivative(hf, (lo, hi))
        mode = "analytic" if exact else "finite-difference"
    else:
        mode = "analytic"
    if d2h is None:
        def d2h(x, _dh=dh):
            return derivative(_dh, x, 1, bounds=(lo, hi))
        mode = "finite-difference"

    h0 = float(hf(0.0))
    dh0 = float(dh(0.0))
    if abs(h0) > 1e-12 or abs(dh0 + 1.0) > 1e-8:
        raise ModelValidationError(f"h must satisfy h(0)=0 and h'(0)=-1; got h(0)={h0:.3e}, h'(0)={dh0:.6g}")
    xs = np.linspace(lo, hi, n_check + 2)[1:-1]
    xs = xs[xs != 0.0]
    hx = np.asarray(hf(xs), dtype=float)
    inside = np.isfinite(hx) & (hx > lo) & (hx < hi)
    if inside.sum() < xs.size // 2:
        raise ModelValidationError(f"h maps most of {domain} outside itself")
    xs, hx = xs[inside], hx[inside]
    if np.any(np.sign(hx) != -np.sign(xs)):
        raise ModelValidationError("h must flip the sign of every non-zero x")
    back = np.max(np.abs(np.asarray(hf(hx), dtype=float) - xs))
    if not back <= 1e-8:
        raise ModelValidationError(f"h is not an involution: max |h(h(x)) - x| = {back:.3e}")

    def V(x):
        x = np.asarray(x, dtype=float)
        return 0.125 * w2 * (x - hf(x)) ** 2

    def g(x):
        x = np.asarray(x, dtype=float)
        return 0.25 * w2 * (x - hf(x)) * (1.0 - dh(x))

    def dg(x):
        x = np.asarray(x, dtype=float)
        return 0.25 * w2 * ((1.0 - dh(x)) ** 2 - (x - hf(x)) * d2h(x))

    def d2g(x):
        return derivative(dg, x, 1, bounds=(lo, hi))

    def Vc(z):
        return 0.125 * w2 * (z - hf(z)) ** 2

    taylor, method = _taylor_from_V(Vc, g, (lo, hi), complex_ok)
    params = {"kind": "from_involution", "omega": omega, "h": source, "domain": [lo, hi]}
    spec = {"family": "designed", "params": params} if source is not None else None
    return _finish(name, (lo, hi), g, dg, d2g, V, taylor, mode, method, params, spec)


def design_from_even(f, half_width, omega=1.0, df=None, d2f=None, name="designed_even", n_samples=512):
    """Isochronous model whose involution graph is the 45-degree rotation of ``y = f(t)``.

    The parametrization ``X(t) = (t + f(t))/sqrt(2)`` gives ``h(X(t)) = X(-t)``
    and ``V = omega^2 t^2 / 4``; ``t(x)`` is found by monotone root finding.
    """
    T = float(half_width)
    if not T > 0:
        raise ModelValidationError("half_width must be positive")
    ff, source = _as_function(f, "f")
    complex_ok = _complex_capable(ff)
    bounds = (-T * 1.5, T * 1.5)
    if df is None:
        df, exact = _first_derivative(ff, bounds)
        mode = "analytic" if exact else "finite-difference"
    else:
        mode = "analytic"
    if d2f is None:
        def d2f(t, _df=df):
            return derivative(_df, t, 1, bounds=bounds)
        mode = "finite-difference"

    ts = np.linspace(-T, T, n_samples)
    ft = np.asarray(ff(ts), dtype=float)
    if abs(float(ff(0.0))) > 1e-12:
        raise ModelValidationError(f"f(0) = {float(ff(0.0)):.3e} must vanish")
    odd_part = np.max(np.abs(ft - ft[::-1])) / max(1.0, float(np.max(np.abs(ft))))
    if odd_part > 1e-12:
        raise ModelValidationError(f"f is not even: max |f(t) - f(-t)| = {odd_part:.3e}")
    slope = 1.0 + np.asarray(df(ts), dtype=float)
    if not np.all(slope > 0):
        bad = ts[~(slope > 0)]
        raise ModelValidationError(
            f"rotated curve is not a graph: dX/dt <= 0 at t={bad[np.argmin(np.abs(bad))]:.6g}; shrink the interval"
        )
    r2 = sqrt(2.0)
    w2 = omega**2

    def X(t):
        return (t + ff(t)) / r2

    def dX(t):
        return (1.0 + df(t)) / r2

    lo, hi = float(X(-T)), float(X(T))

    def t_of(x):
        x = np.asarray(x, dtype=float)
        return invert_increasing(X, dX, x, -T, T, guess=r2 * x)

    def V(x):
        return 0.25 * w2 * t_of(x) ** 2

    def g(x):
        t = t_of(x)
        return w2 / r2 * t / (1.0 + df(t))

    def dg(x):
        t = t_of(x)
        s = 1.0 + df(t)
        return w2 * (s - t * d2f(t)) / s**3

    def d2g(x):
        return derivative(dg, x, 1, bounds=(lo, hi))

    # Taylor stack of V through the reverted series of X
    fser = None
    if complex_ok:
        stack = contour_taylor_stack(ff, (-T, T), order=TAYLOR_ORDER + 2)
        if stack is not None:
            fser = np.array([stack[k] / factorial(k) for k in range(TAYLOR_ORDER + 2)])
    method = "contour"
    if fser is None:
        d = fd_taylor_stack(ff, (-T, T), order=TAYLOR_ORDER + 2)
        fser = np.array([d[k] / factorial(k) for k in range(TAYLOR_ORDER + 2)])
        method = "finite-difference"
    n = TAYLOR_ORDER + 1
    xser = fser[:n] / r2
    xser[0] = 0.0
    xser[1] += 1.0 / r2
    tser = series_revert(xser, n)
    vser = 0.25 * w2 * np.convolve(tser, tser)[:n]
    taylor = [vser[k] * factorial(k) for k in range(n)]
    params = {"kind": "from_even_function", "omega": omega, "f": source, "half_width": T}
    spec = {"family": "designed", "params": params} if source is not None else None
    return _finish(name, (lo, hi), g, dg, d2g, V, taylor, mode, method, params, spec)


def monomial_weights(n):
    """``(2k)!!/(2k+1)!!`` for k < n, as exact fractions: 1, 2/3, 8/15, ..."""
    out = []
    w = Fraction(1)
    for k in range(n):
        if k:
            w *= Fraction(2 * k, 2 * k + 1)
        out.append(w)
    return out


def u_inverse_polynomial(coeffs, omega=1.0):
    """Ascending coefficients of the odd polynomial ``u^{-1}`` for ``T = (2 pi/omega) sum t_k y^(2k)``."""
    weights = monomial_weights(len(coeffs))
    poly = np.zeros(2 * len(coeffs))
    for k, (t, w) in enumerate(zip(coeffs, weights)):
        poly[2 * k + 1] = float(t) * float(w) / omega
    return poly


def design_from_period(coeffs, y_range, omega=1.0, name="designed_period"):
    """Model whose period at energy ``y^2/2`` is ``(2 pi/omega) sum coeffs[k] y^(2k)``."""
    coeffs = [float(c) for c in coeffs]
    if not coeffs or coeffs[0] != 1.0:
        raise ModelValidationError("period coefficients must start with t0 = 1")
    Y = float(y_range)
    if not Y > 0:
        raise ModelValidationError("y_range must be positive")
    ys = np.linspace(0.0, Y, 2001)
    Tpoly = np.polynomial.Polynomial(np.concatenate([[c, 0.0] for c in coeffs])[:-1])
    if not np.all(Tpoly(ys) > 0):
        raise ModelValidationError(f"prescribed T(y) is not positive on [0, {Y}]")
    P = np.polynomial.Polynomial(u_inverse_polynomial(coeffs, omega))
    dP, d2P, d3P = P.deriv(1), P.deriv(2), P.deriv(3)
    slope = dP(ys)
    if not np.all(slope > 0):
        where = float(ys[np.argmax(~(slope > 0))])
        raise ModelValidationError(
            f"u^-1 is not strictly increasing on [0, {Y}] (derivative vanishes near y={where:.6g}); T infeasible at this range"
        )
    lo, hi = float(P(-Y)), float(P(Y))

    def u(x):
        x = np.asarray(x, dtype=float)
        return invert_increasing(P, dP, x, -Y, Y, guess=omega * x)

    def V(x):
        return 0.5 * u(x) ** 2

    def g(x):
        y = u(x)
        return y / dP(y)

    def dg(x):
        y = u(x)
        p1 = dP(y)
        return (p1 - y * d2P(y)) / p1**3

    def d2g(x):
        y = u(x)
        p1, p2 = dP(y), d2P(y)
        return (-y * d3P(y) * p1 - 3.0 * (p1 - y * p2) * p2) / p1**5

    n = TAYLOR_ORDER + 1
    userie = series_revert(P.coef, n)
    vser = 0.5 * np.convolve(userie, userie)[:n]
    taylor = [vser[k] * factorial(k) for k in range(n)]
    params = {
        "kind": "from_period_polynomial",
        "omega": omega,
        "coeffs": coeffs,
        "y_range": Y,
        "u_inverse_coeffs": [float(c) for c in P.coef],
    }
    spec = {"family": "designed", "params": {k: v for k, v in params.items() if k != "u_inverse_coeffs"}}
    return _finish(name, (lo, hi), g, dg, d2g, V, taylor, "analytic", "series", params, spec, u_inv=P)


def design(spec: DesignSpec):
    p = spec.payload
    if spec.kind == "from_involution":
        return design_from_involution(p["h"], spec.omega, p.get("domain"), p.get("dh"), p.get("d2h"))
    if spec.kind == "from_even_function":
        return design_from_even(p["f"], p["half_width"], spec.omega, p.get("df"), p.get("d2f"))
    return design_from_period(p["coeffs"], p["y_range"], spec.omega)


def design_from_spec(params):
    """Rebuild a designed model from its JSON parameters."""
    params = dict(params)
    kind = params.pop("kind", None)
    omega = float(params.pop("omega", 1.0))
    params.pop("u_inverse_coeffs", None)
    try:
        return design(DesignSpec(kind=kind, omega=omega, payload=params))
    except KeyError as exc:
        raise ModelValidationError(f"design kind {kind!r} is missing {exc}") from None
