"""Force models ``g`` with potentials, derivative stacks and admissible domains."""
from dataclasses import dataclass, field
from functools import cached_property
from math import factorial, pi, sqrt
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, ModelValidationError
from .expr import compile_expression
from .numerics import derivative, integrate_from_zero, taylor_coefficients_complex

DELTA = 1e-3
TAYLOR_ORDER = 6


@dataclass(frozen=True)
class CenterBound:
    e_max: float
    x_max_pos: float
    x_max_neg: float


@dataclass(frozen=True, eq=False)
class ForceModel:
    """One system ``x'' = -g(x)`` on an open interval ``domain`` containing 0.

    ``taylor_V0[k]`` is the k-th derivative of V at 0, k = 0..6, when known.
    """

    name: str
    domain: tuple
    g: Callable
    dg: Callable
    V: Callable
    d2g: Optional[Callable] = None
    taylor_V0: Optional[tuple] = None
    derivative_mode: str = "analytic"
    taylor_method: str = "closed-form"
    params: dict = field(default_factory=dict)
    spec: Optional[dict] = None
    u_inverse_exact: Optional[Callable] = None

    @property
    def stiffness(self):
        """V''(0) = g'(0)."""
        if self.taylor_V0 is not None:
            return float(self.taylor_V0[2])
        return float(self.dg(0.0))

    def contains(self, x):
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        return (x > lo) & (x < hi)

    def check_in_domain(self, x, what="x"):
        if not np.all(self.contains(x)):
            raise DomainError(f"{what}={x!r} outside J={self.domain} of model {self.name!r}")

    @cached_property
    def center(self):
        return center_bound(self)

    @cached_property
    def u_image(self):
        """``u(J)``, with limits at singular domain ends."""
        lo, hi = self.domain
        return (-sqrt(2.0 * _edge_value(self.V, lo)), sqrt(2.0 * _edge_value(self.V, hi)))

    def __repr__(self):
        return f"ForceModel({self.name!r}, domain={self.domain}, params={self.params})"


def _arr(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------- catalog


def harmonic(omega=1.0, domain=(-10.0, 10.0)):
    w2 = omega**2
    return ForceModel(
        name="harmonic",
        domain=tuple(map(float, domain)),
        g=lambda x: w2 * _arr(x),
        dg=lambda x: w2 + 0.0 * _arr(x),
        d2g=lambda x: 0.0 * _arr(x),
        V=lambda x: 0.5 * w2 * _arr(x) ** 2,
        taylor_V0=(0.0, 0.0, w2, 0.0, 0.0, 0.0, 0.0),
        params={"omega": omega},
        spec={"family": "harmonic", "params": {"omega": omega}, "domain": list(domain)},
    )


def pendulum(domain=None):
    if domain is None:
        domain = (-pi + DELTA, pi - DELTA)
    return ForceModel(
        name="pendulum",
        domain=tuple(map(float, domain)),
        g=lambda x: np.sin(_arr(x)),
        dg=lambda x: np.cos(_arr(x)),
        d2g=lambda x: -np.sin(_arr(x)),
        V=lambda x: 2.0 * np.sin(0.5 * _arr(x)) ** 2,
        taylor_V0=(0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0),
        spec={"family": "pendulum", "params": {}, "domain": list(domain)},
    )


def _cubic_domain(alpha, beta, gamma, reach=10.0):
    lo, hi = -reach, reach
    roots = np.roots([gamma, beta, alpha]) if gamma != 0 or beta != 0 else []
    for r in roots:
        if abs(r.imag) < 1e-14 * max(1.0, abs(r)):
            r = r.real
            if r > 0:
                hi = min(hi, r * (1 - DELTA))
            elif r < 0:
                lo = max(lo, r * (1 - DELTA))
    return lo, hi


def cubic(alpha=1.0, beta=0.0, gamma=0.0, domain=None):
    if alpha <= 0:
        raise ModelValidationError(f"cubic family needs alpha > 0, got {alpha}")
    if domain is None:
        domain = _cubic_domain(alpha, beta, gamma)
    return ForceModel(
        name="cubic",
        domain=tuple(map(float, domain)),
        g=lambda x: (alpha + (beta + gamma * _arr(x)) * _arr(x)) * _arr(x),
        dg=lambda x: alpha + (2 * beta + 3 * gamma * _arr(x)) * _arr(x),
        d2g=lambda x: 2 * beta + 6 * gamma * _arr(x),
        V=lambda x: (alpha / 2 + (beta / 3 + gamma / 4 * _arr(x)) * _arr(x)) * _arr(x) ** 2,
        taylor_V0=(0.0, 0.0, alpha, 2 * beta, 6 * gamma, 0.0, 0.0),
        params={"alpha": alpha, "beta": beta, "gamma": gamma},
        spec={
            "family": "cubic",
            "params": {"alpha": alpha, "beta": beta, "gamma": gamma},
            "domain": list(domain),
        },
    )


def _falling(a, n):
    out = 1.0
    for j in range(n):
        out *= a - j
    return out


def _conjugate_edge(V, edge, other_limit):
    """Point on the far side of 0 with the same potential as ``edge``."""
    target = float(V(edge))
    side = np.sign(other_limit)
    x = side * 1e-3
    while V(x) < target:
        x *= 2.0
        if abs(x) > abs(other_limit):
            return other_limit
    return brentq(lambda s: float(V(s)) - target, 0.0, x, xtol=1e-15, rtol=8.9e-16)


def sqrt_isochrone(omega=1.0, lam=2.0, domain=None):
    """``g = (w^2/lam)(1 - 1/sqrt(1 + 2 lam x))``; needs ``1 + 2 lam x > 0``."""
    if lam == 0:
        raise ModelValidationError("sqrt isochrone needs lambda != 0")
    w2 = omega**2

    def g(x):
        x = np.asarray(x) if np.iscomplexobj(x) else _arr(x)
        r = np.sqrt(1.0 + 2 * lam * x)
        return 2 * w2 * x / ((1.0 + r) * r)

    def dg(x):
        return w2 * (1.0 + 2 * lam * _arr(x)) ** -1.5

    def d2g(x):
        return -3 * lam * w2 * (1.0 + 2 * lam * _arr(x)) ** -2.5

    def V(x):
        x = _arr(x)
        return 2 * w2 * x**2 / (1.0 + np.sqrt(1.0 + 2 * lam * x)) ** 2

    if domain is None:
        edge = -1.0 / (2 * lam)
        if lam > 0:
            lo = edge + DELTA
            domain = (lo, _conjugate_edge(V, lo, 1e6))
        else:
            hi = edge - DELTA
            domain = (_conjugate_edge(V, hi, -1e6), hi)
    derivs = [0.0] + [-(w2 / lam) * (2 * lam) ** n * _falling(-0.5, n) for n in range(1, 6)]
    return ForceModel(
        name="sqrt_iso",
        domain=tuple(map(float, domain)),
        g=g,
        dg=dg,
        d2g=d2g,
        V=V,
        taylor_V0=(0.0, *derivs),
        params={"omega": omega, "lambda": lam},
        spec={"family": "sqrt_iso", "params": {"omega": omega, "lambda": lam}, "domain": list(domain)},
    )


def quartic_isochrone(omega=1.0, lam=1.0, domain=None):
    """``g = (w^2/4)(lam + x - lam^4/(lam + x)^3)``; needs ``lam + x`` of the sign of ``lam``."""
    if lam == 0:
        raise ModelValidationError("quartic isochrone needs lambda != 0")
    w2 = omega**2
    l4 = lam**4

    def g(x):
        x = np.asarray(x) if np.iscomplexobj(x) else _arr(x)
        s = lam + x
        # s - lam^4/s^3 without cancellation near x = 0
        return 0.25 * w2 * x * (2 * lam + x) * (s * s + lam * lam) / s**3

    def dg(x):
        s = lam + _arr(x)
        return 0.25 * w2 * (1.0 + 3 * l4 / s**4)

    def d2g(x):
        s = lam + _arr(x)
        return -3.0 * w2 * l4 / s**5

    def V(x):
        x = _arr(x)
        return 0.125 * w2 * (x * (2 * lam + x) / (lam + x)) ** 2

    if domain is None:
        near = -0.75 * lam
        far = 0.75 * lam**2 / (0.25 * lam)
        domain = (near, far) if lam > 0 else (far, near)
    derivs = [0.0, w2] + [
        -0.25 * w2 * l4 * _falling(-3.0, n) * lam ** (-3.0 - n) for n in range(2, 6)
    ]
    return ForceModel(
        name="quartic_iso",
        domain=tuple(map(float, domain)),
        g=g,
        dg=dg,
        d2g=d2g,
        V=V,
        taylor_V0=(0.0, *derivs),
        params={"omega": omega, "lambda": lam},
        spec={"family": "quartic_iso", "params": {"omega": omega, "lambda": lam}, "domain": list(domain)},
    )


def _single_well_trim(g, lo, hi, n=4001):
    """Shrink ``(lo, hi)`` to the largest sub-interval where sign(g) = sign(x)."""
    xs = np.linspace(0.0, hi, n)[1:]
    bad = np.nonzero(~(g(xs) > 0))[0]
    if bad.size:
        hi = xs[bad[0]] * (1 - DELTA) if bad[0] > 0 else xs[0]
    xs = np.linspace(0.0, lo, n)[1:]
    bad = np.nonzero(~(g(xs) < 0))[0]
    if bad.size:
        lo = xs[bad[0]] * (1 - DELTA) if bad[0] > 0 else xs[0]
    return lo, hi


def discriminant_vanishes(b1, c1):
    """``b1^2 - 4 c1 == 0`` up to the rounding of its two terms."""
    return abs(b1 * b1 - 4 * c1) <= 64 * np.finfo(float).eps * max(b1 * b1, 4 * abs(c1))


def generic_superintegrable(omega=1.0, b1=1.0, c1=1.0, domain=None, reach=10.0):
    """The ``a = 1``, ``b1^2 != 4 c1`` superintegrable family."""
    D = b1**2 - 4 * c1
    if b1 == 0 or c1 == 0 or discriminant_vanishes(b1, c1):
        raise ModelValidationError(
            f"generic family needs b1 != 0, c1 != 0 and b1^2 - 4 c1 != 0 (got b1={b1}, c1={c1})"
        )
    w2 = omega**2
    k0 = 2 * c1 * w2 / D**2

    def radicand(q):
        return 1.0 + q * (b1 + q) / c1

    def g(q):
        q = np.asarray(q) if np.iscomplexobj(q) else _arr(q)
        s = np.sqrt(radicand(q))
        s_minus_1 = q * (b1 + q) / (c1 * (s + 1.0))
        return k0 * (2 * q * (b1**2 + 4 * c1) + b1 * s_minus_1 / s * (b1**2 - 4 * c1 * (2 * s + 1.0)))

    def dg(q):
        q = _arr(q)
        R = radicand(q)
        Rp = (b1 + 2 * q) / c1
        return k0 * (2 * (b1**2 + 4 * c1) + 0.5 * b1 * D * R**-1.5 * Rp - 4 * b1 * c1 * R**-0.5 * Rp)

    def d2g(q):
        q = _arr(q)
        R = radicand(q)
        Rp = (b1 + 2 * q) / c1
        Rpp = 2.0 / c1
        t1 = 0.5 * b1 * D * (-1.5 * R**-2.5 * Rp**2 + R**-1.5 * Rpp)
        t2 = -4 * b1 * c1 * (-0.5 * R**-1.5 * Rp**2 + R**-0.5 * Rpp)
        return k0 * (t1 + t2)

    roots = np.roots([1.0, b1, c1])
    rho = float(np.min(np.abs(roots)))
    coeffs = taylor_coefficients_complex(g, TAYLOR_ORDER, 0.5 * min(rho, 1.0))
    derivs = [float(coeffs[n]) * factorial(n) for n in range(TAYLOR_ORDER)]
    derivs[0] = 0.0
    taylor = (0.0, *derivs)
    def V(q):
        q = np.asarray(q) if np.iscomplexobj(q) else _arr(q)
        rr = q * (b1 + q) / c1
        with np.errstate(invalid="ignore"):
            s = np.sqrt(1.0 + rr)
        sig = rr / (s + 1.0)
        # O(q) terms of the closed form cancel analytically; what is left is O(q^2)
        return k0 * c1 * (4 * q * q + b1**2 * rr * sig / (s + 1.0) - 4 * b1 * q * sig)

    if domain is None:
        lo, hi = -reach, reach
        for r in roots:
            if abs(r.imag) < 1e-14:
                r = r.real
                if r > 0:
                    hi = min(hi, r * (1 - DELTA))
                else:
                    lo = max(lo, r * (1 - DELTA))
        domain = _single_well_trim(g, lo, hi)
    return ForceModel(
        name="generic_super",
        domain=tuple(map(float, domain)),
        g=g,
        dg=dg,
        d2g=d2g,
        V=V,
        taylor_V0=taylor,
        taylor_method="contour",
        params={"omega": omega, "b1": b1, "c1": c1},
        spec={
            "family": "generic_super",
            "params": {"omega": omega, "b1": b1, "c1": c1},
            "domain": list(domain),
        },
    )


def builtin_catalog():
    return [
        harmonic(),
        pendulum(),
        cubic(1.0, 0.3, 0.0),
        sqrt_isochrone(1.0, 2.0),
        quartic_isochrone(1.0, 1.0),
        generic_superintegrable(1.0, 1.0, 1.0),
    ]


# ---------------------------------------------------------------- expression models


def contour_taylor_stack(f, domain, order=TAYLOR_ORDER):
    """Derivatives ``f^(n)(0)``, n < order, from contour integrals, or None if unreliable.

    Two radii must agree; a mismatch signals a singularity or a non-analytic
    branch inside the disc.  Larger discs lose fewer digits to roundoff, so
    the widest admissible pair is tried first; if no pair agrees the caller
    falls back to differences.
    """
    lo, hi = domain
    reach = min(-lo, hi, 1.0)
    for frac in (0.5, 0.25):
        stack = _contour_pair(f, order, frac * reach)
        if stack is not None:
            return stack
    return None


def _contour_pair(f, order, radius):
    try:
        with np.errstate(all="ignore"):
            c1 = taylor_coefficients_complex(f, order, radius)
            c2 = taylor_coefficients_complex(f, order, 0.5 * radius)
    except (TypeError, ValueError):
        return None
    if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(c2))):
        return None
    with np.errstate(all="ignore"):
        size = np.max(np.abs(f(radius * np.exp(2j * np.pi * np.arange(64) / 64))))
    floor = 1e-11 * size / (0.5 * radius) ** np.arange(order)
    if np.any(np.abs(c1 - c2) > 1e-7 * (np.abs(c1) + np.abs(c2)) + floor):
        return None
    return [float(c1[n]) * factorial(n) for n in range(order)]


def fd_taylor_stack(f, domain, order=TAYLOR_ORDER):
    out = [float(f(0.0))]
    for n in range(1, order):
        out.append(float(derivative(f, 0.0, n, bounds=domain)))
    return out


def model_from_callable(g, domain, name, dg=None, d2g=None, V=None, params=None, spec=None):
    """Wrap a vectorized callable ``g`` into a model, filling gaps numerically."""
    domain = tuple(map(float, domain))
    mode = "analytic" if dg is not None else "finite-difference"
    if dg is None:
        def dg(x):
            return derivative(g, x, 1, bounds=domain)
    if d2g is None:
        def d2g(x):
            return derivative(g, x, 2, bounds=domain)
    if V is None:
        def V(x):
            return integrate_from_zero(g, x)
    stack = contour_taylor_stack(g, domain)
    method = "contour"
    if stack is None:
        stack = fd_taylor_stack(g, domain)
        method = "finite-difference"
    stack[0] = float(g(0.0))
    return ForceModel(
        name=name,
        domain=domain,
        g=g,
        dg=dg,
        d2g=d2g,
        V=V,
        taylor_V0=(0.0, *stack),
        derivative_mode=mode,
        taylor_method=method,
        params=params or {},
        spec=spec,
    )


def model_from_expression(source, domain, name=None):
    """Model whose force is the expression ``source``; validated before return."""
    expression = compile_expression(source)
    lo, hi = map(float, domain)
    if not lo < 0 < hi:
        raise ModelValidationError(f"domain {domain} must contain 0 in its interior")
    probe = np.linspace(lo, hi, 203)[1:-1]
    values = expression(probe)
    if not np.all(np.isfinite(values)):
        bad = probe[~np.isfinite(values)][0]
        raise DomainError(f"expression {source!r} is not finite at x={bad:.6g} inside {domain}")
    model = model_from_callable(
        expression,
        (lo, hi),
        name=name or "expression",
        params={"source": source},
        spec={"family": "expression", "params": {"source": source}, "domain": [lo, hi]},
    )
    validate_model(model)
    return model


# ---------------------------------------------------------------- validation


def validation_grid(model, n=201):
    lo, hi = model.domain
    xs = np.linspace(lo, hi, n + 2)[1:-1]
    return xs[xs != 0.0]


def validate_model(model, n=201):
    """Check the model invariants; raise ModelValidationError or return a report dict."""
    g0 = float(model.g(0.0))
    tol_g0 = 0.0 if model.derivative_mode == "analytic" else 1e-12
    if abs(g0) > tol_g0:
        raise ModelValidationError(f"g(0) = {g0:.3e} but must vanish")
    k = model.stiffness
    if not k > 0:
        raise ModelValidationError(f"g'(0) = {k:.6g} violates g'(0) > 0")
    xs = validation_grid(model, n)
    gx = model.g(xs)
    wrong = np.sign(gx) != np.sign(xs)
    if wrong.any():
        raise ModelValidationError(
            f"g must vanish only at 0 with the sign of x; fails at x={xs[wrong][0]:.6g}"
        )
    grid = np.concatenate([xs[xs < 0], [0.0], xs[xs > 0]])
    Vx = model.V(grid)
    neg = Vx[grid <= 0]
    pos = Vx[grid >= 0]
    if not (np.all(np.diff(neg) < 0) and np.all(np.diff(pos) > 0)):
        raise ModelValidationError("V is not a single well on the domain grid")
    fd = derivative(model.V, xs, 1, levels=2, bounds=model.domain)
    mismatch = np.max(np.abs(fd - gx) / np.maximum(1.0, np.abs(gx)))
    if mismatch > 1e-6:
        raise ModelValidationError(f"dV/dx differs from g by {mismatch:.3e}")
    return {
        "name": model.name,
        "domain": list(model.domain),
        "g0": g0,
        "stiffness": k,
        "grid_points": int(xs.size),
        "dV_minus_g": float(mismatch),
        "derivative_mode": model.derivative_mode,
        "taylor_method": model.taylor_method,
        "taylor_V0": list(model.taylor_V0) if model.taylor_V0 is not None else None,
    }


def quadrature_check(model, points=(-0.5, 0.5)):
    """Largest gap between ``model.V`` and adaptive quadrature of ``g`` at a few points."""
    lo, hi = model.domain
    worst = 0.0
    for s in points:
        x = s * (hi if s > 0 else -lo)
        ref, _ = quad(lambda t: float(model.g(t)), 0.0, x, epsabs=1e-13, epsrel=1e-13)
        worst = max(worst, abs(float(model.V(x)) - ref))
    return worst


# ---------------------------------------------------------------- center region


def _edge_value(V, edge):
    """V approached from inside at a domain end (the limit if V is singular there)."""
    with np.errstate(all="ignore"):
        v = float(V(edge))
    if np.isfinite(v):
        return v
    best = np.nan
    for k in range(10, 53):
        with np.errstate(all="ignore"):
            val = float(V(edge * (1.0 - 2.0**-k)))
        if np.isfinite(val):
            best = val
        else:
            break
    return best


def center_bound(model):
    """Largest energy whose planar orbits stay in J, with the amplitude limits."""
    lo, hi = model.domain
    xs = validation_grid(model, 401)
    Vx = model.V(np.concatenate([xs[xs < 0], [0.0], xs[xs > 0]]))
    split = int(np.sum(xs < 0))
    if not (np.all(np.diff(Vx[: split + 1]) < 0) and np.all(np.diff(Vx[split:]) > 0)):
        raise ModelValidationError(f"degenerate domain: V is not monotone on each side of 0 in {model.domain}")
    v_lo, v_hi = _edge_value(model.V, lo), _edge_value(model.V, hi)
    if not (np.isfinite(v_lo) or np.isfinite(v_hi)):
        raise ModelValidationError("V is not finite near either end of the domain")
    e_max = float(np.nanmin([v_lo, v_hi]))
    if not e_max > 0:
        raise ModelValidationError(f"e_max = {e_max} must be positive")

    def level(edge):
        if not float(model.V(edge)) > e_max:
            return edge
        return brentq(lambda s: float(model.V(s)) - e_max, 0.0, edge, xtol=1e-15, rtol=8.9e-16)

    x_pos = hi if v_hi <= v_lo else level(hi)
    x_neg = lo if v_lo <= v_hi else level(lo)
    return CenterBound(e_max=e_max, x_max_pos=float(x_pos), x_max_neg=float(x_neg))


def check_amplitude(model, x0):
    """Raise DomainError unless ``0 < V(x0) < e_max`` (x0 may have either sign)."""
    if not np.isfinite(x0) or x0 == 0 or not model.contains(x0):
        raise DomainError(f"amplitude x0={x0!r} is not an admissible non-zero point of J={model.domain}")
    if not float(model.V(x0)) < model.center.e_max:
        raise DomainError(
            f"amplitude x0={x0!r} has V={float(model.V(x0)):.6g} >= e_max={model.center.e_max:.6g}"
        )


# ---------------------------------------------------------------- JSON specs

FAMILIES = ("harmonic", "pendulum", "cubic", "sqrt_iso", "quartic_iso", "generic_super", "expression")


def model_from_spec(spec):
    """Build a model from its JSON description (see README for the schema)."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ModelValidationError("model spec must be an object with a 'family' key")
    family = spec["family"]
    params = dict(spec.get("params", {}))
    domain = spec.get("domain")
    if domain is not None:
        domain = tuple(float(v) for v in domain)
    try:
        if family == "harmonic":
            return harmonic(params.get("omega", 1.0), domain or (-10.0, 10.0))
        if family == "pendulum":
            return pendulum(domain)
        if family == "cubic":
            return cubic(params.get("alpha", 1.0), params.get("beta", 0.0), params.get("gamma", 0.0), domain)
        if family == "sqrt_iso":
            return sqrt_isochrone(params.get("omega", 1.0), params.get("lambda", 2.0), domain)
        if family == "quartic_iso":
            return quartic_isochrone(params.get("omega", 1.0), params.get("lambda", 1.0), domain)
        if family == "generic_super":
            return generic_superintegrable(params.get("omega", 1.0), params.get("b1", 1.0), params.get("c1", 1.0), domain)
        if family == "expression":
            if domain is None:
                raise ModelValidationError("expression models need an explicit 'domain'")
            return model_from_expression(params["source"], domain)
        if family == "designed":
            from .isochrony import design_from_spec

            return design_from_spec(params)
    except KeyError as exc:
        raise ModelValidationError(f"missing parameter {exc} for family {family!r}") from None
    raise ModelValidationError(f"unknown family {family!r}; expected one of {FAMILIES + ('designed',)}")
