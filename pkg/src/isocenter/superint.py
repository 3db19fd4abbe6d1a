"""Third first integrals quadratic in the momenta.

``W = A p1^2 + B p1 p2 + C p2^2 + U`` Poisson-commutes with ``H`` when
``A, B, C`` have the polynomial form built by :func:`ansatz_coefficients`
and ``g`` solves a linear second-order ODE.  Three explicit families are
covered: a square-root force (``a = 0``), a quartic-type force
(``a = 1``, zero discriminant) and the generic ``a = 1`` force.
"""
import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import integrate_H, reference_integrate
from .errors import DomainError, ModelValidationError
from .funcmodel import discriminant_vanishes, generic_superintegrable, harmonic, quartic_isochrone, sqrt_isochrone
from .period import period

FAMILY_NAMES = ("sqrt", "quartic", "generic")


@dataclass(frozen=True)
class AnsatzParams:
    a: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    d: float = 0.0


def ansatz_coefficients(params, q1, q2):
    a, b1, b2, c1, c2, c3 = params.a, params.b1, params.b2, params.c1, params.c2, params.c3
    A = a * q1 * q1 + b1 * q1 + c1
    B = -2 * a * q1 * q2 - b1 * q2 - b2 * q1 + c3
    C = a * q2 * q2 + b2 * q2 + c2
    return A, B, C


def pde_residuals(model, params, q1, q2, h=1e-5):
    """Residuals of the four coefficient conditions and of the compatibility condition for ``U``.

    The coefficient conditions are checked by central differences of ``A, B, C``;
    they vanish identically for the polynomial ansatz.
    """
    if model.d2g is None:
        raise ModelValidationError(f"model {model.name!r} has no g'' available")

    def d1(f):
        return (f(q1 + h, q2) - f(q1 - h, q2)) / (2 * h)

    def d2(f):
        return (f(q1, q2 + h) - f(q1, q2 - h)) / (2 * h)

    A = lambda x, y: ansatz_coefficients(params, x, y)[0]  # noqa: E731
    B = lambda x, y: ansatz_coefficients(params, x, y)[1]  # noqa: E731
    C = lambda x, y: ansatz_coefficients(params, x, y)[2]  # noqa: E731
    coeff = (d2(A), d1(C), d1(A) + d2(B), d1(B) + d2(C))
    a, b1, b2, c1 = params.a, params.b1, params.b2, params.c1
    compat = (
        3 * (b2 + 2 * a * q2) * model.g(q1)
        - 3 * (b1 + 2 * a * q1) * q2 * model.dg(q1)
        - 2 * (c1 + q1 * (b1 + a * q1)) * q2 * model.d2g(q1)
    )
    return tuple(float(c) for c in coeff), float(compat)


def family_force(family, omega=1.0, lam=None, b1=None, c1=None):
    if not omega > 0:
        raise ModelValidationError(f"omega must be positive, got {omega}")
    if family == "sqrt":
        lam = 2.0 if lam is None else lam
        return sqrt_isochrone(omega, lam)
    if family == "quartic":
        lam = 1.0 if lam is None else lam
        return quartic_isochrone(omega, lam)
    if family == "generic":
        b1 = 1.0 if b1 is None else b1
        c1 = 1.0 if c1 is None else c1
        return generic_superintegrable(omega, b1, c1)
    raise ModelValidationError(f"unknown family {family!r}; expected one of {FAMILY_NAMES}")


def family_from_ansatz(params, omega=1.0):
    """Force solving the compatibility ODE for ``params``; returns ``(model, trivial)``.

    ``trivial`` marks the harmonic solution (``a != 0``, ``b1 = 0``, ``c1 = 0``).
    """
    if params.b2 != 0:
        raise ModelValidationError("b2 must vanish: at q2 = 0 the compatibility condition reads 3 b2 g(q1) = 0")
    if params.a == 0:
        if params.c1 == 0:
            raise ModelValidationError("a = 0 and c1 = 0 admits no solution with g'(0) > 0")
        if params.b1 == 0:
            return harmonic(omega), True
        return sqrt_isochrone(omega, params.b1 / (2 * params.c1)), False
    b1, c1 = params.b1 / params.a, params.c1 / params.a
    if discriminant_vanishes(b1, c1):
        if b1 == 0:
            return harmonic(omega), True
        return quartic_isochrone(omega, b1 / 2), False
    if c1 == 0:
        raise ModelValidationError("c1 = 0 admits no solution with g'(0) > 0")
    if b1 == 0:
        return harmonic(omega), True
    return generic_superintegrable(omega, b1, c1), False


# ---------------------------------------------------------------- third integrals


@dataclass(frozen=True)
class ThirdIntegral:
    family: str
    params: dict
    fn: Callable = field(repr=False)
    ansatz: AnsatzParams = None

    def evaluate(self, pt):
        q1, q2, p1, p2 = np.asarray(pt, dtype=float)
        return self.fn(q1, q2, p1, p2)

    __call__ = evaluate


def _sqrt_general(omega, lam, c1, c2, c3, d):
    w2 = omega**2

    def W(q1, q2, p1, p2):
        s = 1.0 + 2 * lam * q1
        if np.any(s <= 0):
            raise DomainError("sqrt family needs 1 + 2 lambda q1 > 0")
        r = np.sqrt(s)
        g = 2 * w2 * q1 / ((1.0 + r) * r)
        # (sqrt(s) - 1)^2 / lam^2 written without cancellation
        root_term = (2 * q1 / (1.0 + r)) ** 2
        return (
            c1 * p1 * p1 * s
            + p1 * p2 * (c3 - 2 * lam * c1 * q2)
            + c2 * p2 * p2
            + c2 * w2 * root_term
            + c1 * w2 * q2 * q2
            + q2 * (c3 - 2 * lam * c1 * q2) * g
            + d
        )

    return W


def _quartic(omega, lam):
    w2 = omega**2

    def W(q1, q2, p1, p2):
        s = lam + q1
        if np.any(s * np.sign(lam) <= 0):
            raise DomainError("quartic family needs lambda + q1 of the sign of lambda")
        return (
            p1 * p1 * s * s
            - 2 * p1 * p2 * s * q2
            + p2 * p2 * (1.0 + q2 * q2)
            + 0.25 * w2 * (s * s + lam**4 * (1.0 + 4 * q2 * q2) / (s * s))
            - 0.5 * lam * lam * w2
        )

    return W


def _generic(omega, b1, c1, eps=1e-12):
    w2 = omega**2
    D = b1 * b1 - 4 * c1

    def W(q1, q2, p1, p2):
        R = 1.0 + q1 * (b1 + q1) / c1
        if np.any(R < eps):
            raise DomainError("generic family needs 1 + q1 (b1 + q1)/c1 >= 1e-12")
        kinetic = p1 * p1 + p2 * p2 + (p1 * q1 - p2 * q2) * (p1 * (b1 + q1) - p2 * q2) / c1
        poly = 8 * b1**2 * c1**2 + 4 * c1 * (b1**2 + 4 * c1) * (b1 + q1) * q1 + (16 * c1**2 - b1**4) * q2 * q2
        rad = (b1 + 2 * q1) * (-4 * c1 * (c1 + (b1 + q1) * q1) + D * q2 * q2) / np.sqrt(R)
        return kinetic + w2 / D**2 * poly + 2 * b1 * w2 / D**2 * rad

    return W


def third_integral(family, omega=1.0, lam=None, b1=None, c1=None, coeffs=None):
    """Explicit third integral of a family.

    ``family`` is ``"sqrt"`` (normalized form, or the general form when
    ``coeffs = (c1, c2, c3, d)`` is given), ``"quartic"`` or ``"generic"``.
    """
    if family == "sqrt":
        lam = 2.0 if lam is None else lam
        if lam == 0:
            raise ModelValidationError("sqrt family needs lambda != 0")
        k1, k2, k3, dd = (1.0, 1.0, 0.0, 0.0) if coeffs is None else coeffs
        ansatz = AnsatzParams(a=0.0, b1=2 * lam * k1, c1=k1, c2=k2, c3=k3, d=dd)
        params = {"omega": omega, "lambda": lam, "c1": k1, "c2": k2, "c3": k3, "d": dd}
        return ThirdIntegral("sqrt", params, _sqrt_general(omega, lam, k1, k2, k3, dd), ansatz)
    if family == "quartic":
        lam = 1.0 if lam is None else lam
        if lam == 0:
            raise ModelValidationError("quartic family needs lambda != 0")
        ansatz = AnsatzParams(a=1.0, b1=2 * lam, c1=lam * lam, c2=1.0)
        return ThirdIntegral("quartic", {"omega": omega, "lambda": lam}, _quartic(omega, lam), ansatz)
    if family == "generic":
        b1 = 1.0 if b1 is None else b1
        c1 = 1.0 if c1 is None else c1
        if b1 == 0 or c1 == 0 or discriminant_vanishes(b1, c1):
            raise ModelValidationError("generic family needs b1 != 0, c1 != 0 and b1^2 != 4 c1")
        ansatz = AnsatzParams(a=1.0, b1=b1, c1=c1, c2=c1)
        return ThirdIntegral("generic", {"omega": omega, "b1": b1, "c1": c1}, _generic(omega, b1, c1), ansatz)
    raise ModelValidationError(f"unknown family {family!r}; expected one of {FAMILY_NAMES}")


def hessian_at_origin(W, h=1e-4):
    """Central second differences at 0 with one Richardson refinement."""

    def hess(step):
        f0 = W(np.zeros(4))
        Hm = np.empty((4, 4))
        E = np.eye(4) * step
        for i in range(4):
            Hm[i, i] = (W(E[i]) - 2 * f0 + W(-E[i])) / step**2
            for j in range(i + 1, 4):
                v = (W(E[i] + E[j]) - W(E[i] - E[j]) - W(-E[i] + E[j]) + W(-E[i] - E[j])) / (4 * step**2)
                Hm[i, j] = Hm[j, i] = v
        return Hm

    return (4 * hess(h / 2) - hess(h)) / 3


def gradient_at_origin(W, h=1e-6):
    E = np.eye(4) * h
    return np.array([(W(E[i]) - W(-E[i])) / (2 * h) for i in range(4)])


# ---------------------------------------------------------------- audits


@dataclass
class AuditResult:
    times: np.ndarray
    values: np.ndarray
    max_drift: float
    relative_drift: float
    method: str

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "W", "drift"])
            for t, v in zip(self.times, self.values):
                w.writerow([f"{t:.17g}", f"{v:.17g}", f"{v - self.values[0]:.17g}"])


def conservation_audit(model, W, pt, periods=10, method="reference", steps_per_period=1000, samples_per_period=50):
    """Largest deviation of ``W`` from its initial value along the H-flow from ``pt``.

    ``method="reference"`` uses the adaptive high-order integrator,
    ``"splitting"`` the Strang scheme with ``tau/steps_per_period`` steps.
    """
    pt = np.asarray(pt, dtype=float)
    x_amp = _planar_amplitude(model, pt)
    tau = period(model, x_amp).T
    t_end = periods * tau
    if method == "reference":
        t_eval = np.linspace(0.0, t_end, periods * samples_per_period + 1)
        times, states = reference_integrate(model, pt, t_end, t_eval=t_eval)
    elif method == "splitting":
        rec = integrate_H(model, pt, t_end, tau / steps_per_period, record_every=max(1, steps_per_period // samples_per_period))
        times, states = rec.times, rec.states
    else:
        raise ValueError(f"unknown audit method {method!r}")
    values = np.array([W(s) for s in states])
    drift = float(np.max(np.abs(values - values[0])))
    return AuditResult(times, values, drift, drift / max(1.0, abs(values[0])), method)


def _planar_amplitude(model, pt):
    from .isochrony import u_inverse

    K = 0.5 * pt[3] ** 2 + float(model.V(pt[0]))
    if not 0 < K < model.center.e_max:
        raise DomainError(f"phase point {pt.tolist()} has planar energy {K:.6g} outside (0, e_max)")
    return float(u_inverse(model, np.sqrt(2 * K)))
