"""The 4D Hamiltonian system ``H = p1 p2 + g(q1) q2`` with second integral ``K``.

Phase points are ordered ``(q1, q2, p1, p2)``; the planar motion lives in
``(q1, p2) = (x, xdot)`` and the variational part in ``(q2, p1) = (y, ydot)``.
"""
import csv
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError


class PhasePoint4(NamedTuple):
    q1: float
    q2: float
    p1: float
    p2: float


def _state(pt):
    return np.asarray(pt, dtype=float)


def evaluate_integrals(model, pt):
    """``(H, K)``; ``pt`` may carry extra trailing axes."""
    q1, q2, p1, p2 = _state(pt)
    model.check_in_domain(q1, "q1")
    H = p1 * p2 + model.g(q1) * q2
    K = 0.5 * p2 * p2 + model.V(q1)
    return H, K


def hamiltonian_field(model, pt):
    q1, q2, p1, p2 = _state(pt)
    return np.array([p2, p1, -model.dg(q1) * q2, -model.g(q1)])


def k_field(model, pt):
    q1, q2, p1, p2 = _state(pt)
    return np.array([0.0 * q1, p2, -model.g(q1), 0.0 * p2])


def vector_fields(model, pt):
    model.check_in_domain(_state(pt)[0], "q1")
    return hamiltonian_field(model, pt), k_field(model, pt)


def flow_K_exact(model, pt, t):
    """Time-``t`` map of the K-flow, which is affine in ``t``."""
    q1, q2, p1, p2 = _state(pt)
    model.check_in_domain(q1, "q1")
    return np.array([q1, q2 + p2 * t, p1 - model.g(q1) * t, p2])


# ---------------------------------------------------------------- phase functions and brackets


@dataclass(frozen=True)
class PhaseFunction:
    """Scalar phase-space function with an optional analytic gradient."""

    name: str
    fn: Callable
    grad: Optional[Callable] = None

    def __call__(self, pt):
        return self.fn(pt)


def grad_H(model, pt):
    q1, q2, p1, p2 = _state(pt)
    return np.array([model.dg(q1) * q2, model.g(q1), p2, p1])


def grad_K(model, pt):
    q1, q2, p1, p2 = _state(pt)
    return np.array([model.g(q1), 0.0 * q2, 0.0 * p1, p2])


def H_function(model):
    return PhaseFunction("H", lambda pt: evaluate_integrals(model, pt)[0], lambda pt: grad_H(model, pt))


def K_function(model):
    return PhaseFunction("K", lambda pt: evaluate_integrals(model, pt)[1], lambda pt: grad_K(model, pt))


def fd_gradient(fn, pt, rel_step=1e-6):
    pt = _state(pt)
    out = np.empty(4)
    for i in range(4):
        h = rel_step * max(1.0, abs(pt[i]))
        e = np.zeros(4)
        e[i] = h
        fp, fm = fn(pt + e), fn(pt - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError("poisson_bracket", f"non-finite field value near {pt.tolist()}")
        out[i] = (fp - fm) / (2 * h)
    return out


def _gradient(f, pt):
    if isinstance(f, PhaseFunction) and f.grad is not None:
        return np.asarray(f.grad(pt), dtype=float)
    return fd_gradient(f, pt)


def poisson_bracket(model, f, g_field, pt):
    """``{f, g} = df/dq . dg/dp - df/dp . dg/dq``."""
    a = _gradient(f, pt)
    b = _gradient(g_field, pt)
    # grouped so that {f, f} is exactly 0
    return float((a[0] * b[2] - a[2] * b[0]) + (a[1] * b[3] - a[3] * b[1]))


def gradient_matrix(model, pt):
    return np.vstack([grad_H(model, pt), grad_K(model, pt)])


def independence_min_sv(model, pt):
    return float(np.linalg.svd(gradient_matrix(model, pt), compute_uv=False)[-1])


# ---------------------------------------------------------------- regions and sampling


def in_M(model, pt):
    q1, q2, p1, p2 = _state(pt)
    if not model.contains(q1):
        return False
    return bool(0.5 * p2 * p2 + model.V(q1) < model.center.e_max)


def in_N(model, pt):
    q1, _, _, p2 = _state(pt)
    return in_M(model, pt) and not (q1 == 0.0 and p2 == 0.0)


def random_points_in_N(model, n, seed, box=1.0, energy_fraction=0.9):
    """``n`` points drawn uniformly from a box and kept if inside ``N``.

    The planar part is restricted to ``K < energy_fraction * e_max`` so points
    stay away from the boundary of the center region.
    """
    rng = np.random.default_rng(seed)
    c = model.center
    lo, hi = c.x_max_neg, c.x_max_pos
    pmax = np.sqrt(2 * c.e_max)
    out = []
    while len(out) < n:
        cand = np.column_stack(
            [
                rng.uniform(lo, hi, 4 * n),
                rng.uniform(-box, box, 4 * n),
                rng.uniform(-box, box, 4 * n),
                rng.uniform(-pmax, pmax, 4 * n),
            ]
        )
        inside = model.contains(cand[:, 0])
        cand = cand[inside]
        K = 0.5 * cand[:, 3] ** 2 + model.V(cand[:, 0])
        keep = (K < energy_fraction * c.e_max) & (K > 0)
        out.extend(cand[keep][: n - len(out)])
    return np.array(out)


# ---------------------------------------------------------------- integrators


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    H: np.ndarray
    K: np.ndarray
    integrator: dict = field(default_factory=dict)

    @property
    def H_drift(self):
        return float(np.max(np.abs(self.H - self.H[0])))

    @property
    def K_drift(self):
        return float(np.max(np.abs(self.K - self.K[0])))

    def rows(self):
        for t, s, h, k in zip(self.times, self.states, self.H, self.K):
            yield (t, *s, h, k)

    def write_csv(self, path, annotations=()):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q1", "q2", "p1", "p2", "H", "K"] + (["label"] if annotations else []))
            for row in self.rows():
                w.writerow([f"{v:.17g}" for v in row] + ([""] if annotations else []))
            for label, row in annotations:
                w.writerow([f"{v:.17g}" if v is not None else "" for v in row] + [label])


def strang_steps(model, state, dt, n_steps, record_every=1, check=True):
    """Advance ``state`` (shape ``(4,)`` or ``(4, m)``) by ``n_steps`` Strang steps.

    Each step is ``B(dt/2) A(dt) B(dt/2)``, with ``A`` the exact flow of
    ``p1 p2`` and ``B`` the exact flow of ``g(q1) q2``.  Consecutive half kicks
    share one evaluation of ``g`` and ``g'``.  Returns the recorded states,
    shape ``(n_records, 4, ...)``, including the initial one.
    """
    q1, q2, p1, p2 = (np.array(v, dtype=float) for v in state)
    half = 0.5 * np.asarray(dt, dtype=float)
    full = np.asarray(dt, dtype=float)
    g, dg = model.g, model.dg
    e_max = model.center.e_max
    n_rec = n_steps // record_every + 1
    out = np.empty((n_rec,) + (4,) + q1.shape)
    out[0] = (q1, q2, p1, p2)
    gq, dgq = g(q1), dg(q1)
    r = 1
    for i in range(1, n_steps + 1):
        p1 = p1 - half * dgq * q2
        p2 = p2 - half * gq
        q1 = q1 + full * p2
        q2 = q2 + full * p1
        gq, dgq = g(q1), dg(q1)
        p1 = p1 - half * dgq * q2
        p2 = p2 - half * gq
        if i % record_every == 0:
            out[r] = (q1, q2, p1, p2)
            r += 1
            if check and not np.all(np.isfinite(gq)):
                raise DomainError(f"trajectory left the center region at step {i}")
    if check:
        q1s = out[:, 0]
        K = 0.5 * out[:, 3] ** 2 + model.V(q1s)
        bad = ~(model.contains(q1s) & (K < e_max))
        if np.any(bad):
            k = int(np.argmax(np.any(bad.reshape(n_rec, -1), axis=1)))
            raise DomainError(f"trajectory left M at t={k * record_every * float(np.max(np.abs(dt))):.6g}")
    return out


def integrate_H(model, pt, t_end, dt, record_every=1):
    """Structure-preserving integration of the H-flow from ``pt`` to ``t_end`` (either sign)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    pt = _state(pt)
    if not in_M(model, pt):
        raise DomainError(f"initial point {pt.tolist()} is not in M")
    n = max(1, int(np.ceil(abs(t_end) / dt - 1e-9)))
    h = t_end / n
    states = strang_steps(model, pt, h, n, record_every)
    times = np.arange(states.shape[0]) * h * record_every
    H, K = evaluate_integrals(model, states.T)
    return TrajectoryRecord(
        times=times,
        states=states,
        H=np.asarray(H),
        K=np.asarray(K),
        integrator={"method": "strang-splitting", "dt": abs(h), "steps": n, "record_every": record_every},
    )


def reference_rhs(model):
    def rhs(t, s):
        q1, q2, p1, p2 = s
        return [p2, p1, -float(model.dg(q1)) * q2, -float(model.g(q1))]

    return rhs


def reference_integrate(model, pt, t_end, t_eval=None, rtol=1e-12, atol=1e-12, method="DOP853"):
    """Adaptive high-order integration of the H-flow, the independent oracle for the splitting."""
    sol = solve_ivp(
        reference_rhs(model), (0.0, t_end), _state(pt), method=method, rtol=rtol, atol=atol, t_eval=t_eval
    )
    if not sol.success:
        raise NumericalError("reference_integrate", sol.message)
    return sol.t, sol.y.T


# ---------------------------------------------------------------- level sets


@dataclass(frozen=True)
class LevelSetDiagnostics:
    H_value: float
    K_value: float
    x0: float
    omega: float
    drift_indicator: float
    independence_min_sv: float

    def to_dict(self):
        return {
            "H": self.H_value,
            "K": self.K_value,
            "x0": self.x0,
            "omega": self.omega,
            "drift_indicator": self.drift_indicator,
            "min_singular_value": self.independence_min_sv,
        }


def level_set_diagnostics(model, pt):
    from .hill import monodromy
    from .isochrony import u_inverse
    from .period import period

    pt = _state(pt)
    if not in_N(model, pt):
        raise DomainError(f"point {pt.tolist()} is not in N (planar part at the origin or outside the center)")
    H, K = (float(v) for v in evaluate_integrals(model, pt))
    x0 = float(u_inverse(model, np.sqrt(2.0 * K)))
    T = period(model, x0).T
    mono = monodromy(model, x0, tau=T)
    return LevelSetDiagnostics(
        H_value=H,
        K_value=K,
        x0=x0,
        omega=2 * np.pi / T,
        drift_indicator=mono.phidot_tau,
        independence_min_sv=independence_min_sv(model, pt),
    )
