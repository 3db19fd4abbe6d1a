"""Hill's equation along the planar orbit, monodromy data and stability verdicts.

Along ``X(t, x0)`` the variational equation ``y'' = -g'(X) y`` has the
fundamental solutions ``phi`` (``phi(0)=1, phi'(0)=0``) and ``psi``
(``psi(0)=0, psi'(0)=1``).  After one period ``phi(tau) = 1``, ``psi(tau) = 0``,
``psi'(tau) = 1``, and ``phi'(tau) = g(x0) T'(x0)`` decides whether the
bundle of solutions is periodic or grows linearly.
"""
import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import in_M, reference_integrate, strang_steps
from .errors import NumericalError
from .isochrony import ISOCHRONOUS, isochrony_report
from .period import period

PERIODIC = "PeriodicBundle"
UNBOUNDED = "UnboundedBundle"
STABLE = "Stable_Isochronous"
WEAKLY_UNSTABLE = "WeaklyUnstable"


def reference_orbit(model, x0, t, rtol=1e-12):
    """``(X(t), X'(t))`` for the planar orbit starting at ``(x0, 0)``."""
    x0 = float(x0)
    if t == 0:
        return np.array([x0, 0.0])
    _, ys = reference_integrate(model, [x0, 0.0, 0.0, 0.0], float(t), rtol=rtol, atol=rtol)
    X, Xd = ys[-1, 0], ys[-1, 3]
    e0 = float(model.V(x0))
    e1 = 0.5 * Xd * Xd + float(model.V(X))
    if abs(e1 - e0) > 1e-10 * e0:
        raise NumericalError("reference_orbit", f"energy drift {abs(e1 - e0):.3e} exceeds 1e-10 relative")
    return np.array([X, Xd])


@dataclass(frozen=True)
class MonodromyResult:
    x0: float
    tau: float
    phi_tau: float
    phidot_tau: float
    psi_tau: float
    psidot_tau: float
    wronskian_residual: float
    verdict: str
    tolerance: float

    @property
    def growth_rate(self):
        """``phi'(tau)/tau``: slope of the affine drift along the level set."""
        return self.phidot_tau / self.tau


def _hill_rhs(model):
    g, dg = model.g, model.dg

    def rhs(t, s):
        X, Xd, phi, phid, psi, psid = s
        k = float(dg(X))
        return [Xd, -float(g(X)), phid, -k * phi, psid, -k * psi]

    return rhs


def classification_tolerance(model, x0, tau):
    return 1e-6 * max(1.0, abs(float(model.g(x0))) * tau)


def _solve(model, s0, t0, t1, rtol, max_step=np.inf):
    sol = solve_ivp(
        _hill_rhs(model), (t0, t1), s0, method="RK45", rtol=rtol, atol=rtol, max_step=max_step
    )
    if not sol.success:
        raise NumericalError("monodromy", sol.message)
    y = sol.y
    wr = np.max(np.abs(y[5] * y[2] - y[3] * y[4] - 1.0))
    return y[:, -1], float(wr), sol


def _solve_checked(model, s0, t0, t1, rtol):
    max_step = np.inf
    for attempt in range(7):
        end, wr, sol = _solve(model, s0, t0, t1, rtol, max_step)
        if wr <= 1e-8:
            return end, wr, sol
        span = t1 - t0
        max_step = min(max_step, span / 16) / 2 if np.isfinite(max_step) else span / 32
    raise NumericalError("monodromy", f"Wronskian residual {wr:.3e} exceeds 1e-8 after 6 step halvings")


def monodromy(model, x0, tau=None, rtol=1e-11):
    x0 = float(x0)
    if tau is None:
        tau = period(model, x0).T
    s0 = [x0, 0.0, 1.0, 0.0, 0.0, 1.0]
    end, wr, _ = _solve_checked(model, s0, 0.0, tau, rtol)
    tol = classification_tolerance(model, x0, tau)
    verdict = PERIODIC if abs(end[3]) <= tol else UNBOUNDED
    return MonodromyResult(
        x0=x0,
        tau=float(tau),
        phi_tau=float(end[2]),
        phidot_tau=float(end[3]),
        psi_tau=float(end[4]),
        psidot_tau=float(end[5]),
        wronskian_residual=wr,
        verdict=verdict,
        tolerance=tol,
    )


def fundamental_solutions(model, x0, times, rtol=1e-11):
    """``(X, X', phi, phi', psi, psi')`` sampled at ``times`` (rows)."""
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(
        _hill_rhs(model),
        (0.0, float(times.max())),
        [float(x0), 0.0, 1.0, 0.0, 0.0, 1.0],
        method="RK45",
        rtol=rtol,
        atol=rtol,
        t_eval=times,
    )
    if not sol.success:
        raise NumericalError("fundamental_solutions", sol.message)
    return sol.y.T


def monodromy_growth(model, x0, n_max=8, tau=None, rtol=1e-11):
    """``[(n, phi'(n tau))]`` for ``n = 1..n_max``, integrating one period at a time."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    x0 = float(x0)
    if tau is None:
        tau = period(model, x0).T
    s = np.array([x0, 0.0, 1.0, 0.0, 0.0, 1.0])
    out = []
    for n in range(1, n_max + 1):
        s, _, _ = _solve_checked(model, s, (n - 1) * tau, n * tau, rtol)
        out.append((n, float(s[3])))
    return out


def linearization_eigenvalues(model):
    """Eigenvalues of the H-flow linearized at the origin."""
    k = float(model.dg(0.0))
    J = np.array(
        [
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, -k, 0.0, 0.0],
            [-k, 0.0, 0.0, 0.0],
        ]
    )
    return np.linalg.eigvals(J)


@dataclass
class StabilityVerdict:
    classification: str
    witness_amplitudes: list
    eigenvalues: list
    eigen_imag: float
    multiplicity: int
    isochrony_verdict: str
    ladder: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_dict(self):
        return {
            "classification": self.classification,
            "witnesses": [float(w) for w in self.witness_amplitudes],
            "eigen_imag": self.eigen_imag,
            "multiplicity": self.multiplicity,
            "isochrony_verdict": self.isochrony_verdict,
            "diagnostics": list(self.diagnostics),
        }

    def write_json(self, path, extra=None):
        out = self.to_dict()
        if extra:
            out.update(extra)
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)


def amplitude_ladder(model, n_amplitudes=8, x_hi=None):
    if x_hi is None:
        x_hi = 0.5 * model.center.x_max_pos
    return [x_hi * 2.0**-k for k in range(n_amplitudes)]


def write_ladder_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "tau", "phidot_tau", "verdict"])
        for r in results:
            w.writerow([f"{r.x0:.17g}", f"{r.tau:.17g}", f"{r.phidot_tau:.17g}", r.verdict])


def classify_equilibrium(model, n_amplitudes=8, x_hi=None):
    ladder = [monodromy(model, x) for x in amplitude_ladder(model, n_amplitudes, x_hi)]
    witnesses = [r.x0 for r in ladder if r.verdict == UNBOUNDED]
    iso = isochrony_report(model).verdict
    eig = linearization_eigenvalues(model)
    omega = float(np.sqrt(model.dg(0.0)))
    # the double pair is defective, so computed eigenvalues scatter by ~sqrt(eps)
    near = np.abs(np.abs(eig.imag) - omega) <= 1e-6 * max(1.0, omega)
    mult = int(min(np.sum(near & (eig.imag > 0)), np.sum(near & (eig.imag < 0))))
    diagnostics = []
    if witnesses:
        classification = WEAKLY_UNSTABLE
        if iso == ISOCHRONOUS:
            diagnostics.append("Inconclusive: unbounded bundles found but the isochrony verdict is Isochronous")
    else:
        classification = STABLE
        if iso != ISOCHRONOUS:
            diagnostics.append(f"Inconclusive: all bundles periodic but the isochrony verdict is {iso}")
    return StabilityVerdict(
        classification=classification,
        witness_amplitudes=witnesses,
        eigenvalues=[complex(v) for v in eig],
        eigen_imag=omega,
        multiplicity=mult,
        isochrony_verdict=iso,
        ladder=ladder,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class AsymptoticProbe:
    min_distance: float
    planar_min_distance: float
    horizon: float
    tau: float


def asymptotic_motion_probe(model, x0, horizon=20, steps_per_period=1000, y0=1.0):
    """Smallest distance to the origin of the orbit from ``(x0, y0, 0, 0)`` over ``+-horizon`` periods."""
    x0 = float(x0)
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    start = np.array([x0, y0, 0.0, 0.0])
    if not in_M(model, start):
        raise ValueError(f"x0={x0} is not an admissible amplitude")
    tau = period(model, x0).T
    dt = tau / steps_per_period
    n = int(round(horizon * steps_per_period))
    both = np.repeat(start[:, None], 2, axis=1)
    states = strang_steps(model, both, np.array([dt, -dt]), n)
    dist = np.sqrt(np.sum(states**2, axis=1))
    planar = np.sqrt(states[:, 0] ** 2 + states[:, 3] ** 2)
    return AsymptoticProbe(
        min_distance=float(dist.min()),
        planar_min_distance=float(planar.min()),
        horizon=float(horizon),
        tau=float(tau),
    )
