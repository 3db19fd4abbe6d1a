import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from isocenter.dynamics import H_function, K_function, evaluate_integrals, poisson_bracket, random_points_in_N
from isocenter.errors import ModelValidationError
from isocenter.funcmodel import pendulum
from isocenter.isochrony import ISOCHRONOUS, isochrony_report
from isocenter.superint import (
    AnsatzParams,
    ansatz_coefficients,
    conservation_audit,
    family_force,
    family_from_ansatz,
    gradient_at_origin,
    hessian_at_origin,
    pde_residuals,
    third_integral,
)

q1, q2, p1, p2 = sp.symbols("q1 q2 p1 p2")


def symbolic_family(family, w, lam=None, b1=None, c1=None):
    """Force and normalized third integral written out from the closed forms."""
    if family == "sqrt":
        r = sp.sqrt(1 + 2 * lam * q1)
        g = w**2 / lam * (1 - 1 / r)
        V = w**2 / (2 * lam**2) * (r - 1) ** 2
        W = p1**2 * (1 + 2 * lam * q1) - 2 * lam * q2 * p1 * p2 + p2**2 + 2 * V + (w**2 - 2 * lam * g) * q2**2
    elif family == "quartic":
        s = lam + q1
        g = w**2 / 4 * (s - lam**4 / s**3)
        W = (
            p1**2 * s**2
            - 2 * p1 * p2 * s * q2
            + p2**2 * (1 + q2**2)
            + w**2 / 4 * (s**2 + lam**4 * (1 + 4 * q2**2) / s**2)
            - lam**2 * w**2 / 2
        )
    else:
        D = b1**2 - 4 * c1
        R = sp.sqrt(1 + q1 * (b1 + q1) / c1)
        g = 2 * c1 * w**2 / D**2 * ((b1**2 + 4 * c1) * (b1 + 2 * q1) + b1 * (D - 2 * (b1 + 2 * q1) ** 2) / R)
        W = (
            p1**2
            + p2**2
            + (p1 * q1 - p2 * q2) * (p1 * (b1 + q1) - p2 * q2) / c1
            + w**2 / D**2 * (8 * b1**2 * c1**2 + 4 * c1 * (b1**2 + 4 * c1) * (b1 + q1) * q1 + (16 * c1**2 - b1**4) * q2**2)
            + 2 * b1 * w**2 / D**2 * (b1 + 2 * q1) * (-4 * c1 * (c1 + (b1 + q1) * q1) + D * q2**2) / R
        )
    return g, W


def sym_bracket(f, h):
    return sum(sp.diff(f, q) * sp.diff(h, p) - sp.diff(f, p) * sp.diff(h, q) for q, p in ((q1, p1), (q2, p2)))


CASES = [
    ("sqrt", dict(lam=2.0), sp.Integer(1), dict(lam=sp.Integer(2))),
    ("sqrt", dict(lam=0.7), sp.Rational(13, 10), dict(lam=sp.Rational(7, 10))),
    ("quartic", dict(lam=1.0), sp.Integer(1), dict(lam=sp.Integer(1))),
    ("quartic", dict(lam=0.7), sp.Rational(13, 10), dict(lam=sp.Rational(7, 10))),
    ("generic", dict(b1=1.0, c1=1.0), sp.Integer(1), dict(b1=sp.Integer(1), c1=sp.Integer(1))),
    ("generic", dict(b1=1.5, c1=0.3), sp.Rational(7, 10), dict(b1=sp.Rational(3, 2), c1=sp.Rational(3, 10))),
]


def _omega(w):
    return float(w)


@pytest.mark.parametrize("family, kw, w, skw", CASES)
def test_closed_forms_against_symbolic(family, kw, w, skw):
    g, W = symbolic_family(family, w, **skw)
    H = p1 * p2 + g * q2
    bracket = sp.lambdify((q1, q2, p1, p2), sym_bracket(H, W), "mpmath")
    Wf = sp.lambdify((q1, q2, p1, p2), W, "math")
    gf = sp.lambdify(q1, g, "math")
    model = family_force(family, _omega(w), **kw)
    Wimpl = third_integral(family, _omega(w), **kw)
    rng = np.random.default_rng(1)
    for pt in random_points_in_N(model, 10, seed=3, box=0.5):
        # exact bracket of the closed forms vanishes (evaluated in extended precision)
        import mpmath

        mpmath.mp.dps = 40
        assert abs(float(bracket(*[mpmath.mpf(float(v)) for v in pt]))) < 1e-25
        assert Wimpl(pt) == pytest.approx(Wf(*pt), rel=1e-12, abs=1e-13)
        assert float(model.g(pt[0])) == pytest.approx(gf(pt[0]), rel=1e-12, abs=1e-15)
    del rng


@pytest.mark.parametrize("family, kw, w, skw", CASES)
def test_numerical_bracket_with_H(family, kw, w, skw):
    model = family_force(family, _omega(w), **kw)
    W = third_integral(family, _omega(w), **kw)
    for pt in random_points_in_N(model, 100, seed=9, box=0.5):
        assert abs(poisson_bracket(model, H_function(model), W, pt)) <= 1e-6


def test_ansatz_examples():
    assert ansatz_coefficients(AnsatzParams(c2=0.5), 0.3, -0.2) == (0.0, 0.0, 0.5)
    assert ansatz_coefficients(AnsatzParams(c3=1.0), 0.3, -0.2) == (0.0, 1.0, 0.0)
    assert ansatz_coefficients(AnsatzParams(a=1, b1=2, c1=3), 1.0, 1.0)[0] == 6.0


@given(st.tuples(*[st.floats(min_value=-3, max_value=3)] * 7), st.floats(-1, 1), st.floats(-1, 1))
def test_coefficient_conditions_vanish(coeffs, x, y):
    params = AnsatzParams(*coeffs)
    res, _ = pde_residuals(pendulum(), params, x, y)
    assert max(abs(r) for r in res) <= 1e-8 * (1 + max(abs(c) for c in coeffs))


def test_compatibility_residual():
    m = family_force("sqrt", 1.0, lam=2.0)
    W = third_integral("sqrt", 1.0, lam=2.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.uniform(-0.2, 0.6), rng.uniform(-2, 2)
        assert abs(pde_residuals(m, W.ansatz, x, y)[1]) <= 1e-9
    p = pendulum()
    assert abs(pde_residuals(p, AnsatzParams(a=1, b1=1, c1=1), 1.0, 1.0)[1]) > 1e-3
    for x in (0.3, -0.7, 1.2):
        assert pde_residuals(p, AnsatzParams(b2=1.0), x, 0.0)[1] == pytest.approx(3 * math.sin(x), rel=1e-14)


def test_family_forces():
    xs = np.linspace(-0.2, 1.0, 13)
    np.testing.assert_allclose(family_force("sqrt", 1.0, lam=2.0).g(xs), 0.5 * (1 - 1 / np.sqrt(1 + 4 * xs)), rtol=1e-13, atol=1e-16)
    np.testing.assert_allclose(family_force("quartic", 1.0, lam=1.0).g(xs), 0.25 * (1 + xs - (1 + xs) ** -3.0), rtol=1e-13, atol=1e-16)
    for b1, c1 in [(1.0, 1.0), (1.5, 0.3), (-2.0, 0.5)]:
        m = family_force("generic", 1.0, b1=b1, c1=c1)
        d = lambda h: (float(m.g(h)) - float(m.g(-h))) / (2 * h)  # noqa: E731
        assert (4 * d(5e-4) - d(1e-3)) / 3 == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize(
    "family, kw",
    [("sqrt", dict(lam=0.0)), ("quartic", dict(lam=0.0)), ("generic", dict(b1=0.0, c1=1.0)), ("generic", dict(b1=1.0, c1=0.0)), ("generic", dict(b1=2.0, c1=1.0))],
)
def test_family_preconditions(family, kw):
    with pytest.raises(ModelValidationError):
        family_force(family, 1.0, **kw)
    with pytest.raises(ModelValidationError):
        third_integral(family, 1.0, **kw)


def test_family_isochrony():
    for fam, kw in [("sqrt", dict(lam=2.0)), ("quartic", dict(lam=1.0)), ("generic", dict(b1=1.0, c1=1.0))]:
        assert isochrony_report(family_force(fam, 1.0, **kw)).verdict == ISOCHRONOUS


def test_third_integral_examples():
    W = third_integral("sqrt", 1.3, lam=2.0)
    assert W(np.zeros(4)) == 0.0
    assert W(np.array([0.0, 0.4, 0.0, 0.0])) == pytest.approx(1.3**2 * 0.16, rel=1e-14)
    for fam, kw in [("sqrt", dict(lam=2.0)), ("quartic", dict(lam=0.7)), ("generic", dict(b1=1.5, c1=0.3))]:
        W = third_integral(fam, 1.2, **kw)
        assert abs(W(np.zeros(4))) <= 1e-14
        assert np.max(np.abs(gradient_at_origin(W))) <= 1e-6


@pytest.mark.parametrize("omega, lam", [(1.0, 1.0), (1.3, 0.7), (0.8, 2.0)])
def test_hessians(omega, lam):
    Hq = hessian_at_origin(third_integral("quartic", omega, lam=lam))
    np.testing.assert_allclose(Hq, np.diag(2 * np.array([omega**2, lam**2 * omega**2, lam**2, 1])), atol=1e-4)
    Hg = hessian_at_origin(third_integral("generic", omega, b1=lam, c1=0.4))
    np.testing.assert_allclose(Hg, np.diag(2 * np.array([omega**2, omega**2, 1, 1])), atol=1e-4)


def test_positive_definite_near_origin():
    rng = np.random.default_rng(12)
    dirs = rng.normal(size=(1000, 4))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    pts = dirs * rng.uniform(1e-3, 0.1, size=(1000, 1))
    for fam, kw in [("sqrt", dict(lam=2.0)), ("quartic", dict(lam=1.0)), ("generic", dict(b1=1.0, c1=1.0))]:
        W = third_integral(fam, 1.0, **kw)
        vals = np.array([W(p) for p in pts])
        assert np.all(vals > 0), fam


def test_reductions_to_H_and_K():
    m = family_force("sqrt", 1.1, lam=0.9)
    WK = third_integral("sqrt", 1.1, lam=0.9, coeffs=(0.0, 0.5, 0.0, 0.0))
    WH = third_integral("sqrt", 1.1, lam=0.9, coeffs=(0.0, 0.0, 1.0, 0.0))
    for pt in random_points_in_N(m, 100, seed=21, box=2.0):
        H, K = evaluate_integrals(m, pt)
        assert abs(WK(pt) - K) <= 1e-12 * max(1, abs(K))
        assert abs(WH(pt) - H) <= 1e-12 * max(1, abs(H))


def test_audits():
    m = family_force("sqrt", 1.0, lam=2.0)
    W = third_integral("sqrt", 1.0, lam=2.0)
    pt = np.array([0.2, 1.0, 0.1, 0.0])
    a = conservation_audit(m, W, pt, periods=10)
    assert a.max_drift <= 1e-6 * max(1.0, abs(W(pt)))
    q = family_force("quartic", 1.0, lam=1.0)
    Wq = third_integral("quartic", 1.0, lam=1.0)
    pt = random_points_in_N(q, 1, seed=8, box=0.5)[0]
    assert conservation_audit(q, Wq, pt, periods=10).relative_drift <= 1e-6


def test_k_bracket_regression_fixture():
    # {K, W} is recorded, not claimed to vanish
    m = family_force("sqrt", 1.0, lam=2.0)
    W = third_integral("sqrt", 1.0, lam=2.0)
    val = poisson_bracket(m, K_function(m), W, np.array([0.2, 0.5, -0.3, 0.4]))
    g, Ws = symbolic_family("sqrt", sp.Integer(1), lam=sp.Integer(2))
    K = p2**2 / 2 + (sp.sqrt(1 + 4 * q1) - 1) ** 2 / 8
    want = float(sym_bracket(K, Ws).subs({q1: 0.2, q2: 0.5, p1: -0.3, p2: 0.4}))
    assert abs(want) > 1e-3
    assert val == pytest.approx(want, rel=1e-7)


def test_degenerate_ansatz_paths():
    m, trivial = family_from_ansatz(AnsatzParams(a=1.0, b1=0.0, c1=0.0), omega=1.5)
    assert trivial and float(m.g(0.3)) == pytest.approx(1.5**2 * 0.3)
    m, trivial = family_from_ansatz(AnsatzParams(a=1.0, b1=1.4, c1=0.49), omega=1.0)
    assert not trivial
    with pytest.raises(ModelValidationError):
        family_force("generic", 1.0, b1=1.4, c1=0.49)
    q = family_force("quartic", 1.0, lam=0.7)
    xs = np.linspace(-0.3, 0.5, 9)
    np.testing.assert_allclose(m.g(xs), q.g(xs), rtol=1e-14)
