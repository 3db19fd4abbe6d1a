"""Command-line front end.

Every command prints a JSON document on stdout.  With ``--out DIR`` the same
document and any tables are also written to files; each file records the
resolved configuration and seed.  Exit status: 0 success, 1 bad input,
2 numerical failure.
"""
import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ExpressionError, IsocenterError, ModelValidationError, NumericalError
from .funcmodel import builtin_catalog, model_from_spec, quadrature_check, validate_model

DEFAULT_SEED = 20240601
TOLERANCE_NAMES = {"period_atol": 1e-10, "hill_rtol": 1e-11, "reference_rtol": 1e-12}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    model_spec: dict = None
    out: str = None
    seed: int = DEFAULT_SEED
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def write_table(path, header, rows, config):
    with open(path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(_jsonable(config.to_dict()), sort_keys=True) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_model_spec(text):
    """``text`` is a JSON file path, inline JSON or a bare family name."""
    if text is None:
        raise UsageError("--model is required for this command")
    if os.path.exists(text):
        with open(text) as fh:
            raw = fh.read()
    else:
        raw = text
    raw = raw.strip()
    if raw.startswith("{"):
        try:
            spec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise UsageError(f"model spec is not valid JSON: {exc.msg} at position {exc.pos}") from None
    else:
        spec = {"family": raw}
    return spec


def parse_tolerances(text):
    tol = dict(TOLERANCE_NAMES)
    if not text:
        return tol
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"--tol entry {item!r} is not name=value")
        name, value = item.split("=", 1)
        name = name.strip()
        if name not in TOLERANCE_NAMES:
            raise UsageError(f"unknown tolerance {name!r}; known: {sorted(TOLERANCE_NAMES)}")
        try:
            tol[name] = float(value)
        except ValueError:
            raise UsageError(f"tolerance {name!r} has non-numeric value {value!r}") from None
    return tol


def parse_floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _emit(result, config, files=()):
    """Print the JSON result and, with ``--out``, write it plus tables."""
    doc = {"config": config.to_dict(), "result": result}
    text = dumps(doc)
    if config.out:
        os.makedirs(config.out, exist_ok=True)
        with open(os.path.join(config.out, f"{config.command}.json"), "w") as fh:
            fh.write(text + "\n")
        for name, header, rows in files:
            write_table(os.path.join(config.out, name), header, rows, config)
    print(text)


def _model(config):
    model = model_from_spec(config.model_spec)
    return model


# ---------------------------------------------------------------- commands


def cmd_catalog(args, config):
    out = []
    for m in builtin_catalog():
        c = m.center
        out.append(
            {
                "name": m.name,
                "spec": m.spec,
                "domain": list(m.domain),
                "stiffness": m.stiffness,
                "e_max": c.e_max,
                "x_max_neg": c.x_max_neg,
                "x_max_pos": c.x_max_pos,
            }
        )
    _emit({"models": out}, config)


def cmd_validate(args, config):
    m = _model(config)
    report = validate_model(m)
    c = m.center
    report.update(
        {
            "e_max": c.e_max,
            "x_max_neg": c.x_max_neg,
            "x_max_pos": c.x_max_pos,
            "quadrature_gap": quadrature_check(m),
        }
    )
    _emit(report, config)


def cmd_isochrony(args, config):
    from .isochrony import involution_probes, isochrony_report

    m = _model(config)
    report = isochrony_report(m, grid_n=args.n or 64)
    probes = involution_probes(m, n=max(args.n or 64, 8))
    rows = [(p.x, p.h_x, p.residual_V) for p in probes]
    _emit(report.to_dict(), config, [("probes.csv", ["x", "h_x", "residual_V"], rows)])


def _scan_range(m, args):
    c = m.center
    x_hi = args.x_hi if args.x_hi is not None else 0.8 * c.x_max_pos
    x_lo = args.x_lo if args.x_lo is not None else 1e-2 * x_hi
    return x_lo, x_hi


def cmd_period_scan(args, config):
    from .period import period_scan

    m = _model(config)
    x_lo, x_hi = _scan_range(m, args)
    scan = period_scan(m, x_lo, x_hi, n=args.n or 20)
    rows = [(s.x0, s.y0, s.T, s.T_prime, s.quadrature_error_estimate) for s in scan.samples]
    summary = scan.summary()
    params = m.params or {}
    if params.get("kind") == "from_period_polynomial":
        # compare against the prescribed period polynomial in y
        w = 2 * np.pi / params.get("omega", 1.0)
        target = [w * sum(c * s.y0 ** (2 * k) for k, c in enumerate(params["coeffs"])) for s in scan.samples]
        summary["target_max_rel_error"] = max(abs(s.T - t) / t for s, t in zip(scan.samples, target))
    _emit(summary, config, [("scan.csv", ["x0", "y0", "T", "T_prime", "err_estimate"], rows)])


def cmd_classify(args, config):
    from .hill import classify_equilibrium

    m = _model(config)
    v = classify_equilibrium(m, n_amplitudes=args.n or 8, x_hi=args.x_hi)
    rows = [(r.x0, r.tau, r.phidot_tau, r.verdict) for r in v.ladder]
    _emit(v.to_dict(), config, [("ladder.csv", ["x0", "tau", "phidot_tau", "verdict"], rows)])


def cmd_monodromy(args, config):
    from .hill import amplitude_ladder, monodromy, monodromy_growth

    m = _model(config)
    rtol = config.tolerances["hill_rtol"]
    xs = [args.x0] if args.x0 is not None else amplitude_ladder(m, args.n or 8, args.x_hi)
    results = [monodromy(m, x, rtol=rtol) for x in xs]
    out = {"ladder": [r.__dict__ for r in results]}
    if args.periods and args.x0 is not None:
        out["growth"] = monodromy_growth(m, args.x0, n_max=args.periods, tau=results[0].tau, rtol=rtol)
    rows = [(r.x0, r.tau, r.phidot_tau, r.verdict) for r in results]
    _emit(out, config, [("monodromy.csv", ["x0", "tau", "phidot_tau", "verdict"], rows)])


def cmd_simulate(args, config):
    from .dynamics import integrate_H
    from .isochrony import involution
    from .period import period

    m = _model(config)
    if args.state:
        state = parse_floats(args.state, "--state")
        if len(state) != 4:
            raise UsageError("--state needs four numbers q1,q2,p1,p2")
    else:
        if args.x0 is None:
            raise UsageError("simulate needs --x0 or --state")
        state = [args.x0, args.y0, 0.0, 0.0]
    from .isochrony import u_inverse

    K = 0.5 * state[3] ** 2 + float(m.V(state[0]))
    if not 0 < K < m.center.e_max:
        raise DomainError(f"initial planar energy {K:.6g} is outside (0, e_max={m.center.e_max:.6g})")
    amp = float(u_inverse(m, np.sqrt(2 * K)))
    tau = period(m, amp, atol=config.tolerances["period_atol"]).T
    periods = args.periods or 8
    dt = args.dt if args.dt else tau / 1000
    rec = integrate_H(m, state, periods * tau, dt, record_every=args.record_every)
    rows = [(t, *s, h, k, "") for t, s, h, k in zip(rec.times, rec.states, rec.H, rec.K)]
    annotations = []
    if args.annotate:
        x0 = state[0]
        hx = involution(m, x0).h_x
        annotations = [
            {"label": "initial", "q1": x0, "q2": state[1]},
            {"label": "conjugate", "q1": hx, "q2": float(m.g(x0) / m.g(hx))},
        ]
        for a in annotations:
            rows.append(("", a["q1"], a["q2"], "", "", "", "", a["label"]))
    result = {
        "tau": tau,
        "periods": periods,
        "H_drift": rec.H_drift,
        "K_drift": rec.K_drift,
        "integrator": rec.integrator,
        "final_state": rec.states[-1],
        "max_abs_q2": float(np.max(np.abs(rec.states[:, 1]))),
        "annotations": annotations,
    }
    _emit(result, config, [("trajectory.csv", ["t", "q1", "q2", "p1", "p2", "H", "K", "label"], rows)])


def cmd_bracket(args, config):
    from .dynamics import H_function, K_function, independence_min_sv, poisson_bracket, random_points_in_N

    m = _model(config)
    n = args.n or 100
    pts = random_points_in_N(m, n, config.seed)
    Hf, Kf = H_function(m), K_function(m)
    rows = []
    for p in pts:
        rows.append((*p, poisson_bracket(m, Hf, Kf, p), independence_min_sv(m, p)))
    br = np.array([r[4] for r in rows])
    sv = np.array([r[5] for r in rows])
    result = {"n": n, "max_abs_bracket": float(np.max(np.abs(br))), "min_singular_value": float(sv.min())}
    _emit(result, config, [("bracket.csv", ["q1", "q2", "p1", "p2", "HK_bracket", "min_singular_value"], rows)])


def cmd_superint(args, config):
    from .dynamics import H_function, poisson_bracket, random_points_in_N
    from .superint import (
        conservation_audit,
        family_force,
        gradient_at_origin,
        hessian_at_origin,
        pde_residuals,
        third_integral,
    )

    spec = config.model_spec or {"family": args.family or "sqrt"}
    fam = SUPERINT_FAMILIES.get(spec.get("family"), spec.get("family"))
    if fam not in ("sqrt", "quartic", "generic"):
        raise UsageError(f"superint needs a sqrt, quartic or generic family, got {spec.get('family')!r}")
    p = spec.get("params", spec)
    omega = float(p.get("omega", 1.0))
    kw = {}
    if fam in ("sqrt", "quartic"):
        kw["lam"] = float(p.get("lambda", 2.0 if fam == "sqrt" else 1.0))
    else:
        kw["b1"] = float(p.get("b1", 1.0))
        kw["c1"] = float(p.get("c1", 1.0))
    m = family_force(fam, omega, **kw)
    W = third_integral(fam, omega, **kw)
    pts = random_points_in_N(m, args.n or 20, config.seed, box=0.5)
    Hf = H_function(m)
    bracket = max(abs(poisson_bracket(m, Hf, W, p)) for p in pts)
    compat = max(abs(pde_residuals(m, W.ansatz, p[0], p[1])[1]) for p in pts)
    start = parse_floats(args.state, "--state") if args.state else [0.2, 1.0, 0.1, 0.0]
    audit = conservation_audit(m, W, start, periods=args.periods or 10)
    result = {
        "family": fam,
        "params": W.params,
        "W_origin": float(W(np.zeros(4))),
        "gradient_origin": gradient_at_origin(W),
        "hessian_origin": hessian_at_origin(W),
        "max_abs_HW_bracket": bracket,
        "max_abs_compatibility_residual": compat,
        "audit": {"start": start, "max_drift": audit.max_drift, "relative_drift": audit.relative_drift, "method": audit.method},
    }
    rows = [(t, v, v - audit.values[0]) for t, v in zip(audit.times, audit.values)]
    _emit(result, config, [("audit.csv", ["t", "W", "drift"], rows)])


SUPERINT_FAMILIES = {"sqrt_iso": "sqrt", "quartic_iso": "quartic", "generic_super": "generic"}


def cmd_design(args, config):
    from .isochrony import design_from_even, design_from_involution, design_from_period

    kind = args.kind
    omega = args.omega
    if kind == "from-period":
        if not args.coeffs:
            raise UsageError("from-period needs --coeffs")
        model = design_from_period(parse_floats(args.coeffs, "--coeffs"), args.y_range, omega)
    elif kind == "from-h":
        if not args.h or not args.domain:
            raise UsageError("from-h needs --h and --domain")
        model = design_from_involution(args.h, omega, parse_floats(args.domain, "--domain"))
    else:
        if not args.f:
            raise UsageError("from-even needs --f")
        model = design_from_even(args.f, args.half_width, omega)
    spec = model.spec
    if config.out:
        os.makedirs(config.out, exist_ok=True)
        with open(os.path.join(config.out, "model.json"), "w") as fh:
            fh.write(dumps(spec) + "\n")
    _emit({"model_spec": spec, "domain": list(model.domain), "taylor_V0": list(model.taylor_V0), "params": model.params}, config)


COMMANDS = {
    "catalog": cmd_catalog,
    "validate": cmd_validate,
    "isochrony": cmd_isochrony,
    "period-scan": cmd_period_scan,
    "classify": cmd_classify,
    "monodromy": cmd_monodromy,
    "simulate": cmd_simulate,
    "bracket": cmd_bracket,
    "superint": cmd_superint,
    "design": cmd_design,
}


def build_parser():
    parser = _Parser(prog="isocenter", description="Isochronous centers, Hill monodromy and integrable 4D flows.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--model", help="model spec: JSON file, inline JSON or family name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--tol", help="tolerance overrides name=value,...")
        p.add_argument("--x0", type=float)
        p.add_argument("--x-lo", type=float)
        p.add_argument("--x-hi", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--periods", type=int)
        p.add_argument("--dt", type=float)
        return p

    for name in COMMANDS:
        p = common(sub.add_parser(name))
        if name == "simulate":
            p.add_argument("--y0", type=float, default=1.0)
            p.add_argument("--state", help="q1,q2,p1,p2")
            p.add_argument("--record-every", type=int, default=1)
            p.add_argument("--annotate", action="store_true")
        if name == "superint":
            p.add_argument("--family", choices=["sqrt", "quartic", "generic"])
            p.add_argument("--state", help="q1,q2,p1,p2 start of the audit")
        if name == "design":
            p.add_argument("kind", choices=["from-h", "from-even", "from-period"])
            p.add_argument("--omega", type=float, default=1.0)
            p.add_argument("--coeffs")
            p.add_argument("--y-range", type=float, default=0.9)
            p.add_argument("--h")
            p.add_argument("--domain")
            p.add_argument("--f")
            p.add_argument("--half-width", type=float, default=0.3)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        params = {k: v for k, v in vars(args).items() if k not in ("model", "out", "seed", "tol", "command")}
        config = RunConfig(
            command=args.command,
            out=args.out,
            seed=args.seed,
            tolerances=parse_tolerances(args.tol),
            params=params,
        )
        if args.model is not None:
            config.model_spec = load_model_spec(args.model)
        elif args.command not in ("catalog", "superint", "design"):
            raise UsageError("--model is required for this command")
        COMMANDS[args.command](args, config)
        return 0
    except (UsageError, ExpressionError, ModelValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure in {exc.operation}: {exc}", file=sys.stderr)
        return 2
    except IsocenterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
