"""Build isochronous and prescribed-period forces, then measure what was built.

    python3 scripts/design_demo.py
"""
import math

import numpy as np

from isocenter.isochrony import design_from_even, design_from_involution, design_from_period, isochrony_report, u_inverse
from isocenter.period import period, period_scan


def report(m, fractions):
    amplitudes = [f * m.center.x_max_pos for f in fractions]
    rep = isochrony_report(m)
    ts = [period(m, x).T for x in amplitudes]
    print(f"{m.name:18s} verdict={rep.verdict:16s} nc4={rep.nc4_residual:+.1e} nc6={rep.nc6_residual:+.1e}")
    print("    T/2pi at", [round(x, 3) for x in amplitudes], "=", [f"{t / (2 * math.pi):.12f}" for t in ts])


def main():
    m = design_from_involution("-x/(1+x)", domain=(-0.45, 2.0))
    report(m, [0.1, 0.4, 0.7, 0.95])

    m = design_from_even("x^2/sqrt(2)", 0.3)
    report(m, [0.1, 0.5, 0.9])

    coeffs = [1.0, -1.0, 1.0]
    m = design_from_period(coeffs, 0.9)
    for y in (0.2, 0.5, 0.8):
        x = float(u_inverse(m, y))
        want = 2 * math.pi * np.polyval(coeffs[::-1], y * y)
        print(f"    y0={y}: T={period(m, x).T:.12f} target={want:.12f}")
    scan = period_scan(m, 0.05, 0.7, n=20)
    print(f"    critical amplitudes {scan.critical_amplitudes}, expected {float(u_inverse(m, 1 / math.sqrt(2))):.10f}")


if __name__ == "__main__":
    main()
