"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL`` line with the measured
error and runtime, so ``pytest -s tests/test_acceptance.py`` reads as a report.
"""
import math
import time

import numpy as np
import pytest
from conftest import ANNULUS_CASES

from melnikov_sign import (
    AdmissibilityError,
    ExtendedPoint,
    GrazingError,
    Parameters,
    Region,
    diff_t,
    displacement,
    exp_At,
    gamma_minus,
    gamma_plus,
    integrate_piece,
    kernel_U,
    kernel_U_inner,
    melnikov,
    melnikov_grid,
    melnikov_values,
    parse,
    sin_oracle,
    tau0,
    v_of,
)
from melnikov_sign.cli import DEFAULT_VERIFY_EPS, ModelConfig, reproduce_p1, verify_payload
from melnikov_sign.numerics import DEFAULT_TOL

TWO_PI = 2 * math.pi
R = np.diag([-1.0, 1.0])


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


def test_criterion_1_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst_odd = worst_even = 0.0
    for i in range(1, 6):
        P = Parameters(1.0, 1.0, TWO_PI * i)
        phis = np.linspace(0, P.sigma, 64, endpoint=False)
        vals = melnikov_values(phis, P, parse("sin(t)"))
        ref = np.array([sin_oracle(i, p, 1.0, 1.0, 1.0) for p in phis])
        worst_odd = max(worst_odd, float(np.max(np.abs(vals - ref))))
        if i % 2 == 0:
            worst_even = max(worst_even, float(np.max(np.abs(vals))))
    dt = time.perf_counter() - t0
    ok = worst_odd <= 1e-8 and worst_even <= 1e-10 and dt < 2.0
    assert report(1, ok, f"max|M-oracle|={worst_odd:.2e} max|M_even|={worst_even:.2e} t={dt:.2f}s")


def test_criterion_2_flow_matches_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    for alpha, eta, ys in ANNULUS_CASES.values():
        P = Parameters(alpha, eta, 100.0)
        for y0 in ys:
            for region, direction, exact in ((Region.PLUS, 1, gamma_plus), (Region.MINUS, -1, gamma_minus)):
                seg = integrate_piece(ExtendedPoint(0.0, 0.0, y0), region, direction, P)
                for t, x, y in zip(seg.tau, seg.x, seg.y):
                    q = exact(t, y0, P)
                    worst = max(worst, abs(x - q.x), abs(y - q.y))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 5.0
    assert report(2, ok, f"sup discrepancy={worst:.2e} t={dt:.2f}s")


def test_criterion_3_identities(report):
    t0 = time.perf_counter()
    errs = dict.fromkeys(["v_tau0", "endpoint", "midpoint", "reversible", "det", "row", "kernel"], 0.0)
    for alpha, eta, ys in ANNULUS_CASES.values():
        P = Parameters(alpha, eta, 1.0)
        for y0 in ys:
            T = tau0(y0, P)
            errs["v_tau0"] = max(errs["v_tau0"], abs(v_of(T, P) - y0) / y0)
            end = gamma_plus(T, y0, P)
            errs["endpoint"] = max(errs["endpoint"], abs(end.x), abs(end.y + y0))
            errs["midpoint"] = max(errs["midpoint"], abs(gamma_plus(T / 2, y0, P).y))
            for t in (0.0, 0.3 * T, T):
                g = gamma_plus(t, y0, P)
                row = np.array([alpha - eta * g.x, g.y]) @ exp_At(t, eta)
                errs["row"] = max(errs["row"], float(np.max(np.abs(row - [alpha, y0]))))
        for t in np.linspace(-3, 3, 13):
            E = exp_At(t, eta)
            errs["reversible"] = max(errs["reversible"], float(np.max(np.abs(E - R @ exp_At(-t, eta) @ R))))
            errs["det"] = max(errs["det"], abs(np.linalg.det(E) - 1.0))
        s = tau0(ys[2], P)
        for t in np.linspace(0, s, 9):
            errs["kernel"] = max(errs["kernel"], abs(kernel_U(t, s, P) - kernel_U_inner(t, s, P)))
    dt = time.perf_counter() - t0
    limits = {"v_tau0": 1e-12, "endpoint": 1e-10, "midpoint": 1e-10, "reversible": 1e-13,
              "det": 1e-12, "row": 1e-10, "kernel": 1e-12}
    ok = all(errs[k] <= limits[k] for k in limits) and dt < 1.0
    detail = " ".join(f"{k}={v:.1e}" for k, v in errs.items())
    assert report(3, ok, f"{detail} t={dt:.2f}s")


def test_criterion_4_melnikov_convergence(report):
    t0 = time.perf_counter()
    cfg = ModelConfig(1.0, 1.0, TWO_PI, "sin(t)")
    payload = verify_payload(cfg, parse("sin(t)"), DEFAULT_TOL, list(DEFAULT_VERIFY_EPS), 8)
    dt = time.perf_counter() - t0
    slope = payload["slope"]
    ok = slope is not None and abs(slope - 1.0) <= 0.15 and dt < 30.0
    assert report(4, ok, f"sup-norm log-log slope={slope:.4f} over eps={DEFAULT_VERIFY_EPS} t={dt:.2f}s")


def test_criterion_5_p1_reproduction(report):
    t0 = time.perf_counter()
    payload = reproduce_p1(2, 1.0, 1.0, 1.0, 1e-3)
    dt = time.perf_counter() - t0
    rows = payload["rows"]
    periods_ok = [r["sigma"] for r in rows] == pytest.approx([TWO_PI, 3 * TWO_PI])
    ok = (periods_ok and dt < 60.0 and all(
        r["ok"] and r["residual"] <= 1e-10 and abs(r["y0"] - r["v_half_sigma"]) <= 1e-2
        and r["matches"] == ["v_half_sigma"] for r in rows))
    detail = "; ".join(
        f"k={r['k']} res={r.get('residual', math.nan):.1e} "
        f"|y0-v|={abs(r.get('y0', math.nan) - r['v_half_sigma']):.1e} "
        f"extrap err v(sigma/2)={r.get('err_v_half_sigma', math.nan):.1e} "
        f"P1 formula={r.get('err_p1_formula', math.nan):.1e} -> {r.get('matches')}"
        for r in rows)
    assert report(5, ok, f"{detail} t={dt:.2f}s")


def test_criterion_6_zero_finding(report):
    res = melnikov_grid(Parameters(1.0, 1.0, TWO_PI), parse("sin(t)"))
    z = res.zeros
    ok = (len(z) == 2 and abs(z[0].phi_star) <= 1e-10 and abs(z[1].phi_star - math.pi) <= 1e-10
          and abs(z[0].dM - 2.0) <= 1e-8 and abs(z[1].dM + 2.0) <= 1e-8)
    detail = ", ".join(f"({q.phi_star:.12f}, {q.dM:+.10f})" for q in z)
    assert report(6, ok, f"zeros {detail}")


def test_criterion_7_properties(report):
    checks = {}
    # grazing: from rest at x = 2e-12 with a weak fold the return speed is ~6e-8
    try:
        integrate_piece(ExtendedPoint(0.0, 2e-12, 0.0), Region.PLUS, 1, Parameters(1e-3, 1.0, TWO_PI))
        checks["grazing"] = False
    except GrazingError:
        checks["grazing"] = True
    # sigma-periodicity of M and of the displacement
    P = Parameters(1.5, 0.5, 9.0)
    f = parse("sin(2*pi*t/9)*(1 + x) + cos(4*pi*t/9)*y")
    dm = max(abs(melnikov(p + 9.0, P, f) - melnikov(p, P, f)) for p in np.linspace(0, 9, 5))
    dd = 0.0
    for th in np.linspace(0, 9, 5):
        a = displacement(th, 0.8, 0.01, P, f)
        b = displacement(th + 9.0, 0.8, 0.01, P, f)
        dd = max(dd, abs(a.delta1 - b.delta1), abs(a.delta3 - b.delta3))
    checks["periodic"] = dm <= 1e-10 and dd <= 1e-10
    # symbolic derivative vs central differences
    g = parse("cos(3*t)*y + exp(sin(t))*x^2 - t^3/(1 + y^2)")
    dg = diff_t(g)
    h = 1e-5
    rel = 0.0
    for t, x, y in ((0.3, 0.5, -0.2), (1.7, -1.0, 0.8), (4.0, 0.1, 2.0)):
        fd = (g.eval(t + h, x, y) - g.eval(t - h, x, y)) / (2 * h)
        rel = max(rel, abs(dg.eval(t, x, y) - fd) / max(1.0, abs(fd)))
    checks["diff_t"] = rel <= 1e-6
    # admissibility: at and outside the interval ends
    gated = 0
    for bad in (Parameters(1, -1, TWO_PI), Parameters(1, -1, 7.0), Parameters(-1, -1, TWO_PI),
                Parameters(-1, -1, 2 * TWO_PI), Parameters(-1, -1, 14.0)):
        try:
            melnikov(0.0, bad, parse("sin(t)"))
        except AdmissibilityError:
            gated += 1
    checks["admissibility"] = gated == 5
    ok = all(checks.values())
    assert report(7, ok, f"{checks} |dM|={dm:.1e} |dDelta|={dd:.1e} diff_t rel={rel:.1e}")
