"""Acceptance criteria 1-12, one test each.

Every test records a PASS/FAIL line (shown in the "acceptance criteria"
section of the pytest summary and printed with -s) before asserting.
"""

import json
import math
import time

import numpy as np
from scipy.integrate import solve_ivp

from bcnfchaos import cone as cone_mod
from bcnfchaos.bcnf import BcnfParams, E1, eval_g, eval_g_inverse
from bcnfchaos.cli import main
from bcnfchaos.converter import (
    ConverterParams,
    attractor_export,
    bbox_jaccard,
    converter_bcnf_params,
    lyapunov_estimate,
    omega_bcb,
    strobo_map,
)
from bcnfchaos.partition import covering_check, partition_profile, preimage_lines
from bcnfchaos.region import ConvexPolygon, map_polygon

from conftest import ACCEPTANCE_LINES, CONVERTER_BCNF, SAMPLE
from test_partition import close, pullback_lines

STANDARD = ConverterParams.standard(5.45)


def record(k, ok, detail, t0):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} ({time.perf_counter() - t0:.2f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_normal_form_values():
    t0 = time.perf_counter()
    got = np.array(converter_bcnf_params(STANDARD).astuple())
    want = np.array([1.1694, 0.2985, 1.1970, 4.6325])
    err = np.abs(got - want).max()
    record(1, err <= 5e-5, f"normal form {np.round(got, 6).tolist()}, max error {err:.2e} <= 5e-5", t0)


def test_criterion_02_omega_bcb():
    t0 = time.perf_counter()
    w = omega_bcb(STANDARD)
    record(2, 5.4040 <= w <= 5.4050, f"omega_BCB = {w:.6f} in [5.4040, 5.4050]", t0)


def test_criterion_03_partition_indices():
    t0 = time.perf_counter()
    a = partition_profile(SAMPLE)
    b = partition_profile(CONVERTER_BCNF)
    ok = (a.p_star, a.q_star, a.q_star2) == (3, 3, 5) and (b.q_star, b.q_star2) == (2, 3)
    record(3, ok, f"sample params (p*, q*, q**) = ({a.p_star}, {a.q_star}, {a.q_star2}); "
                  f"converter (q*, q**) = ({b.q_star}, {b.q_star2})", t0)


def test_criterion_04_covering():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, p in (("sample", SAMPLE), ("converter", CONVERTER_BCNF)):
        for side in ("L", "R"):
            rep = covering_check(p, side, 10_000)
            ok &= rep.ok and rep.samples == 10_000 and not rep.violations
            lo, hi = rep.allowed
            parts.append(f"{name}/{side} chi in [{rep.observed_min}, {rep.observed_max}] "
                         f"allowed [{lo}, {hi}], {len(rep.violations)} violations")
    record(4, ok, "; ".join(parts), t0)


def test_criterion_05_recurrence_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(50):
        side = rng.choice(["L", "R"])
        p = BcnfParams(rng.uniform(-2, 2), rng.uniform(0.2, 3), rng.uniform(-2, 2), rng.uniform(0.2, 3))
        for ln, (vert, a, b) in zip(preimage_lines(p, side, 20), pullback_lines(p, side, 20)):
            if vert != ln.is_vertical:
                bad += 1
            elif vert:
                bad += not close(ln.vertical_x1, a)
            else:
                bad += not (close(ln.slope, a) and close(ln.intercept, b))
    record(5, bad == 0, f"50 parameter sets x 20 lines vs two-point pull-back, {bad} mismatches at 1e-8", t0)


def test_criterion_06_pq_bounds(capsys):
    t0 = time.perf_counter()
    code = main(["certify", "--converter", "--omega-at-bcb"])
    d = json.loads(capsys.readouterr().out)
    pq = tuple(d["pq_bounds"] or ())
    prof = d["profile"]
    p_star = prof["p_star"]
    consistent = (len(pq) == 4 and pq[2] >= prof["q_star"] and pq[3] <= prof["q_star2"]
                  and (p_star == "inf" or pq[1] <= p_star + 1))
    ok = pq == (6, 8, 2, 3) and consistent and code == 0
    record(6, ok, f"certify pq_bounds = {pq}, verdict {d['verdict']}, "
                  f"q* = {prof['q_star']}, q** = {prof['q_star2']}, p* = {p_star}", t0)


def test_criterion_07_cone():
    t0 = time.perf_counter()
    fam = cone_mod.matrix_family(CONVERTER_BCNF, 6, 8, 2, 3)
    found = cone_mod.find_cone(fam)
    ok = found is not None
    detail = "no cone found"
    if ok:
        cone, cert = found
        cert = cone_mod.verify_cone(fam, cone)
        robust = cone_mod.lyapunov_lower_bound(cert.c, 8, 3).robust
        ok = (cert.certified and abs(cone.theta0 - 0.8062) <= 0.05 and abs(cone.theta1 - 2.0227) <= 0.05
              and cert.c > 1.01 and robust > 0)
        detail = (f"cone [{cone.theta0:.5f}, {cone.theta1:.5f}], c = {cert.c:.5f}, "
                  f"robust bound ln((c+1)/2)/11 = {robust:.5f}")
    record(7, ok, detail, t0)


def _flow_step(cp, w, n):
    """One period of the switched ODEs by numerical integration, with the
    switch located as an event where the ramp meets the sampled signal."""
    lam = np.array([cp.lambda1, cp.lambda2])
    xi = cp.phi(w)
    ramp = cp.ramp_top

    def on(t, x):
        return lam * (x - 1.0)

    def off(t, x):
        return lam * x

    def meet(t, x):
        return ramp * (t - n) - xi

    meet.terminal = True
    if xi <= 0:
        segs = [(off, n)]
    else:
        sol = solve_ivp(on, (n, n + 1), w, method="DOP853", rtol=1e-13, atol=1e-14, events=meet)
        if sol.status == 0:
            return sol.y[:, -1]
        w, segs = sol.y[:, -1], [(off, sol.t[-1])]
    f, a = segs[0]
    sol = solve_ivp(f, (a, n + 1), w, method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


def test_criterion_08_strobe_vs_flow():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for w0 in rng.uniform(0.0, 1.5, (20, 2)):
        w = w0
        for n in range(100):
            nxt = _flow_step(STANDARD, w, n)
            worst = max(worst, np.abs(strobo_map(STANDARD, w) - nxt).max())
            w = nxt
    record(8, worst <= 1e-9, f"20 orbits x 100 intervals, max per-step difference {worst:.2e} <= 1e-9", t0)


def test_criterion_09_lyapunov_signs():
    t0 = time.perf_counter()
    lam = {om: lyapunov_estimate(STANDARD.with_omega(om), (0.5, 0.5), 100_000).exponent
           for om in (5.35, 5.45)}
    scan = {round(om, 3): lyapunov_estimate(STANDARD.with_omega(om), (0.5, 0.5), 100_000).exponent
            for om in np.linspace(5.50, 5.60, 11)}
    signs = {v > 0 for v in scan.values()}
    ok = lam[5.35] < 0 and lam[5.45] > 0 and signs == {True, False}
    last_pos = max((om for om, v in scan.items() if v > 0), default=None)
    record(9, ok, f"lambda(5.35) = {lam[5.35]:.4f}, lambda(5.45) = {lam[5.45]:.4f}, "
                  f"sign change in [5.50, 5.60] (last positive grid value at {last_pos})", t0)


def test_criterion_10_lower_bound_consistency():
    t0 = time.perf_counter()
    fam = cone_mod.matrix_family(CONVERTER_BCNF, 6, 8, 2, 3)
    _, cert = cone_mod.find_cone(fam)
    bound = cone_mod.lyapunov_lower_bound(cert.c, 8, 3).bcnf
    lam = lyapunov_estimate(CONVERTER_BCNF, (0.1, 0.1), 1_000_000).exponent
    record(10, lam >= bound - 0.005, f"measured lambda = {lam:.5f} >= ln(c)/11 - 0.005 = {bound - 0.005:.5f}", t0)


def test_criterion_11_attractor_correspondence():
    t0 = time.perf_counter()
    a = attractor_export("strobo", STANDARD, 10_000, 100)
    b = attractor_export("bcnf", STANDARD, 10_000, 100)
    j = bbox_jaccard(a.points, b.points)
    record(11, j > 0.5, f"bounding-box Jaccard ratio at omega = 5.45: {j:.3f} > 0.5", t0)


def _random_params(rng):
    return BcnfParams(rng.uniform(-3, 3), rng.uniform(0.05, 3), rng.uniform(-3, 3), rng.uniform(0.05, 3))


def _random_convex(rng):
    ang = np.sort(rng.uniform(0, 2 * math.pi, rng.integers(3, 9)))
    r = rng.uniform(0.2, 3)
    c = rng.normal(size=2)
    pts = c + r * np.column_stack([np.cos(ang), np.sin(ang)])
    try:
        return ConvexPolygon.from_points(pts)
    except Exception:
        return None


def test_criterion_12_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    n = 1000
    fails = dict.fromkeys(["inverse", "continuity", "sign", "scaling", "area"], 0)
    for _ in range(n):
        p = _random_params(rng)
        x = rng.uniform(-10, 10, 2)
        s = 1 + np.abs(x).max()
        if not (np.allclose(eval_g_inverse(p, eval_g(p, x)), x, atol=1e-9 * s)
                and np.allclose(eval_g(p, eval_g_inverse(p, x)), x, atol=1e-9 * s / min(p.delta_L, p.delta_R))):
            fails["inverse"] += 1
        on = np.array([0.0, x[1]])
        if not np.allclose(p.A_L @ on + E1, p.A_R @ on + E1, rtol=0, atol=1e-12 * s):
            fails["continuity"] += 1
        y = eval_g_inverse(p, x)
        if not (y[0] * x[1] < 0 or (x[1] == 0 and y[0] == 0)):
            fails["sign"] += 1
    for _ in range(n):
        # families with positive determinant, random cone and scale
        mats = []
        for _ in range(rng.integers(1, 4)):
            M = rng.normal(size=(2, 2))
            if np.linalg.det(M) < 0:
                M[:, 0] *= -1
            mats.append(M)
        fam = cone_mod.MatrixFamily.of(*mats)
        t0c = rng.uniform(0, math.pi)
        cone = cone_mod.Cone(t0c, t0c + rng.uniform(0.01, 3.0))
        k = rng.uniform(0.1, 10)
        a, b = cone_mod.verify_cone(fam, cone), cone_mod.verify_cone(fam.scaled(k), cone)
        if a.contracting_invariant != b.contracting_invariant or not math.isclose(b.c, k * a.c, rel_tol=1e-9):
            fails["scaling"] += 1
    done = 0
    while done < n:
        P = _random_convex(rng)
        if P is None:
            continue
        done += 1
        p = _random_params(rng)
        parts = [(P.clip((1, 0), 0), p.delta_L), (P.clip((-1, 0), 0), p.delta_R)]
        want = sum(d * q.area for q, d in parts if q is not None)
        got = sum(Q.area for Q in map_polygon(p, P))
        if not math.isclose(got, want, rel_tol=1e-8):
            fails["area"] += 1
    ok = not any(fails.values())
    record(12, ok, f"{n} cases per property, failures {fails}", t0)
