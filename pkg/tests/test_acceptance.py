"""Acceptance criteria AC1-AC11, each at its stated tolerance and time budget.

Every test prints one ``ACk PASS|FAIL`` line; the lines are repeated in the
pytest terminal summary.  Run alone with ``pytest tests/test_acceptance.py``
or as a script.
"""

import math
import time

import numpy as np
import pytest

import _oracles
from _report import record
from tensorglm import cli
from tensorglm.activation import Activation, output_mi, output_mi_dq, output_mi_dr, rho_x
from tensorglm.observables import detect_lambda_c, limit_curve, limit_resolver, resolver, sweep_lambda
from tensorglm.oracle import immse_check, mc_estimates, mc_mutual_information, posterior_weights, sample_instance
from tensorglm.potential import ModelParams, OverlapPoint, psi, psi_tilde, tensor_term
from tensorglm.prior import Prior, scalar_mi, scalar_mmse
from tensorglm.quadrature import gauss_hermite_rule
from tensorglm.solver import FixedPointConfig, fixed_point_step, solve_variational

pytestmark = pytest.mark.slow

SIGN, LIN, DZ = Activation.sign(), Activation.linear(), Activation.sign_deadzone(0.5)
GAUSS, RAD = Prior.gaussian(), Prior.rademacher()


def _finish(code, checks, detail, t0, budget):
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < budget
    record(code, ok, detail, elapsed, budget)
    assert all(checks), detail
    assert elapsed < budget, f"{code} took {elapsed:.1f} s, budget {budget} s"


def _lc(template, lams, cfg=None):
    curve = sweep_lambda(template, lams, cfg)
    return detect_lambda_c(curve, resolve=resolver(template, cfg)), curve


def test_ac1_linear_gaussian_closed_forms():
    t0 = time.perf_counter()
    worst = 0.0
    grid_q = np.linspace(0.0, 1.0, 10)
    grid_r = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 9)])
    for lam, alpha in ((8.0, 1.0), (5.0, 2.5)):
        p = ModelParams(lam, alpha, GAUSS, LIN)
        cfg = FixedPointConfig(damping=1.0)
        for qx in grid_q:
            R = lam * qx * qx / 2
            for qs in grid_q:
                gap = 1.0 - qs
                worst = max(worst, abs(output_mi(LIN, R, qs, 1.0) - 0.5 * math.log1p(R * gap)),
                            abs(output_mi_dr(LIN, R, qs, 1.0) - 0.5 * gap / (1 + R * gap)),
                            abs(output_mi_dq(LIN, R, qs, 1.0) + 0.5 * R / (1 + R * gap)))
                for rs in grid_r:
                    ref, step, _ = _oracles.linear_gaussian(lam, alpha, qx, qs, rs)
                    pt = OverlapPoint(qx, qs, rs)
                    tilde = 0.5 * math.log1p(rs) + alpha * 0.5 * math.log1p(R * gap) - rs * gap / 2
                    got = fixed_point_step(p, pt, cfg).as_tuple()
                    worst = max(worst, abs(psi(p, pt) - ref),
                                abs(psi_tilde(alpha, R, rs, qs, GAUSS, LIN) - tilde),
                                *(abs(a - b) for a, b in zip(got, step)))
    _finish("AC1", [worst < 1e-7], f"max closed-form deviation {worst:.2e} (tol 1e-7) on 10x10x10 grid x 2",
            t0, 10)


def test_ac2_identity_suite():
    t0 = time.perf_counter()
    rule = gauss_hermite_rule()
    h = 1e-4
    dr_err = mmse_err = 0.0
    shape_ok = True
    rs_grid = np.linspace(0.0, 30.0, 61)
    for prior in (GAUSS, RAD, Prior.two_point(1.0, -1.0, 0.6), Prior.bernoulli_rademacher(0.3)):
        for r in (0.05, 0.5, 2.0, 8.0, 30.0):
            cd = (scalar_mi(prior, r + h, rule) - scalar_mi(prior, r - h, rule)) / (2 * h)
            mmse_err = max(mmse_err, abs(scalar_mmse(prior, r, rule) - 2 * cd))
        f = np.array([scalar_mi(prior, r, rule) for r in rs_grid])
        d = np.diff(f) / np.diff(rs_grid)
        rho_s = prior.variance if prior.kind == "gaussian" else float(np.dot(prior.atoms[1], prior.atoms[0] ** 2))
        shape_ok &= bool(np.all(d >= -1e-10) and np.all(np.diff(d) <= 1e-8) and np.all(d <= rho_s / 2 + 1e-9))
    for act in (LIN, SIGN, DZ):
        rx = rho_x(act, 1.0, rule)
        for r in (0.3, 2.0, 10.0):
            for q in (0.0, 0.5, 0.9):
                cd = (output_mi(act, r + h, q, 1.0) - output_mi(act, r - h, q, 1.0)) / (2 * h)
                dr_err = max(dr_err, abs(output_mi_dr(act, r, q, 1.0) - cd))
        for q in (0.0, 0.5):
            f = np.array([output_mi(act, r, q, 1.0) for r in rs_grid])
            d = np.diff(f) / np.diff(rs_grid)
            shape_ok &= bool(np.all(d >= -1e-10) and np.all(np.diff(d) <= 1e-8) and np.all(d <= rx / 2 + 1e-9))
    _finish("AC2", [dr_err < 1e-5, mmse_err < 1e-5, shape_ok],
            f"dI/dr vs central diff {dr_err:.1e}, mmse vs 2 dI/dr_s {mmse_err:.1e} (tol 1e-5); "
            f"monotone/concave/Lipschitz {'ok' if shape_ok else 'violated'}", t0, 30)


def test_ac3_rank_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    fact_err = r2_err = 0.0
    for _ in range(2000):
        rho, lam = rng.uniform(0.01, 5.0), rng.uniform(0.1, 50.0)
        q = rng.uniform(0, rho)
        # the package evaluates ranks 2 and 3 in factored form; compare with the general polynomial
        general = {r: lam / (2 * math.factorial(r)) * (rho**r + (r - 1) * q**r - r * q ** (r - 1) * rho)
                   for r in (2, 3)}
        fact_err = max(fact_err, abs(tensor_term(lam, 3, rho, q) - general[3]) / max(1.0, lam * rho**3),
                       abs(lam / 12 * (rho - q) ** 2 * (rho + 2 * q) - general[3]) / max(1.0, lam * rho**3))
        r2_err = max(r2_err, abs(tensor_term(lam, 2, rho, q) - general[2]) / max(1.0, lam * rho**2),
                     abs(lam / 4 * (rho - q) ** 2 - general[2]) / max(1.0, lam * rho**2))
    dl = 1e-2
    env_err, used = 0.0, {}
    for r in (2, 3, 4):
        tmpl = ModelParams(1.0, 1.0, GAUSS, SIGN, rank=r)
        used[r] = 0
        for lam in (1.0, 3.0, 6.0, 10.0, 16.0, 24.0):
            lo, mid, hi = sweep_lambda(tmpl, [lam - dl, lam, lam + dl])
            if abs(hi.q_x_star - lo.q_x_star) > 0.05 * mid.rho_x or mid.near_degenerate:
                continue  # transition cell
            slope = (hi.psi - lo.psi) / (2 * dl)
            env_err = max(env_err, abs(slope - mid.mmse / (2 * math.factorial(r))))
            used[r] += 1
    enough = all(v >= 4 for v in used.values())
    _finish("AC3", [fact_err < 1e-12, r2_err < 1e-12, env_err < 1e-3, enough],
            f"factored rank-3 {fact_err:.1e}, rank-2 {r2_err:.1e} (tol 1e-12); dh/dlam vs mmse/(2 r!) "
            f"{env_err:.1e} (tol 1e-3) at {used} points", t0, 300)


def test_ac4_sign_threshold():
    t0 = time.perf_counter()
    lc, _ = _lc(ModelParams(1.0, 1e-12, GAUSS, SIGN), np.linspace(5.0, 10.0, 11))
    ok = lc is not None and 6.8 <= lc.lambda_c <= 7.3 and lc.is_discontinuous
    _finish("AC4", [ok], f"Sign/Gaussian alpha=1e-12: lambda_c={lc.lambda_c:.5f}, discontinuous="
            f"{lc.is_discontinuous} (want [6.8, 7.3], true)", t0, 600)


def test_ac5_linear_threshold():
    t0 = time.perf_counter()
    lams = np.linspace(7.0, 10.0, 13)
    found, checks = [], []
    for name, prior in (("gaussian", GAUSS), ("rademacher", RAD)):
        lim = detect_lambda_c(limit_curve(lams, prior, LIN), resolve=limit_resolver(prior, LIN))
        full, _ = _lc(ModelParams(1.0, 1e-6, prior, LIN), lams)
        for tag, lc in (("limit", lim), ("alpha=1e-6", full)):
            checks.append(lc is not None and 8.4 <= lc.lambda_c <= 9.1 and lc.is_discontinuous)
            found.append(f"{name}/{tag} {lc.lambda_c:.4f}{'' if lc.is_discontinuous else ' (continuous)'}")
    _finish("AC5", checks, "Linear lambda_c: " + ", ".join(found) + " (want [8.4, 9.1], jump)", t0, 900)


def test_ac6_monotone_boundary():
    t0 = time.perf_counter()
    alphas = (0.25, 0.5, 1.0, 2.0, 4.0)
    lcs = []
    for a in alphas:
        lc, _ = _lc(ModelParams(1.0, a, GAUSS, SIGN), np.linspace(2.0, 9.0, 15))
        lcs.append(math.nan if lc is None else lc.lambda_c)
    mono = all(b <= a + 1e-3 for a, b in zip(lcs, lcs[1:]))
    _finish("AC6", [all(math.isfinite(v) for v in lcs), mono],
            "Sign/Gaussian lambda_c(alpha) " + ", ".join(f"{a:g}:{v:.4f}" for a, v in zip(alphas, lcs))
            + f" nonincreasing={mono}", t0, 1800)


def test_ac7_small_alpha_agreement():
    t0 = time.perf_counter()
    lams = np.linspace(4.0, 12.0, 20)
    parts, checks = [], []
    for name, prior, act in (("Gaussian/Sign", GAUSS, SIGN), ("TwoPoint(0.6)/Linear", Prior.two_point(1.0, -1.0, 0.6), LIN)):
        lim = np.array([p.mmse for p in limit_curve(lams, prior, act)])
        tmpl = ModelParams(1.0, 1e-12, prior, act)
        unrouted = np.array([p.mmse for p in sweep_lambda(tmpl, lams, FixedPointConfig(route_limit=False))])
        routed = np.array([p.mmse for p in sweep_lambda(tmpl, lams)])
        d_full, d_routed = float(np.max(np.abs(unrouted - lim))), float(np.max(np.abs(routed - lim)))
        checks += [d_full < 1e-3, d_routed < 1e-3]
        parts.append(f"{name} full-map {d_full:.1e}, routed {d_routed:.1e}")
    _finish("AC7", checks, "max |mmse - limit| over 20 lambda: " + "; ".join(parts) + " (tol 1e-3)", t0, 900)


def test_ac8_asymmetric_character():
    t0 = time.perf_counter()
    lams = np.linspace(1.0, 12.0, 23)
    parts, checks = [], []
    for pp, want in ((0.6, True), (0.7, False)):
        for a in (1e-12, 1.0):
            lc, _ = _lc(ModelParams(1.0, a, Prior.two_point(1.0, -1.0, pp), LIN), lams)
            got = None if lc is None else lc.is_discontinuous
            checks.append(got is want)
            parts.append(f"p={pp} alpha={a:g}: {'jump' if got else 'continuous' if got is False else 'none'}")
    _finish("AC8", checks, "; ".join(parts) + " (want p=0.6 jump, p=0.7 continuous)", t0, 1200)


def test_ac9_oracle_properties():
    t0 = time.perf_counter()
    params = ModelParams(5.0, 2.0, RAD, LIN)
    norm = max(abs(posterior_weights(params, sample_instance(params, 12, 6, seed=s)).sum() - 1) for s in range(10))
    zero = mc_mutual_information(params, 12, 6, 500, lam=0.0)
    ceiling = mc_mutual_information(params.with_(lam=1e4), 8, 4, 200)
    target = 4 * math.log(2) / 8
    reps = {(n, p): immse_check(params, n, p, dlambda=0.5) for n, p in ((12, 6), (16, 8))}
    checks = [norm < 1e-12, abs(zero.estimate) <= 3 * zero.standard_error,
              abs(ceiling.estimate - target) < 0.02] + [r.passed for r in reps.values()]
    imm = ", ".join(f"{k}: dI/dlam {r.derivative:.4f} vs mmse/12 {r.predicted:.4f} slack {r.slack:.3f}"
                    for k, r in reps.items())
    _finish("AC9", checks, f"normalisation {norm:.1e}; MI(lam=0) {zero.estimate:.1e}+-{zero.standard_error:.1e}; "
            f"ceiling {ceiling.estimate:.4f} vs {target:.4f}; I-MMSE {imm}", t0, 600)


@pytest.fixture(scope="module")
def finite_size():
    t0 = time.perf_counter()
    params = ModelParams(10.0, 2.0, RAD, SIGN)
    res = solve_variational(params)
    mi, mmse = mc_estimates(params, 24, 12)
    theory_mmse = params.rho_x**3 - res.point.q_x**3
    return dict(mi=mi, mmse=mmse, h=res.psi_value, theory_mmse=theory_mmse, t0=t0)


def test_ac10_finite_size_mi(finite_size):
    f = finite_size
    rel = abs(f["mi"].estimate - f["h"]) / f["h"]
    _finish("AC10-MI", [rel <= 0.15], f"(24,12) Sign/Rademacher lam=10 alpha=2: MI {f['mi'].estimate:.4f}"
            f"+-{f['mi'].standard_error:.4f} vs h {f['h']:.5f}, rel {rel:.3f} (tol 0.15)", f["t0"], 900)


@pytest.mark.xfail(strict=True, reason="asymptotic MMSE is exactly 0 here, so no positive finite-n "
                   "estimate lies within 15% relative of it; see the decisions ledger")
def test_ac10_finite_size_mmse(finite_size):
    f = finite_size
    est, th = f["mmse"].estimate, f["theory_mmse"]
    ok = abs(est - th) <= 0.15 * abs(th)
    _finish("AC10-MMSE", [ok], f"MMSE {est:.4f}+-{f['mmse'].standard_error:.4f} vs asymptotic {th:.3g}: "
            f"|diff| {abs(est - th):.4f} vs allowed {0.15 * abs(th):.3g}", f["t0"], 900)


def test_ac11_determinism(tmp_path):
    t0 = time.perf_counter()
    commands = {
        "sweep": (["sweep-lambda", "--activation", "sign", "--alpha", "1e-12", "--lambda-grid", "5:10:11"], "sweep.csv"),
        "limit": (["limit-curve", "--lambda-grid", "7:10:7"], "limit_curve.csv"),
        "phase": (["phase-diagram", "--lambda-grid", "4,8,12", "--alpha-grid", "1e-12,1"], "phase_diagram.csv"),
        "oracle": (["oracle", "--prior", "rademacher", "--activation", "sign", "--lambda-grid", "2,6", "--n", "8",
                    "--p", "4", "--mi-samples", "50", "--mmse-samples", "10", "--seed", "5"], "oracle.csv"),
    }
    same = {}
    for name, (argv, csv) in commands.items():
        blobs = []
        for threads in ("1", "1", "2"):
            out = tmp_path / name
            assert cli.main(argv + ["--threads", threads, "--out", str(out)]) == 0
            blobs.append((out / csv).read_bytes())
        same[name] = blobs[0] == blobs[1] == blobs[2]
    _finish("AC11", list(same.values()), f"byte-identical CSV on rerun and across thread counts: {same}", t0, 600)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
