"""Acceptance criteria, one test per criterion at the stated tolerance.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from conftest import ACCEPTANCE_LINES
from sectoria import contour_calculus as cc
from sectoria import model_spaces as ms
from sectoria import operator_core as oc
from sectoria import square_function as sf
from sectoria.symbols import get_symbol, log_pow


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((num, bool(ok), detail))
    assert ok, detail


def _family_name(A):
    return A.label["family"] if isinstance(A.label, dict) else "matrix"


# 1 ---------------------------------------------------------------------------

REGISTRY = ["sqrt_over_1p", "z_over_1pz2", "phi", "z_pow:0.5", "z_pow:1.5", "z_pow:-0.4", "log", "z_ipow:0.7"]


def _seeded_diagonalizable(i: int):
    n = 2 + i % 7
    kind = i % 3
    if kind == 0:
        return oc.make_family("random_accretive", {"n": n}, seed=i)
    if kind == 1:
        return oc.make_family("conjugated_accretive", {"n": n, "angle": 0.9, "cond": 20.0}, seed=i)
    rng = np.random.default_rng(i)
    vals = rng.uniform(0.2, 5.0, n) * np.exp(1j * rng.uniform(-1.2, 1.2, n))
    return oc.make_family("complex_diagonal", {"values": vals.tolist()}, seed=i)


def test_criterion_01_calculus_matches_spectral_oracle():
    worst = {"dunford_riesz": 0.0, "extended_calculus": 0.0}
    for i in range(20):
        A = _seeded_diagonalizable(i)
        for name in REGISTRY:
            sym = get_symbol(name)
            oracle = cc.spectral_function(A, sym)
            scale = np.linalg.norm(oracle)
            ext = cc.extended_calculus(A, sym)
            worst["extended_calculus"] = max(worst["extended_calculus"], np.linalg.norm(ext - oracle) / scale)
            if sym.growth[0] > 0 and sym.growth[1] < 0:
                dr = cc.dunford_riesz(A, sym)
                worst["dunford_riesz"] = max(worst["dunford_riesz"], np.linalg.norm(dr - oracle) / scale)
    ok = max(worst.values()) <= 1e-7
    errs = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    record(1, ok, f"calculus vs spectral oracle, 20 operators x {len(REGISTRY)} symbols: max rel err {errs} (tol 1e-7)")


# 2 ---------------------------------------------------------------------------


def test_criterion_02_square_function_constant():
    # Independent oracle: int_0^inf |psi(s)|^2 ds/s by adaptive 1-D quadrature.
    integral, _ = scipy.integrate.quad(lambda s: s / (1 + s) ** 2 / s, 0, np.inf, epsabs=1e-13, epsrel=1e-13)
    ops = [
        oc.make_family("positive_diagonal", {"values": v})
        for v in ([1.0], [1.0, 2.0, 3.0], [0.01, 1.0, 100.0], [0.3, 7.0])
    ]
    worst = 0.0
    for A in ops:
        gap = sf.equivalence_constants(sf.gram_operator(A, "sqrt_over_1p"))
        target = math.sqrt(integral)
        worst = max(worst, abs(gap.m - target), abs(gap.M - target))
    ok = abs(integral - 1.0) < 1e-10 and worst <= 1e-6
    record(2, ok, f"(m, M) vs sqrt of 1-D integral {integral:.12f}: max deviation {worst:.2e} (tol 1e-6)")


# 3 ---------------------------------------------------------------------------


def test_criterion_03_mcintosh_identity():
    worst = 0.0
    for n in range(2, 9):
        A = oc.make_family("random_accretive", {"n": n}, seed=100 + n)
        for x in sf.sample_vectors(n, 3, seed=n)[:3]:
            rep = sf.mcintosh_identity_check(A, x, tol=1e-4)
            worst = max(worst, rep.residuals["relative_difference"])
    record(3, worst <= 1e-4, f"square norm vs L2 norm of observation, dims 2-8: max rel diff {worst:.2e} (tol 1e-4)")


# 4 ---------------------------------------------------------------------------


def test_criterion_04_factorization(builtins):
    worst, min_points = 0.0, 10**9
    for A in builtins:
        for theta in (2.0, 2.5):
            ev = ms.make_eval_set(A, theta)
            min_points = min(min_points, len(ev.exterior_points))
            rep = ms.verify_factorization(A, theta, 0.5, eval_set=ev, tol=1e-4)
            worst = max(worst, rep.residuals["max_relative"])
    ok = worst <= 1e-4 and min_points >= 8
    record(4, ok, f"O W u + J u over {min_points} exterior points, all families, theta 2.0/2.5: max {worst:.2e} (tol 1e-4)")


# 5 ---------------------------------------------------------------------------


def test_criterion_05_alpha_independence(builtins):
    worst = 0.0
    for A in builtins:
        for theta in (2.0, 2.5):
            alphas = [0.3, 0.5, 0.9 / theta * (math.pi / 2)]
            rep = ms.alpha_independence_check(A, theta, alphas, tol=1e-4)
            worst = max(worst, rep.residuals["max_relative"])
    record(5, worst <= 1e-4, f"pairwise J differences over alpha grid: max {worst:.2e} (tol 1e-4)")


# 6 ---------------------------------------------------------------------------


def test_criterion_06_kernel_membership(builtins):
    worst = 0.0
    for A in builtins:
        for theta in (2.0, 2.5):
            alpha = 0.9 / theta * (math.pi / 2)
            rep = ms.kernel_membership_check(A, theta, alpha, tol=1e-4)
            worst = max(worst, rep.residuals["max_ratio"])
    record(6, worst <= 1e-4, f"||W(delta h)|| / ||h|| over rational battery: max {worst:.2e} (tol 1e-4)")


# 7 ---------------------------------------------------------------------------


def test_criterion_07_char_fn_spectrum(builtins):
    wrong, probes = 0, 0
    for A in builtins:
        for alpha in (0.5, 0.7):
            rep = ms.char_fn_spectrum_check(ms.CharFn(A, alpha), margin=1e-3)
            wrong += rep.residuals["misclassified"]
            probes += len(rep.grid["probes"])
    record(7, wrong == 0, f"singular/regular classification of delta_alpha: {wrong} misclassified of {probes}")


# 8 ---------------------------------------------------------------------------


def test_criterion_08_log_gap(builtins):
    worst_change, all_finite = 0.0, True
    for A in builtins:
        for k, r in ((1, 0.6), (1, 1.0), (-1, 1.0)):
            rep = sf.log_gap_check(A, k, r, stable_tol=1e-2)
            consts = [rep.constants[c] for c in ("c1", "c2", "c_lower", "C")]
            all_finite &= bool(np.all(np.isfinite(consts)))
            worst_change = max(worst_change, rep.residuals["refine_change"])
    eps4 = [A for A in builtins if _family_name(A) == "jordan_shifted" and A.label["params"].get("eps") == 4.0]
    ok = all_finite and worst_change < 1e-2 and len(eps4) == 1
    record(8, ok, f"log-gap constants finite={all_finite}, max refinement change {worst_change:.2e} (tol 1e-2)")


# 9 ---------------------------------------------------------------------------


def test_criterion_09_admissibility():
    A1 = oc.make_family("positive_diagonal", {"values": [1.0]})
    val = sf.admissibility_integral(A1, (1, 1.0), np.array([1.0]))
    target = (2 * math.pi) ** -2 / 2
    err1 = abs(val - target)
    worst_change, worst_bound, worst_lyap = 0.0, 0.0, 0.0
    for n in range(2, 7):
        A = oc.make_family("random_accretive", {"n": n}, seed=200 + n)
        assert A.omega_est < math.pi / 2
        rep = sf.admissibility_check(A, (1, 1.0), stable_tol=1e-6)
        K = rep.constants["K"]
        worst_change = max(worst_change, rep.residuals["refine_change"])
        for x in sf.sample_vectors(n, 4, seed=n)[:4]:
            worst_bound = max(worst_bound, sf.admissibility_integral(A, (1, 1.0), x) / (K * np.vdot(x, x).real))
        # Lyapunov oracle: A* Q + Q A = C* C with C from the eigenbasis.
        C = cc.spectral_function(A, log_pow(1, 1.0)) @ cc.spectral_function(A, get_symbol("z_pow:0.5"))
        Q_ref = scipy.linalg.solve_continuous_lyapunov(A.matrix.conj().T, C.conj().T @ C)
        Q, _ = sf.admissibility_gram(A, (1, 1.0))
        worst_lyap = max(worst_lyap, np.linalg.norm(Q - Q_ref) / np.linalg.norm(Q_ref))
    ok = err1 <= 1e-6 and worst_change <= 1e-6 and worst_bound <= 1 + 1e-9 and worst_lyap <= 1e-6
    record(
        9,
        ok,
        f"diag(1) integral err {err1:.1e}; K refinement change {worst_change:.1e}; "
        f"max integral/(K|x|^2) {worst_bound:.6f}; Lyapunov rel diff {worst_lyap:.1e}",
    )


# 10 --------------------------------------------------------------------------


def test_criterion_10_imaginary_powers():
    worst_sup, worst_law = 0.0, 0.0
    for vals in ([1.0, 2.0, 3.0], [0.1, 10.0], [0.5, 1.5, 4.0, 9.0]):
        A = oc.make_family("positive_diagonal", {"values": vals})
        rep = cc.group_growth_scan(A, mu=0.1, s_range=(-5.0, 5.0), n_s=21, tol=1e-6)
        worst_sup = max(worst_sup, abs(rep.constants["sup_norm"] - 1.0))
        worst_law = max(worst_law, rep.residuals["group_law"])
    ok = worst_sup <= 1e-6 and worst_law <= 1e-6
    record(10, ok, f"|sup ||A^is|| - 1| = {worst_sup:.2e}, group-law residual {worst_law:.2e} (tol 1e-6)")


# 11 --------------------------------------------------------------------------


def test_criterion_11_theta_independence(builtins):
    worst_spread, worst_res = 0.0, 0.0
    ok = True
    for A in builtins:
        rep = ms.theta_independence_check(A, (2.0, 2.6), tol=1e-4)
        ok &= rep.passed
        r = rep.residuals
        worst_spread = max(worst_spread, r["factorization_spread"], r["ctr_spread"])
        worst_res = max(worst_res, *r["factorization"].values(), *r["ctr_intertwining"].values())
    record(11, ok, f"theta 2.0 vs 2.6: max residual {worst_res:.2e}, max spread {worst_spread:.2e} (tol 2e-4)")


# 12 --------------------------------------------------------------------------


def test_criterion_12_control_map_of_log_weight():
    """Literal statement: W_theta(phi_{r,x}) = Lambda_0(A)^{-r} x on diag(2,5).

    Expected to fail; see the corrected identity in test_model_spaces.py.
    """
    A = oc.make_family("positive_diagonal", {"values": [2.0, 5.0]})
    reps = [ms.w1_check(A, r, theta=2.0, k=0, factor=1.0, tol=1e-4) for r in (0.6, 1.0)]
    worst = max(rep.residuals["max_relative"] for rep in reps)
    ratios = ", ".join(f"r={rep.params['r']}: {rep.constants['ratio'].real:.4f}" for rep in reps)
    record(12, all(rep.passed for rep in reps), f"max rel residual {worst:.3e} (tol 1e-4); best-fit ratio {ratios}")


# 13 --------------------------------------------------------------------------


def test_criterion_13_duality():
    A = oc.make_family("random_accretive", {"n": 4}, seed=3)
    vecs = sf.sample_vectors(4, 6, seed=11)
    worst = 0.0
    for x, y in zip(vecs[:3], vecs[3:6]):
        rep = sf.duality_check(A, x, y, tol=1e-4)
        worst = max(worst, rep.residuals["relative_difference"])
    record(13, worst <= 1e-4, f"<x,y>_A vs <O x, O_* y> on random_accretive(4): max rel diff {worst:.2e} (tol 1e-4)")
