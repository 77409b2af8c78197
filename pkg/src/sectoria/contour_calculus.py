"""Cauchy-integral functional calculus on sector boundaries.

``psi(A) = (1/2 pi i) * integral over the contour of (zI - A)^{-1} psi(z) dz``
is approximated by composite Gauss-Legendre quadrature in log-radius on the
two rays ``arg z = +-theta'``. Symbols without decay go through the
regularised ("extended") calculus ``f(A) = phi(A)^{-m} (f phi^m)(A)`` with
``phi(z) = z / (1+z)^2``.

Resolvent stacks are cached on the operator per contour, so several symbols
on the same contour cost one batch of solves.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidInputError, QuadratureError, ResolventSingularError
from .grids import DEFAULT_QUAD, Contour, QuadConfig, RadialGrid
from .operator_core import Sector, SectorialOperator, _as_theta
from .report import Report
from .symbols import (
    PHI,
    ScalarSymbol,
    gamma_kernel,
    get_symbol,
    log_branch,
    log_pow,
    principal_log,
    principal_power,
    z_ipow,
    z_pow,
)

_CACHE_BYTES = 256 * 2**20
_CHUNK = 128


# ---------------------------------------------------------------------------
# contours


def default_contour_angle(A: SectorialOperator, sup_angle: float = math.pi) -> float:
    """Midpoint between the operator's type angle and the symbol's validity angle."""
    lo = max(A.omega_est, A.max_arg)
    if lo >= sup_angle:
        raise InvalidInputError(
            f"symbol is only holomorphic on |arg z| < {sup_angle:.4f}, below the type angle {lo:.4f}"
        )
    return 0.5 * (lo + sup_angle)


def contour_features(A: SectorialOperator, theta: float, extra: Iterable[tuple[float, float]] = ()) -> list:
    """Log-radius features for a contour at angle ``theta``.

    Eigenvalues sit at angular distance ``theta - |arg lambda|`` from the
    nearer ray; the pole of ``(1+z)^{-1}`` at ``-1`` sits at ``pi - theta``.
    """
    feats = [
        (math.log(abs(l)), theta - abs(math.atan2(l.imag, l.real))) for l in A.eigenvalues
    ]
    if theta > 0.5 * math.pi:
        feats.append((0.0, math.pi - theta))
    feats.extend(extra)
    return feats


def build_contour(
    A: SectorialOperator,
    theta: float,
    growth: tuple[float, float] = (0.5, -0.5),
    log_growth: bool = False,
    span: tuple[float, float] | None = None,
    features: Iterable[tuple[float, float]] = (),
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Contour:
    """Graded contour whose tails are cut where the integrand drops below ``cfg.tail_tol``.

    ``growth = (a0, ainf)`` describes the symbol; the resolvent contributes one
    power of ``r`` at zero (through ``dz``) and cancels one at infinity, so the
    tail rates are ``1 + a0`` and ``-ainf``. ``span`` widens the core range
    (used for dilated symbols ``psi(t z)``).
    """
    a0, ainf = growth
    rate0, rate_inf = 1.0 + a0, -ainf
    if rate0 <= 0 or rate_inf <= 0:
        raise InvalidInputError(
            f"integrand does not decay on the contour (growth {a0:g} at 0, {ainf:g} at infinity)"
        )
    lo, hi = A.radii
    ulo, uhi = math.log(lo), math.log(hi)
    if span is not None:
        ulo, uhi = min(ulo, span[0]), max(uhi, span[1])
    L = cfg.log_tail + (4.0 if log_growth else 0.0)
    u_min = cfg.u_min if cfg.u_min is not None else ulo - L / rate0
    u_max = cfg.u_max if cfg.u_max is not None else uhi + L / rate_inf
    if cfg.n0 is not None:
        grid = RadialGrid.uniform(u_min, u_max, max(1, cfg.n0 // cfg.order), cfg.order)
    else:
        feats = contour_features(A, theta, features)
        grid = RadialGrid.graded(u_min, u_max, feats, cfg.max_panel, cfg.order)
    return Contour(theta, grid)


# ---------------------------------------------------------------------------
# resolvent stacks and contraction


def _resolvent_cache(A: SectorialOperator) -> OrderedDict:
    return A._cache.setdefault("resolvent_stacks", OrderedDict())


def contour_resolvents(A: SectorialOperator, contour: Contour) -> tuple[np.ndarray, np.ndarray]:
    """``(z_j I - A)^{-1}`` on every contour node plus their Frobenius norms (cached, LRU)."""
    cache = _resolvent_cache(A)
    key = contour.key()
    if key in cache:
        cache.move_to_end(key)
        return cache[key]
    n = A.dim
    z = contour.points
    M = z[:, None, None] * A.identity[None] - A.matrix[None]
    smin = np.linalg.svd(M, compute_uv=False)[:, -1] if n <= 64 else None
    if smin is not None and np.any(smin <= 1e-13 * np.maximum(1.0, np.abs(z))):
        raise ResolventSingularError("contour passes through the spectrum")
    R = np.linalg.solve(M, np.broadcast_to(A.identity, M.shape))
    norms = np.linalg.norm(R, axis=(1, 2))
    for arr in (R, norms):
        arr.setflags(write=False)
    cache[key] = (R, norms)
    total = sum(v[0].nbytes for v in cache.values())
    while len(cache) > 1 and total > _CACHE_BYTES:
        _, old = cache.popitem(last=False)
        total -= old[0].nbytes
    return R, norms


def contract(A: SectorialOperator, values: np.ndarray, contour: Contour) -> tuple[np.ndarray, np.ndarray]:
    """Apply the quadrature to symbol samples.

    ``values`` has shape ``(K, N)`` (K symbols sampled on the N contour
    nodes). Returns the ``(K, n, n)`` matrices and a per-symbol mass
    ``sum |f| |dz| ||R||`` used as an absolute scale for convergence tests.
    """
    R, norms = contour_resolvents(A, contour)
    n = A.dim
    w = values * contour.dz[None, :] / (2j * math.pi)
    flat = R.reshape(R.shape[0], n * n)
    out = np.empty((values.shape[0], n, n), dtype=complex)
    for start in range(0, values.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = (w[sl] @ flat).reshape(-1, n, n)
    mass = np.abs(values) @ (contour.abs_dz * norms) / (2 * math.pi)
    return out, mass


def adaptive_contract(
    A: SectorialOperator,
    evaluate: Callable[[np.ndarray], np.ndarray],
    contour: Contour,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> tuple[np.ndarray, Contour, float]:
    """Contract ``evaluate(points)`` (shape ``(K, N)``), doubling the grid until converged.

    Convergence: max over symbols of ``||V_new - V_old||_F / max(||V_new||_F, 1e-3 * mass)``
    below ``cfg.tol``. Raises :class:`QuadratureError` carrying the last two
    iterates after ``cfg.max_doublings`` doublings.
    """
    old, _ = contract(A, np.atleast_2d(evaluate(contour.points)), contour)
    change = math.inf
    for _ in range(max(1, cfg.max_doublings)):
        contour = contour.refined()
        new, mass = contract(A, np.atleast_2d(evaluate(contour.points)), contour)
        diff = np.linalg.norm(new - old, axis=(1, 2))
        scale = np.maximum(np.linalg.norm(new, axis=(1, 2)), 1e-3 * mass)
        scale = np.where(scale > 0, scale, 1.0)
        change = float(np.max(diff / scale))
        if change < cfg.tol:
            return new, contour, change
        old = new
    raise QuadratureError(
        f"contour quadrature did not converge (relative change {change:.3e})",
        iterates=(old, new),
        change=change,
    )


def adaptive_quadrature(
    compute: Callable[[Contour], tuple[np.ndarray, float]],
    contour: Contour,
    cfg: QuadConfig = DEFAULT_QUAD,
    tol: float | None = None,
) -> tuple[np.ndarray, Contour, float]:
    """Generic doubling loop for ``compute(contour) -> (value, mass)``.

    Stops when ``||new - old|| <= tol * max(||new||, 1e-3 * mass)``.
    """
    tol = cfg.tol if tol is None else tol
    old, _ = compute(contour)
    new, change = old, math.inf
    for _ in range(max(1, cfg.max_doublings)):
        contour = contour.refined()
        new, mass = compute(contour)
        scale = max(float(np.linalg.norm(new)), 1e-3 * float(mass))
        change = float(np.linalg.norm(new - old)) / scale if scale > 0 else 0.0
        if change <= tol:
            return new, contour, change
        old = new
    raise QuadratureError(
        f"boundary quadrature did not converge (relative change {change:.3e})",
        iterates=(old, new),
        change=change,
    )


# ---------------------------------------------------------------------------
# the calculus


def _resolve_contour(A, sym: ScalarSymbol, contour, theta, growth, cfg) -> Contour:
    if contour is not None:
        th = contour.theta
    else:
        th = default_contour_angle(A, sym.sup_angle) if theta is None else float(theta)
    if not (max(A.omega_est, A.max_arg) < th < sym.sup_angle):
        raise InvalidInputError(
            f"contour angle {th:.4f} must lie between the type angle {A.omega_est:.4f} "
            f"and the symbol's validity angle {sym.sup_angle:.4f}"
        )
    if contour is not None:
        return contour
    return build_contour(A, th, growth, sym.log_growth, cfg=cfg)


def dunford_riesz(
    A: SectorialOperator,
    psi: ScalarSymbol | str,
    contour: Contour | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    theta: float | None = None,
) -> np.ndarray:
    """``psi(A)`` for a decaying symbol by the Cauchy integral over the sector boundary."""
    psi = get_symbol(psi)
    a0, ainf = psi.growth
    if not (a0 > 0 and ainf < 0):
        raise InvalidInputError(
            f"symbol {psi.name!r} does not decay at 0 and infinity; use extended_calculus"
        )
    c = _resolve_contour(A, psi, contour, theta, psi.growth, cfg)
    vals, _, _ = adaptive_contract(A, lambda z: psi(z)[None, :], c, cfg)
    return vals[0]


def regularizer_order(sym: ScalarSymbol) -> int:
    """Smallest ``m >= 1`` making ``f * phi^m`` decay at both ends."""
    a0, ainf = sym.growth
    need = max(ainf, -a0)
    return max(1, int(math.ceil(need + 0.5))) if need >= 0.5 else 1


def phi_operator(A: SectorialOperator) -> np.ndarray:
    """``phi(A) = A (I + A)^{-2}`` computed algebraically."""
    if "phi" not in A._cache:
        B = A.identity + A.matrix
        A._cache["phi"] = np.linalg.solve(B, np.linalg.solve(B, A.matrix))
    return A._cache["phi"]


def _apply_phi_inverse(A: SectorialOperator, Y: np.ndarray, m: int) -> np.ndarray:
    B = A.identity + A.matrix
    for _ in range(m):
        try:
            Y = B @ (B @ np.linalg.solve(A.matrix, Y))
        except np.linalg.LinAlgError as exc:
            raise ResolventSingularError("phi(A) is not invertible") from exc
    return Y


def extended_many(
    A: SectorialOperator,
    evaluators: Sequence[Callable],
    growth: tuple[float, float] = (0.0, 0.0),
    log_growth: bool = False,
    sup_angle: float = math.pi,
    theta: float | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> np.ndarray:
    """``f_k(A)`` for several symbols sharing one contour and one regulariser; shape ``(K, n, n)``."""
    probe = ScalarSymbol("probe", evaluators[0], growth=growth, log_growth=log_growth, sup_angle=sup_angle)
    m = regularizer_order(probe)
    reg_growth = (growth[0] + m, growth[1] - m)
    c = _resolve_contour(A, probe, None, theta, reg_growth, cfg)

    def evaluate(z):
        ph = PHI(z) ** m
        return np.stack([f(z) * ph for f in evaluators])

    vals, _, _ = adaptive_contract(A, evaluate, c, cfg)
    return np.stack([_apply_phi_inverse(A, v, m) for v in vals])


def extended_calculus(
    A: SectorialOperator,
    f: ScalarSymbol | str,
    cfg: QuadConfig = DEFAULT_QUAD,
    theta: float | None = None,
) -> np.ndarray:
    """``f(A) = phi(A)^{-m} (f phi^m)(A)``; ``m = 1`` unless ``f`` grows like ``|z|^a``, ``a >= 1/2``."""
    f = get_symbol(f)
    return extended_many(A, [f], f.growth, f.log_growth, f.sup_angle, theta, cfg)[0]


def operator_function(A: SectorialOperator, f: ScalarSymbol | str, cfg: QuadConfig = DEFAULT_QUAD, theta=None) -> np.ndarray:
    """Dispatch to the plain or regularised calculus depending on decay."""
    f = get_symbol(f)
    a0, ainf = f.growth
    if a0 > 0 and ainf < 0:
        return dunford_riesz(A, f, cfg=cfg, theta=theta)
    return extended_calculus(A, f, cfg=cfg, theta=theta)


def fractional_power(A: SectorialOperator, alpha: float, cfg: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """Principal ``A^alpha`` (cached on the operator)."""
    alpha = float(alpha)
    if alpha * A.omega_est >= math.pi:
        raise InvalidInputError(f"alpha*omega = {alpha * A.omega_est:.4f} must stay below pi")
    key = ("power", alpha)
    if key not in A._cache:
        if alpha == 0.0:
            val = A.identity.copy()
        elif alpha == 1.0:
            val = A.matrix.copy()
        else:
            val = extended_calculus(A, z_pow(alpha), cfg)
        val.setflags(write=False)
        A._cache[key] = val
    return A._cache[key]


def logarithm_branch(A: SectorialOperator, k: int = 0, cfg: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """``Lambda_k(A) = Log(A) + 2 k pi i I``; the principal part is cached."""
    if "log0" not in A._cache:
        val = extended_calculus(A, get_symbol("log"), cfg)
        val.setflags(write=False)
        A._cache["log0"] = val
    return A._cache["log0"] + (2j * math.pi * int(k)) * A.identity


def spectral_function(A: SectorialOperator, f: ScalarSymbol | Callable, cond_limit: float = 1e10) -> np.ndarray:
    """Eigendecomposition oracle ``V f(Lambda) V^{-1}``; diagonalizable operators only."""
    w, V = np.linalg.eig(A.matrix)
    if np.linalg.cond(V) > cond_limit:
        raise InvalidInputError("operator is not diagonalizable to working precision")
    fw = np.asarray(f(w), dtype=complex)
    return (V * fw) @ np.linalg.inv(V)


def negative_log_power(
    A: SectorialOperator,
    k: int,
    r: float,
    x,
    method: str = "contour",
    cfg: QuadConfig = DEFAULT_QUAD,
) -> np.ndarray:
    """``Lambda_k(A)^{-r} x`` for ``k != 0`` and ``r > 1/2``.

    ``method="contour"`` runs the regularised calculus on ``Lambda_k^{-r}``;
    ``method="spectral"`` applies the scalar function on the eigenbasis.
    """
    k = int(k)
    if k == 0:
        raise InvalidInputError("k = 0 is excluded: Lambda_0(A) need not be invertible")
    if not r > 0.5:
        raise InvalidInputError("r must exceed 1/2")
    x = np.asarray(x, dtype=complex)
    sym = log_pow(k, r)
    if method == "contour":
        key = ("log_pow", k, float(r))
        if key not in A._cache:
            A._cache[key] = extended_calculus(A, sym, cfg)
        return A._cache[key] @ x
    if method == "spectral":
        return spectral_function(A, sym) @ x
    raise InvalidInputError(f"unknown method {method!r}")


def imaginary_power(A: SectorialOperator, s: float, cfg: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """``A^{is}``."""
    return extended_calculus(A, z_ipow(s), cfg)


def group_growth_scan(
    A: SectorialOperator,
    mu: float,
    s_range: tuple[float, float] = (-5.0, 5.0),
    n_s: int = 21,
    tol: float = 1e-6,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """Sup of ``||A^{is}|| e^{-mu|s|}`` over a symmetric grid and the group-law residual.

    The group law is tested on all pairs ``(s, t)`` of grid points whose sum is
    again a grid point.
    """
    if mu <= A.omega_est:
        raise InvalidInputError(f"mu = {mu} must exceed the type angle {A.omega_est:.4f}")
    s_lo, s_hi = map(float, s_range)
    if not s_lo < s_hi or n_s < 2:
        raise InvalidInputError("need s_min < s_max and at least two samples")
    svals = np.linspace(s_lo, s_hi, n_s)
    step = svals[1] - svals[0]
    evals = [(lambda z, s=s: principal_power(z, 1j * s)) for s in svals]
    powers = extended_many(A, evals, cfg=cfg)
    norms = np.linalg.norm(powers, ord=2, axis=(1, 2))
    weighted = norms * np.exp(-mu * np.abs(svals))
    resid = 0.0
    for i in range(n_s):
        for j in range(n_s):
            q = (svals[i] + svals[j] - s_lo) / step
            kk = int(round(q))
            if abs(q - kk) < 1e-9 and 0 <= kk < n_s:
                d = powers[i] @ powers[j] - powers[kk]
                resid = max(resid, float(np.linalg.norm(d, 2)))
    return Report(
        check="group_growth",
        passed=bool(np.all(np.isfinite(norms)) and resid <= tol),
        residuals={"group_law": resid},
        constants={
            "sup_weighted": float(weighted.max()),
            "sup_norm": float(norms.max()),
            "norms": norms.tolist(),
        },
        params={"mu": mu, "s_range": [s_lo, s_hi], "n_s": n_s, "tol": tol},
        grid={"s_values": svals.tolist()},
        operator_spec=A.spec(),
    )


# ---------------------------------------------------------------------------
# scalar checks


def _psi_weight(f: Callable, s: float, w: np.ndarray) -> np.ndarray:
    aw = np.abs(w)
    return (1 + aw ** (2 * s)) / aw**s * np.abs(f(w))


def _ray_scan(fun: Callable[[np.ndarray], np.ndarray], u: np.ndarray, direction: complex) -> float:
    vals = fun(np.exp(u) * direction)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    j = int(np.argmax(vals))
    best = float(vals[j])
    if 0 < j < u.size - 1 and np.isfinite(best):
        res = minimize_scalar(
            lambda t: -float(fun(np.array([math.exp(t) * direction]))[0]),
            bounds=(u[j - 1], u[j + 1]),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if np.isfinite(res.fun):
            best = max(best, -float(res.fun))
    return best


def psi_class_norm(f: ScalarSymbol | Callable, s: float, theta, grid: RadialGrid | np.ndarray | None = None) -> float:
    """``sup (1 + |w|^{2s}) / |w|^s * |f(w)|`` over ``arg w in {theta, -theta, 0}``.

    ``grid`` supplies the log-radii (a :class:`RadialGrid` or an array of ``u``);
    the default is 4001 points on ``[-30, 30]``. Returns ``inf`` when the sup
    keeps growing as the range is doubled.
    """
    if not s > 0:
        raise InvalidInputError("s must be positive")
    th = _as_theta(theta)
    if isinstance(grid, RadialGrid):
        u = np.asarray(grid.u)
    elif grid is None:
        u = np.linspace(-30.0, 30.0, 4001)
    else:
        u = np.asarray(grid, dtype=float)

    def sup_over(uu):
        out = 0.0
        for d in (np.exp(1j * th), np.exp(-1j * th), 1.0 + 0j):
            with np.errstate(all="ignore"):
                out = max(out, _ray_scan(lambda w: _psi_weight(f, s, w), uu, d))
        return out

    base = sup_over(u)
    mid = 0.5 * (u[0] + u[-1])
    wide = sup_over(np.linspace(2 * u[0] - mid, 2 * u[-1] - mid, 2 * u.size - 1))
    if not np.isfinite(wide) or wide > base * (1 + 1e-6) + 1e-300:
        return math.inf
    return base


def eta_function(alpha: float, z: complex) -> Callable:
    """``eta_z(w) = gamma_{alpha,z}(w) - gamma_{1,z}(w) + (1 - alpha)(w - 1)/(w + 1)``."""
    ga = gamma_kernel(alpha, z)
    g1 = gamma_kernel(1.0, z)

    def eta(w):
        w = np.asarray(w, dtype=complex)
        return ga(w) - g1(w) + (1 - alpha) * (w - 1) / (w + 1)

    return eta


def residue_check(alpha: float, z: complex, h: float = 1e-5) -> float:
    """Relative error of ``(w - z) gamma_{alpha,z}(w) -> 2z`` using a symmetric difference."""
    z = complex(z)
    g = gamma_kernel(alpha, z)
    d = h * abs(z)
    vals = [d * e * g(np.array([z + d * e]))[0] for e in (1, -1, 1j, -1j)]
    return abs(np.mean(vals) - 2 * z) / abs(2 * z)


def eta_extension_check(
    alpha: float,
    mu: float,
    z_samples: Sequence[complex],
    w_grid: np.ndarray | None = None,
    pole_tol: float = 1e-8,
    stable_tol: float = 1e-2,
    residue_tol: float = 1e-6,
) -> Report:
    """Empirical constant in ``||eta_z||_{Psi_beta} <= C (|z|^alpha + |z|^{-alpha})``.

    Norms are sampled on the rays ``arg w = +-mu`` and the positive axis;
    nodes with ``|w^alpha - z^alpha| < pole_tol * max(|w|^alpha, |z|^alpha)``
    (or the same test for ``alpha = 1``) are dropped and counted. The sample
    grid is then doubled and the constant must be stable to ``stable_tol``.
    """
    alpha, mu = float(alpha), float(mu)
    if not (alpha > 0 and 0 < mu < math.pi and alpha * mu < math.pi):
        raise InvalidInputError("need alpha > 0, 0 < mu < pi and alpha*mu < pi")
    zs = np.asarray(z_samples, dtype=complex).ravel()
    if zs.size == 0 or np.any(zs == 0) or np.any(np.abs(np.angle(zs)) >= mu):
        raise InvalidInputError("z samples must lie in the open sector of angle mu")
    beta = min(0.5, alpha)
    u = np.linspace(-25.0, 25.0, 2001) if w_grid is None else np.asarray(w_grid, dtype=float)
    dirs = (np.exp(1j * mu), np.exp(-1j * mu), 1.0 + 0j)

    def norm_for(z, uu):
        eta = eta_function(alpha, z)
        za = abs(z) ** alpha
        best, skipped = 0.0, 0
        for d in dirs:
            w = np.exp(uu) * d
            wa = principal_power(w, alpha)
            zpa = principal_power(z, alpha)
            bad = np.abs(wa - zpa) < pole_tol * np.maximum(np.abs(wa), za)
            bad |= np.abs(w - z) < pole_tol * np.maximum(np.abs(w), abs(z))
            skipped += int(bad.sum())
            ww = w[~bad]
            if ww.size:
                with np.errstate(all="ignore"):
                    vals = _psi_weight(eta, beta, ww)
                vals = vals[np.isfinite(vals)]
                if vals.size:
                    best = max(best, float(vals.max()))
        return best, skipped

    def run(uu):
        norms, ratios, skipped = [], [], 0
        for z in zs:
            nz, sk = norm_for(z, uu)
            skipped += sk
            norms.append(nz)
            ratios.append(nz / (abs(z) ** alpha + abs(z) ** -alpha))
        return np.array(norms), np.array(ratios), skipped

    norms, ratios, skipped = run(u)
    fine = np.linspace(u[0], u[-1], 2 * u.size - 1)
    norms2, ratios2, skipped2 = run(fine)
    c1, c2 = float(ratios.max()), float(ratios2.max())
    change = abs(c2 - c1) / c2 if c2 > 0 else abs(c2 - c1)
    residue = max(residue_check(alpha, z) for z in zs)
    passed = bool(np.isfinite(c2) and change <= stable_tol and residue <= residue_tol)
    return Report(
        check="eta_extension",
        passed=passed,
        residuals={"grid_change": change, "residue": residue},
        constants={"C_empirical": c2, "C_coarse": c1, "norms": norms2.tolist(), "beta": beta},
        params={"alpha": alpha, "mu": mu, "z_samples": [complex(z) for z in zs], "pole_tol": pole_tol},
        grid={"u_min": float(u[0]), "u_max": float(u[-1]), "n_points": int(fine.size)},
        notes=[f"skipped {skipped2} near-pole nodes"] if skipped2 else [],
    )
