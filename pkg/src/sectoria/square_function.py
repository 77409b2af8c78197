"""Square-function norms through Gram matrices.

For a decaying symbol ``psi`` the quadratic norm
``||x||_A^2 = int_0^inf ||psi(tA) x||^2 dt/t`` is the quadratic form of
``G = int psi(tA)^* psi(tA) dt/t``. ``G`` is assembled once: every
``psi(tA)`` comes from the contour calculus on a shared contour, and the
``t`` integral is a Gauss-Legendre rule in ``log t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .contour_calculus import (
    build_contour,
    contract,
    default_contour_angle,
    extended_calculus,
    fractional_power,
)
from .errors import DegenerateGramError, InvalidInputError, QuadratureError
from .grids import DEFAULT_QUAD, Contour, QuadConfig, RadialGrid
from .operator_core import SectorialOperator
from .report import Report
from .symbols import SQRT_OVER_1P, ScalarSymbol, get_symbol, log_pow

GRAM_TOL = 1e-9
N_SAMPLES = 64


@dataclass(frozen=True, eq=False)
class GramOperator:
    """Hermitian PSD matrix of the square-function form.

    ``coarse`` is the same quantity on the half-resolution grids, kept so
    that derived constants can be checked for refinement stability.
    """

    matrix: np.ndarray
    psi_name: str
    t_grid: RadialGrid
    coarse: np.ndarray | None = None
    contour: Contour | None = None

    @property
    def refine_change(self) -> float:
        if self.coarse is None:
            return math.nan
        return float(np.linalg.norm(self.matrix - self.coarse) / np.linalg.norm(self.matrix))

    def describe(self) -> dict:
        out = {"t_grid": self.t_grid.describe(), "refine_change": self.refine_change}
        if self.contour is not None:
            out["contour"] = self.contour.describe()
        return out


@dataclass(frozen=True)
class GapReport:
    """Best constants in ``m ||x|| <= ||x||_A <= M ||x||``."""

    m: float
    M: float

    @property
    def kappa(self) -> float:
        return self.M / self.m

    def as_dict(self) -> dict:
        return {"m": self.m, "M": self.M, "kappa": self.kappa}


def _decay_rates(psi: ScalarSymbol) -> tuple[float, float]:
    a0, ainf = psi.growth
    if not (a0 > 0 and ainf < 0):
        raise InvalidInputError(f"symbol {psi.name!r} is not a decaying (Psi-class) symbol")
    return a0, -ainf


def default_t_grid(A: SectorialOperator, psi: ScalarSymbol, cfg: QuadConfig = DEFAULT_QUAD) -> RadialGrid:
    """Log-t grid; ``|psi(t lambda)|^2`` falls below ``tail_tol`` at both ends."""
    a0, b = _decay_rates(psi)
    lo, hi = A.radii
    L = cfg.log_tail
    feats = [(-math.log(abs(l)), math.pi - abs(np.angle(l))) for l in A.eigenvalues]
    return RadialGrid.graded(
        -math.log(hi) - L / (2 * a0), -math.log(lo) + L / (2 * b), feats, max_panel=2.0, order=cfg.order
    )


def dilated_stack(
    A: SectorialOperator,
    psi: ScalarSymbol,
    ts: np.ndarray,
    contour: Contour,
    chunk: int = 128,
):
    """Yield ``(slice, psi(t_k A))`` blocks for the dilations ``t_k``."""
    for start in range(0, ts.size, chunk):
        tt = ts[start : start + chunk]
        vals = psi(tt[:, None] * contour.points[None, :])
        mats, _ = contract(A, vals, contour)
        yield slice(start, start + tt.size), mats


def _dilation_contour(A, psi, t_grid, cfg, theta=None) -> Contour:
    th = default_contour_angle(A, psi.sup_angle) if theta is None else theta
    span = (-t_grid.u_max, -t_grid.u_min)
    feats = []
    if th > 0.5 * math.pi:
        step = 0.5 * (math.pi - th)
        feats = [(u, math.pi - th) for u in np.arange(span[0], span[1] + step, step)]
    return build_contour(A, th, psi.growth, psi.log_growth, span=span, features=feats, cfg=cfg)


def _accumulate(A, psi, t_grid, contour, B=None) -> np.ndarray:
    """``sum_k w_k X_B(t_k)^* X_A(t_k)`` with ``X_A = psi(t A)``; ``B`` defaults to ``A``."""
    ts, w = t_grid.nodes, t_grid.weights
    n = A.dim
    G = np.zeros((n, n), dtype=complex)
    if B is None:
        for sl, X in dilated_stack(A, psi, ts, contour):
            G += np.einsum("k,kji,kjl->il", w[sl], X.conj(), X)
        return G
    contour_b = Contour(contour.theta, contour.grid)
    for (sl, X), (_, Y) in zip(dilated_stack(A, psi, ts, contour), dilated_stack(B, psi, ts, contour_b)):
        G += np.einsum("k,kji,kjl->il", w[sl], Y.conj(), X)
    return G


def gram_operator(
    A: SectorialOperator,
    psi: ScalarSymbol | str = SQRT_OVER_1P,
    t_grid: RadialGrid | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    check: bool = True,
) -> GramOperator:
    """``G = int psi(tA)^* psi(tA) dt/t`` (Hermitian part).

    With ``check`` the computation is repeated with both the t-grid and the
    contour refined; the refined value is returned and a relative change above
    ``100 * cfg.tol`` raises :class:`QuadratureError`.
    """
    psi = get_symbol(psi)
    key = ("gram", psi.name, None if t_grid is None else t_grid.breakpoints.tobytes(), cfg, check)
    if key in A._cache:
        return A._cache[key]
    tg = default_t_grid(A, psi, cfg) if t_grid is None else t_grid
    contour = _dilation_contour(A, psi, tg, cfg)
    G = _accumulate(A, psi, tg, contour)
    G = 0.5 * (G + G.conj().T)
    coarse = None
    if check:
        coarse = G
        tg, contour = tg.refined(), contour.refined()
        G = _accumulate(A, psi, tg, contour)
        G = 0.5 * (G + G.conj().T)
        change = np.linalg.norm(G - coarse) / np.linalg.norm(G)
        if change > 100 * cfg.tol:
            raise QuadratureError(
                f"Gram matrix changed by {change:.2e} under refinement", iterates=(coarse, G), change=change
            )
    out = GramOperator(G, psi.name, tg, coarse, contour)
    A._cache[key] = out
    return out


def mixed_gram(
    A: SectorialOperator, psi: ScalarSymbol | str = SQRT_OVER_1P, cfg: QuadConfig = DEFAULT_QUAD
) -> np.ndarray:
    """``int psi(tA^*)^* psi(tA) dt/t``: the form of the pairing between ``H_A`` and ``H_{A^*}``."""
    psi = get_symbol(psi)
    tg = default_t_grid(A, psi, cfg)
    contour = _dilation_contour(A, psi, tg, cfg)
    return _accumulate(A, psi, tg, contour, B=A.adjoint())


def _gram_matrix(G) -> np.ndarray:
    return G.matrix if isinstance(G, GramOperator) else np.asarray(G, dtype=complex)


def square_norm(G: GramOperator | np.ndarray, x) -> float:
    """``sqrt(x^* G x)``, clamped at zero."""
    x = np.asarray(x, dtype=complex)
    q = float(np.real(np.vdot(x, _gram_matrix(G) @ x)))
    return math.sqrt(max(q, 0.0))


def equivalence_constants(G: GramOperator | np.ndarray) -> GapReport:
    """``m = sqrt(lambda_min(G))``, ``M = sqrt(lambda_max(G))``."""
    ev = np.linalg.eigvalsh(_gram_matrix(G))
    if ev[0] <= GRAM_TOL * max(ev[-1], 0.0) or ev[-1] <= 0:
        raise DegenerateGramError(f"Gram matrix is not positive definite (eigenvalues {ev[0]:.3e}..{ev[-1]:.3e})")
    return GapReport(math.sqrt(ev[0]), math.sqrt(ev[-1]))


def _pencil_extremes(G1: np.ndarray, G2: np.ndarray) -> tuple[float, float]:
    ev = scipy.linalg.eigh(G1, G2, eigvals_only=True)
    return float(ev[0]), float(ev[-1])


def psi_independence_check(
    A: SectorialOperator,
    psi1: ScalarSymbol | str = SQRT_OVER_1P,
    psi2: ScalarSymbol | str = "z_over_1pz2",
    cfg: QuadConfig = DEFAULT_QUAD,
    stable_tol: float = 1e-2,
) -> Report:
    """Equivalence of the square norms built from two symbols.

    The extreme eigenvalues ``mu`` of the pencil ``G1 x = mu G2 x`` give
    ``sqrt(mu_min) ||x||_2 <= ||x||_1 <= sqrt(mu_max) ||x||_2``; ``kappa``
    is their ratio.
    """
    g1, g2 = gram_operator(A, psi1, cfg=cfg), gram_operator(A, psi2, cfg=cfg)
    lo, hi = _pencil_extremes(g1.matrix, g2.matrix)
    clo, chi = _pencil_extremes(g1.coarse, g2.coarse)
    kappa = math.sqrt(hi / lo)
    kappa_c = math.sqrt(chi / clo)
    change = abs(kappa - kappa_c) / kappa
    return Report(
        check="psi_independence",
        passed=bool(np.isfinite(kappa) and change <= stable_tol),
        residuals={"refine_change": change},
        constants={"kappa": kappa, "mu_min": lo, "mu_max": hi, "kappa_coarse": kappa_c},
        params={"psi1": g1.psi_name, "psi2": g2.psi_name},
        grid={"gram1": g1.describe(), "gram2": g2.describe()},
        operator_spec=A.spec(),
    )


def resolvent_trace_norm(
    A: SectorialOperator,
    x,
    y=None,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> complex:
    """``int_0^inf <sqrt(A)(-r-A)^{-1} x, sqrt(A^*)(-r-A^*)^{-1} y> dr`` (``y=None``: squared norm).

    This is the boundary ``L^2`` pairing on the negative axis of the resolvent
    traces of ``x`` (for ``A``) and ``y`` (for ``A^*``). Adaptive in ``log r``.
    """
    x = np.asarray(x, dtype=complex)
    sq = fractional_power(A, 0.5, cfg)
    if y is None:
        sq_b, y_, B = sq, x, A
    else:
        B = A.adjoint()
        sq_b, y_ = fractional_power(B, 0.5, cfg), np.asarray(y, dtype=complex)
    lo, hi = A.radii
    L = cfg.log_tail
    feats = [(math.log(abs(l)), math.pi - abs(np.angle(l))) for l in A.eigenvalues]
    grid = RadialGrid.graded(math.log(lo) - L, math.log(hi) + L, feats, cfg.max_panel, cfg.order)
    I = A.identity

    def integrate(g: RadialGrid) -> complex:
        r = g.nodes
        M1 = r[:, None, None] * I[None] + A.matrix[None]
        u = np.linalg.solve(M1, np.broadcast_to(x, (r.size, A.dim))[..., None])[..., 0] @ sq.T
        if y is None:
            v = u
        else:
            M2 = r[:, None, None] * I[None] + B.matrix[None]
            v = np.linalg.solve(M2, np.broadcast_to(y_, (r.size, A.dim))[..., None])[..., 0] @ sq_b.T
        return complex(np.sum(g.weights * r * np.sum(v.conj() * u, axis=1)))

    old = integrate(grid)
    for _ in range(max(1, cfg.max_doublings)):
        grid = grid.refined()
        new = integrate(grid)
        scale = max(abs(new), np.linalg.norm(x) * np.linalg.norm(y_) * 1e-6)
        if abs(new - old) <= 10 * cfg.tol * scale:
            return new
        old = new
    raise QuadratureError("resolvent-trace integral did not converge", iterates=(old, new))


def _rel(a: complex, b: complex, floor: float) -> float:
    denom = max(abs(a), abs(b))
    if denom <= floor:
        denom = floor
    return abs(a - b) / denom if denom > 0 else 0.0


def mcintosh_identity_check(A: SectorialOperator, x, tol: float = 1e-4, cfg: QuadConfig = DEFAULT_QUAD) -> Report:
    """Square norm with ``psi = sqrt(z)/(1+z)`` against the ``L^2`` norm of the resolvent trace on the negative axis."""
    x = np.asarray(x, dtype=complex)
    G = gram_operator(A, SQRT_OVER_1P, cfg=cfg)
    lhs = square_norm(G, x) ** 2
    rhs = float(np.real(resolvent_trace_norm(A, x, cfg=cfg)))
    diff = _rel(lhs, rhs, 1e-300)
    return Report(
        check="mcintosh_identity",
        passed=bool(diff <= tol),
        residuals={"relative_difference": diff},
        constants={"square_norm_sq": lhs, "resolvent_trace_sq": rhs},
        params={"x": x, "tol": tol},
        grid=G.describe(),
        operator_spec=A.spec(),
    )


def duality_check(A: SectorialOperator, x, y, tol: float = 1e-4, cfg: QuadConfig = DEFAULT_QUAD) -> Report:
    """Pairing of ``H_A`` with ``H_{A^*}`` against the pairing of resolvent traces.

    The left side is ``y^* G_mix x`` with
    ``G_mix = int psi(tA^*)^* psi(tA) dt/t``; the right side integrates
    ``<sqrt(A)(-r-A)^{-1}x, sqrt(A^*)(-r-A^*)^{-1}y>`` over ``r > 0``.
    The ``H_A`` inner product ``y^* G x`` is reported alongside for reference.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    Gm = mixed_gram(A, SQRT_OVER_1P, cfg)
    lhs = complex(np.vdot(y, Gm @ x))
    rhs = resolvent_trace_norm(A, x, y, cfg)
    floor = 1e-8 * np.linalg.norm(x) * np.linalg.norm(y)
    diff = _rel(lhs, rhs, floor)
    G = gram_operator(A, SQRT_OVER_1P, cfg=cfg)
    return Report(
        check="duality",
        passed=bool(diff <= tol),
        residuals={"relative_difference": diff},
        constants={
            "pairing": lhs,
            "resolvent_pairing": rhs,
            "hilbert_inner": complex(np.vdot(y, x)),
            "square_inner": complex(np.vdot(y, G.matrix @ x)),
        },
        params={"x": x, "y": y, "tol": tol},
        grid=G.describe(),
        operator_spec=A.spec(),
    )


def sample_vectors(dim: int, count: int = N_SAMPLES, seed: int = 0) -> np.ndarray:
    """Seeded unit vectors (complex Gaussian directions) followed by the canonical basis; rows."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.vstack([v, np.eye(dim, dtype=complex)])


def _log_gap_constants(Gm: np.ndarray, L: np.ndarray, X: np.ndarray) -> dict:
    LGL = L.conj().T @ Gm @ L
    LGL = 0.5 * (LGL + LGL.conj().T)
    c1 = math.sqrt(max(np.linalg.eigvalsh(LGL)[-1], 0.0))
    LL = L.conj().T @ L
    c_lower = math.sqrt(scipy.linalg.eigh(0.5 * (LL + LL.conj().T), Gm, eigvals_only=True)[-1])
    Lx = X @ L.T
    sq = lambda V: np.sqrt(np.maximum(np.real(np.einsum("ki,ij,kj->k", V.conj(), Gm, V)), 0.0))
    xn = np.linalg.norm(X, axis=1)
    emp1 = float(np.max(sq(Lx) / xn))
    Linv_x = np.linalg.solve(L, X.T).T
    emp2 = float(np.max(sq(X) / np.linalg.norm(Linv_x, axis=1)))
    emp_lower = float(np.max(np.linalg.norm(Lx, axis=1) / sq(X)))
    return {"c1": c1, "c2": c1, "c_lower": c_lower, "c1_sampled": emp1, "c2_sampled": emp2, "c_lower_sampled": emp_lower}


def log_gap_check(
    A: SectorialOperator,
    k: int,
    r: float,
    vectors=None,
    seed: int = 0,
    stable_tol: float = 1e-2,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """Constants relating ``||.||_A`` to ``Lambda_k(A)^{-r}``.

    * ``c1 = sup ||Lambda^{-r} x||_A / ||x||`` (operator level, via ``G``)
    * ``c2 = sup ||x||_A / ||Lambda^r x||``, which equals ``c1`` after the substitution ``x = Lambda^{-r} y``
    * ``c_lower = sup ||Lambda^{-r} x|| / ||x||_A``, the reverse direction

    ``C = max(c1, c_lower)``. Sampled versions use seeded unit vectors plus the
    canonical basis. Constants must agree to ``stable_tol`` between the coarse
    and refined Gram matrices.
    """
    k = int(k)
    if k == 0:
        raise InvalidInputError("k = 0 is excluded")
    if not r > 0.5:
        raise InvalidInputError("r must exceed 1/2")
    L = extended_calculus(A, log_pow(k, r), cfg)
    X = sample_vectors(A.dim, seed=seed) if vectors is None else np.atleast_2d(np.asarray(vectors, dtype=complex))
    G = gram_operator(A, SQRT_OVER_1P, cfg=cfg)
    fine = _log_gap_constants(G.matrix, L, X)
    coarse = _log_gap_constants(G.coarse, L, X)
    change = max(abs(fine[key] - coarse[key]) / fine[key] for key in ("c1", "c_lower"))
    finite = all(np.isfinite(v) for v in fine.values())
    kappa = equivalence_constants(G).kappa
    consts = dict(fine)
    consts["C"] = max(fine["c1"], fine["c_lower"])
    consts["kappa_gram"] = kappa
    return Report(
        check="log_gap",
        passed=bool(finite and change <= stable_tol),
        residuals={"refine_change": change},
        constants=consts,
        params={"k": k, "r": r, "n_vectors": int(X.shape[0]), "seed": seed},
        grid=G.describe(),
        operator_spec=A.spec(),
    )


# ---------------------------------------------------------------------------
# admissibility


def _observation(A: SectorialOperator, weight, cfg) -> np.ndarray:
    C = fractional_power(A, 0.5, cfg)
    if weight is not None:
        k, r = weight
        if int(k) == 0:
            raise InvalidInputError("k = 0 is excluded")
        C = extended_calculus(A, log_pow(int(k), float(r)), cfg) @ C
    return C


def _time_grid(A: SectorialOperator, cfg: QuadConfig) -> RadialGrid:
    lo, hi = A.radii
    min_re = float(np.min(np.real(A.eigenvalues)))
    L = cfg.log_tail
    v_min = -math.log(hi) - L
    v_max = math.log((L + 5.0 * A.dim) / min_re) + 1.0
    return RadialGrid.uniform(v_min, v_max, max(1, int(math.ceil((v_max - v_min) / 0.5))), cfg.order)


def admissibility_gram(A: SectorialOperator, weight=None, cfg: QuadConfig = DEFAULT_QUAD) -> tuple[np.ndarray, float]:
    """``Q = int_0^inf e^{-tA^*} C^* C e^{-tA} dt`` and its relative change under refinement."""
    if A.omega_est >= 0.5 * math.pi:
        raise InvalidInputError("the semigroup e^{-tA} needs a type angle below pi/2")
    C = _observation(A, weight, cfg)

    def integrate(g: RadialGrid) -> np.ndarray:
        t = g.nodes
        E = scipy.linalg.expm(-t[:, None, None] * A.matrix[None])
        Y = C[None] @ E
        Q = np.einsum("k,kji,kjl->il", g.weights * t, Y.conj(), Y)
        return 0.5 * (Q + Q.conj().T)

    g = _time_grid(A, cfg)
    coarse = integrate(g)
    Q = integrate(g.refined())
    return Q, float(np.linalg.norm(Q - coarse) / np.linalg.norm(Q))


def admissibility_integral(A: SectorialOperator, weight, x, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """``int_0^inf ||C e^{-tA} x||^2 dt`` with ``C = sqrt(A)`` or ``Lambda_k(A)^{-r} sqrt(A)``."""
    x = np.asarray(x, dtype=complex)
    Q, _ = admissibility_gram(A, weight, cfg)
    return float(np.real(np.vdot(x, Q @ x)))


def admissibility_check(A: SectorialOperator, weight=None, stable_tol: float = 1e-6, cfg: QuadConfig = DEFAULT_QUAD) -> Report:
    """Smallest ``K`` with ``int ||C e^{-tA} x||^2 dt <= K ||x||^2`` and its refinement stability."""
    Q, change = admissibility_gram(A, weight, cfg)
    K = float(np.linalg.eigvalsh(Q)[-1])
    return Report(
        check="admissibility",
        passed=bool(np.isfinite(K) and change <= stable_tol),
        residuals={"refine_change": change},
        constants={"K": K},
        params={"weight": None if weight is None else list(weight)},
        operator_spec=A.spec(),
    )
