"""Boundary-value function models on the sector boundary.

Functions on ``dS_theta`` are either closed-form :class:`AnalyticFunction`
objects (rational test functions, resolvent traces, logarithmic weights) or
sampled :class:`BoundaryFunction` objects tied to one contour. Closed-form
inputs let every integral be refined adaptively; sampled inputs are
integrated once on their own nodes.

Orientation is the same as in :mod:`sectoria.grids`: the sector lies to the
left, so the Cauchy integral reproduces interior-class functions at interior
points and minus the integral reproduces exterior-class functions outside.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .contour_calculus import (
    adaptive_quadrature,
    contour_features,
    contour_resolvents,
    fractional_power,
    logarithm_branch,
    negative_log_power,
)
from .errors import InvalidInputError, MarginError, QuadratureError, ResolventSingularError
from .grids import DEFAULT_QUAD, Contour, QuadConfig, RadialGrid
from .operator_core import SectorialOperator, resolvent
from .report import Report
from .symbols import principal_log, principal_power

MARGIN = 0.05
EXCLUDE_TOL = 1e-10
EXCLUDE_FRACTION = 0.01
SINGULAR_TOL = 1e-9
RADIUS_SLACK = 4.0


def parse_complex(v) -> complex:
    """Accept ``3``, ``[re, im]``, ``{"re": .., "im": ..}`` or ``"1+2j"``."""
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidInputError(f"complex pair must have two entries, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse complex number {v!r}") from exc
    return complex(v)


def _angle_gap(p: complex, theta: float) -> float:
    """Angular distance from ``p`` to the nearer boundary ray."""
    return abs(abs(math.atan2(p.imag, p.real)) - theta)


# ---------------------------------------------------------------------------
# function objects


@dataclass(frozen=True, eq=False)
class AnalyticFunction:
    """An ``H``-valued function given by a formula.

    ``evaluate`` maps an array of ``N`` points to an ``(N, dim)`` array.
    ``singularities`` lists points where the formula breaks down (branch cuts
    are represented by a point on the cut); ``0`` is ignored. ``decay`` gives
    ``(d0, dinf)`` with ``|f| = O(r^{d0})`` at zero and ``O(r^{-dinf})`` at
    infinity.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    dim: int
    singularities: tuple = ()
    decay: tuple = (0.0, 1.0)
    label: str = ""

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        vals = self.evaluate(np.atleast_1d(np.asarray(z, dtype=complex)))
        return vals[0] if scalar else vals

    def _sing(self):
        return [complex(p) for p in self.singularities if complex(p) != 0]

    def is_interior(self, theta: float) -> bool:
        """Analytic on a neighbourhood of the closed sector (minus the vertex)."""
        return all(abs(np.angle(p)) > theta for p in self._sing())

    def is_exterior(self, theta: float) -> bool:
        """Analytic off the open sector and decaying at infinity."""
        return self.decay[1] > 0 and all(abs(np.angle(p)) < theta for p in self._sing())

    def on(self, contour: Contour) -> "BoundaryFunction":
        return BoundaryFunction(contour, self.evaluate(contour.points), self)

    def times(self, other: Callable[[np.ndarray], np.ndarray], singularities=(), label="") -> "AnalyticFunction":
        """Pointwise product with an operator-valued function ``other(z) -> (N, n, n)``."""
        f = self.evaluate
        return AnalyticFunction(
            lambda z: np.einsum("jab,jb->ja", other(z), f(z)),
            self.dim,
            tuple(self.singularities) + tuple(singularities),
            self.decay,
            label or f"op*{self.label}",
        )


def rational_function(poles, coeff_vectors, orders=None, label: str = "") -> AnalyticFunction:
    """``f(z) = sum_k c_k (z - p_k)^{-m_k}`` with orders ``m_k >= 1`` (default 1)."""
    p = np.array([parse_complex(v) for v in poles], dtype=complex)
    c = np.array([[parse_complex(e) for e in row] for row in coeff_vectors], dtype=complex)
    if p.size == 0 or c.ndim != 2 or c.shape[0] != p.size:
        raise InvalidInputError("need one coefficient vector per pole")
    m = np.ones(p.size, dtype=int) if orders is None else np.array(orders, dtype=int)
    if m.shape != p.shape or np.any(m < 1):
        raise InvalidInputError("pole orders must be positive integers")
    if np.any(p == 0):
        raise InvalidInputError("poles at the vertex are not supported")

    def f(z):
        return ((z[:, None] - p[None, :]) ** (-m[None, :])) @ c

    return AnalyticFunction(f, c.shape[1], tuple(p), (0.0, float(m.min())), label or "rational")


def rational_from_json(data: Mapping) -> AnalyticFunction:
    """``{"poles": [...], "coeff_vectors": [[...], ...], "orders": [...]}``."""
    try:
        return rational_function(data["poles"], data["coeff_vectors"], data.get("orders"))
    except KeyError as exc:
        raise InvalidInputError("rational test function needs 'poles' and 'coeff_vectors'") from exc


def resolvent_function(lam: complex, x) -> AnalyticFunction:
    """``u(z) = (lam - z)^{-1} x``."""
    x = np.asarray(x, dtype=complex)
    lam = complex(lam)
    return AnalyticFunction(
        lambda z: (1.0 / (lam - z))[:, None] * x[None, :], x.size, (lam,), (0.0, 1.0), f"u[{lam:.4g}]"
    )


def log_power_function(r: float, x, k: int = 0) -> AnalyticFunction:
    """``z -> Lambda_k(z)^{-r} z^{-1/2} x`` (principal branches).

    For ``k = 0`` the logarithm vanishes at ``z = 1``, which lies inside every
    sector; that point is recorded as a singularity.
    """
    x = np.asarray(x, dtype=complex)
    r, k = float(r), int(k)

    def f(z):
        lam = principal_log(z) + 2j * math.pi * k
        return (principal_power(lam, -r) * principal_power(z, -0.5))[:, None] * x[None, :]

    sing = (-1.0,) + ((1.0,) if k == 0 else ())
    return AnalyticFunction(f, x.size, sing, (-0.5, 0.5), f"phi[r={r:g},k={k}]")


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Samples of an ``H``-valued function on the nodes of one contour."""

    contour: Contour
    samples: np.ndarray
    source: AnalyticFunction | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 2 or s.shape[0] != self.contour.n_nodes:
            raise InvalidInputError(
                f"expected {self.contour.n_nodes} samples, got array of shape {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise InvalidInputError("boundary samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def l2_norm(self) -> float:
        """``(int ||f||^2 |dz|)^{1/2}`` by the contour rule."""
        return float(np.sqrt(np.sum(np.sum(np.abs(self.samples) ** 2, axis=1) * self.contour.abs_dz)))

    def refined(self) -> "BoundaryFunction":
        if self.source is None:
            raise InvalidInputError("cannot refine a sampled function without its formula")
        return self.source.on(self.contour.refined())

    def to_dict(self) -> dict:
        return {
            "contour": {
                "theta": self.contour.theta,
                "breakpoints": self.contour.grid.breakpoints.tolist(),
                "order": self.contour.grid.order,
            },
            "samples": [[[float(v.real), float(v.imag)] for v in row] for row in self.samples],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BoundaryFunction":
        try:
            c = data["contour"]
            grid = RadialGrid(np.array(c["breakpoints"], dtype=float), int(c.get("order", 16)))
            contour = Contour(float(c["theta"]), grid)
            samples = np.array([[parse_complex(v) for v in row] for row in data["samples"]])
        except (KeyError, TypeError) as exc:
            raise InvalidInputError("boundary function JSON needs 'contour' and 'samples'") from exc
        return cls(contour, samples)


# ---------------------------------------------------------------------------
# contours and evaluation points


def _check_theta(A: SectorialOperator, theta: float) -> float:
    theta = float(theta)
    if not (max(A.omega_est, A.max_arg) < theta < math.pi):
        raise InvalidInputError(
            f"theta = {theta:.4f} must lie in (omega, pi) with omega = {A.omega_est:.4f}"
        )
    return theta


def model_contour(
    A: SectorialOperator,
    theta: float,
    functions: Iterable[AnalyticFunction] = (),
    points: Iterable[complex] = (),
    cfg: QuadConfig = DEFAULT_QUAD,
    rate: float = 0.5,
) -> Contour:
    """Graded contour on ``dS_theta`` resolving eigenvalues, singularities and evaluation points.

    Tails extend until an integrand decaying like ``r^{-rate}`` (in ``|dz|``
    measure) drops below ``cfg.tail_tol``; four extra log-units absorb
    logarithmic factors.
    """
    theta = _check_theta(A, theta)
    extra = []
    radii = list(A.radii)
    for f in functions:
        for p in f._sing():
            extra.append((math.log(abs(p)), max(_angle_gap(p, theta), 1e-4)))
            radii.append(abs(p))
    for p in points:
        p = complex(p)
        if p != 0:
            extra.append((math.log(abs(p)), max(_angle_gap(p, theta), 1e-4)))
            radii.append(abs(p))
    feats = contour_features(A, theta, extra)
    pad = (cfg.log_tail + 4.0) / rate
    u_min = cfg.u_min if cfg.u_min is not None else math.log(min(radii)) - pad
    u_max = cfg.u_max if cfg.u_max is not None else math.log(max(radii)) + pad
    if cfg.n0 is not None:
        grid = RadialGrid.uniform(u_min, u_max, max(1, cfg.n0 // cfg.order), cfg.order)
    else:
        grid = RadialGrid.graded(u_min, u_max, feats, cfg.max_panel, cfg.order)
    return Contour(theta, grid)


@dataclass(frozen=True)
class EvalSet:
    """Points off the contour where Cauchy-type integrals are evaluated."""

    theta: float
    exterior_points: tuple
    interior_points: tuple = ()
    margin: float = MARGIN

    def __post_init__(self):
        for p in self.exterior_points:
            check_margin(p, self.theta, "exterior", self.margin)
        for p in self.interior_points:
            check_margin(p, self.theta, "interior", self.margin)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "margin": self.margin,
            "exterior_points": [complex(p) for p in self.exterior_points],
            "interior_points": [complex(p) for p in self.interior_points],
        }


def check_margin(p: complex, theta: float, side: str, margin: float = MARGIN) -> None:
    """Raise :class:`MarginError` unless ``p`` is at angular distance ``>= margin`` on the requested side."""
    p = complex(p)
    if p == 0:
        raise MarginError("the vertex is not an admissible evaluation point")
    arg = abs(math.atan2(p.imag, p.real))
    if side == "interior":
        ok = arg <= theta - margin
    elif side == "exterior":
        ok = arg >= theta + margin
    else:
        raise InvalidInputError(f"side must be 'interior' or 'exterior', got {side!r}")
    if not ok:
        raise MarginError(
            f"point {p:.6g} violates the {side} margin {margin} for theta = {theta:.4f}"
        )


def make_eval_set(
    A: SectorialOperator,
    theta: float,
    margin: float = MARGIN,
    n_radii: int = 3,
) -> EvalSet:
    """Deterministic points: four exterior and five interior directions at ``n_radii`` radii.

    Radii span ``[rho_min/e, rho_max*e]`` geometrically (inside the allowed
    ``[rho_min/e^4, rho_max*e^4]`` band).
    """
    theta = float(theta)
    room = math.pi - theta - margin
    if room < 0:
        raise MarginError(f"no exterior directions respect margin {margin} at theta = {theta:.4f}")
    lo, hi = A.radii
    radii = np.geomspace(lo / math.e, hi * math.e, n_radii)
    ext_args = [theta + margin + f * room for f in (0.25, 0.75)]
    ext_args = ext_args + [-a for a in ext_args]
    int_args = [0.0] + [s * f * (theta - margin) for f in (0.5, 0.95) for s in (1, -1)]
    ext = tuple(complex(r * np.exp(1j * a)) for r in radii for a in ext_args)
    inner = tuple(complex(r * np.exp(1j * a)) for r in radii for a in int_args)
    return EvalSet(theta, ext, inner, margin)


def check_radii(A: SectorialOperator, points: Iterable[complex], slack: float = RADIUS_SLACK) -> None:
    lo, hi = A.radii
    for p in points:
        if not lo * math.exp(-slack) <= abs(p) <= hi * math.exp(slack):
            raise MarginError(f"|{complex(p):.4g}| is outside [rho_min/e^{slack:g}, rho_max*e^{slack:g}]")


# ---------------------------------------------------------------------------
# characteristic functions


@dataclass(frozen=True, eq=False)
class CharFn:
    """``delta_alpha(z) = (1/alpha)(A^a - z^a)(A^a + z^a)^{-1}`` and its inverse, with ``A^a`` cached."""

    A: SectorialOperator
    alpha: float
    power: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidInputError("alpha must be positive")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "power", fractional_power(self.A, self.alpha))

    def _check(self, z, limit: float, what: str) -> complex:
        z = complex(z)
        if z == 0:
            raise InvalidInputError(f"{what} is not defined at the vertex")
        if self.alpha * abs(math.atan2(z.imag, z.real)) > limit:
            raise InvalidInputError(f"alpha*|arg z| must stay below {limit:.4f} for {what}")
        return z

    def delta(self, z, form: str = "quotient") -> np.ndarray:
        z = self._check(z, 0.5 * math.pi, "delta_alpha")
        P, I = self.power, self.A.identity
        w = principal_power(z, self.alpha)
        if form == "quotient":
            return np.linalg.solve(P + w * I, P - w * I) / self.alpha
        if form == "resolvent":
            return (I - 2 * w * np.linalg.solve(P + w * I, I)) / self.alpha
        raise InvalidInputError(f"unknown form {form!r}")

    def inverse(self, z) -> np.ndarray:
        z = self._check(z, math.pi, "the inverse characteristic function")
        P, I = self.power, self.A.identity
        w = principal_power(z, self.alpha)
        M = P - w * I
        smin = np.linalg.svd(M, compute_uv=False)[-1]
        if smin < EXCLUDE_TOL * np.linalg.norm(P, 2):
            raise ResolventSingularError(f"z^alpha is within {smin:.2e} of the spectrum of A^alpha")
        return self.alpha * np.linalg.solve(M, P + w * I)

    def delta_nodes(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        w = principal_power(zs, self.alpha)
        P, I = self.power, self.A.identity
        return np.linalg.solve(P[None] + w[:, None, None] * I, P[None] - w[:, None, None] * I) / self.alpha

    def inverse_nodes(self, zs) -> tuple[np.ndarray, np.ndarray]:
        """Node values of the inverse; nodes too close to ``sigma(A^alpha)`` are zeroed and flagged."""
        zs = np.asarray(zs, dtype=complex)
        w = principal_power(zs, self.alpha)
        P, I = self.power, self.A.identity
        M = P[None] - w[:, None, None] * I
        smin = np.linalg.svd(M, compute_uv=False)[:, -1]
        bad = smin < EXCLUDE_TOL * np.linalg.norm(P, 2)
        M = np.where(bad[:, None, None], I[None], M)
        out = self.alpha * np.linalg.solve(M, P[None] + w[:, None, None] * I)
        out[bad] = 0.0
        return out, bad


def char_fn(C: CharFn, z, form: str = "quotient") -> np.ndarray:
    return C.delta(z, form)


def inv_char_fn(C: CharFn, z) -> np.ndarray:
    return C.inverse(z)


def _delta_singularities(A: SectorialOperator, alpha: float) -> list:
    """Points ``xi`` with ``xi^alpha = -lambda^alpha`` on the principal branch."""
    out = []
    for lam in A.eigenvalues:
        for s in (1, -1):
            a = np.angle(lam) + s * math.pi / alpha
            if abs(a) < math.pi:
                out.append(abs(lam) * complex(math.cos(a), math.sin(a)))
    return out


# ---------------------------------------------------------------------------
# observation and control maps


def observation_map(A: SectorialOperator, x, z) -> np.ndarray:
    """``O x(z) = sqrt(A)(z - A)^{-1} x``."""
    x = np.asarray(x, dtype=complex)
    return fractional_power(A, 0.5) @ (resolvent(A, z) @ x)


def observation_values(A: SectorialOperator, x, zs) -> np.ndarray:
    """``O x`` at several points, shape ``(len(zs), n)``; ``x`` may be ``(n,)`` or ``(F, n)`` giving ``(F, L, n)``."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    x = np.asarray(x, dtype=complex)
    S = fractional_power(A, 0.5)
    M = zs[:, None, None] * A.identity[None] - A.matrix[None]
    X = np.atleast_2d(x)
    Y = np.linalg.solve(M[None], np.broadcast_to(X[:, None, :, None], (X.shape[0], zs.size, A.dim, 1)))[..., 0]
    Y = Y @ S.T
    return Y[0] if x.ndim == 1 else Y


def _samples(u, contour: Contour) -> np.ndarray:
    """Stack samples of one or several functions on ``contour``: ``(F, N, n)``."""
    if isinstance(u, BoundaryFunction):
        if u.contour is not contour and u.contour.key() != contour.key():
            raise InvalidInputError("boundary function lives on a different contour")
        return u.samples[None]
    if isinstance(u, AnalyticFunction):
        return u.evaluate(contour.points)[None]
    return np.concatenate([_samples(v, contour) for v in u])


def _control_sum(A: SectorialOperator, U: np.ndarray, contour: Contour) -> tuple[np.ndarray, float]:
    R, _ = contour_resolvents(A, contour)
    S = fractional_power(A, 0.5)
    Y = np.einsum("jab,fjb->fja", R, U @ S.T)
    val = np.einsum("fja,j->fa", Y, contour.dz) / (1j * math.pi)
    mass = float(np.sum(np.linalg.norm(Y, axis=2) * contour.abs_dz[None, :]) / math.pi)
    return val, mass


def _as_list(u) -> list:
    return list(u) if isinstance(u, (list, tuple)) else [u]


def _contour_for(A, theta, u, points=(), cfg=DEFAULT_QUAD) -> Contour:
    funcs = [f for f in _as_list(u) if isinstance(f, AnalyticFunction)]
    return model_contour(A, theta, funcs, points, cfg)


def control_map(
    A: SectorialOperator,
    u,
    theta: float | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    contour: Contour | None = None,
) -> np.ndarray:
    """``W u = (1/(pi i)) int (xi - A)^{-1} sqrt(A) u(xi) d xi`` over ``dS_theta``.

    ``u`` may be a :class:`BoundaryFunction` (integrated on its own nodes),
    an :class:`AnalyticFunction` (adaptive) or a list of analytic functions
    (result of shape ``(F, n)``).
    """
    if isinstance(u, BoundaryFunction):
        val, _ = _control_sum(A, u.samples[None], u.contour)
        return val[0]
    if contour is None:
        if theta is None:
            raise InvalidInputError("theta is required for closed-form inputs")
        contour = _contour_for(A, theta, u, cfg=cfg)
    val, _, _ = adaptive_quadrature(lambda c: _control_sum(A, _samples(u, c), c), contour, cfg)
    return val if isinstance(u, (list, tuple)) else val[0]


def _cauchy_kernel(contour: Contour, lams: np.ndarray, side: str) -> np.ndarray:
    sign = 1.0 if side == "interior" else -1.0
    return sign * contour.dz[None, :] / (contour.points[None, :] - lams[:, None]) / (2j * math.pi)


def cauchy_transform(
    f,
    lam,
    side: str,
    theta: float | None = None,
    A: SectorialOperator | None = None,
    margin: float = MARGIN,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> np.ndarray:
    """``P_int f(lam) = (1/2 pi i) int f(xi)/(xi - lam) d xi`` or ``P_out f = -`` the same.

    ``lam`` may be a scalar or an array (result ``(L, n)``). For closed-form
    ``f`` the contour is graded around ``lam`` and refined adaptively; ``A``
    only supplies the radial scale and defaults to a unit scale.
    """
    scalar = np.ndim(lam) == 0
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    if isinstance(f, BoundaryFunction):
        theta = f.contour.theta
    elif theta is None:
        raise InvalidInputError("theta is required for closed-form inputs")
    for p in lams:
        check_margin(p, theta, side, margin)

    def compute(c):
        F = _samples(f, c)[0]
        K = _cauchy_kernel(c, lams, side)
        val = K @ F
        mass = float(np.sum(np.abs(K) @ np.linalg.norm(F, axis=1)))
        return val, mass

    if isinstance(f, BoundaryFunction):
        val, _ = compute(f.contour)
    else:
        op = A if A is not None else _unit_operator(f.dim)
        contour = model_contour(op, theta, [f], lams, cfg)
        val, _, _ = adaptive_quadrature(compute, contour, cfg)
    return val[0] if scalar else val


def _unit_operator(n: int) -> SectorialOperator:
    return SectorialOperator(np.eye(n, dtype=complex), omega_est=0.0)


def _hankel_sum(C: CharFn, U: np.ndarray, contour: Contour, lams: np.ndarray):
    D, bad = C.inverse_nodes(contour.points)
    frac = bad.mean()
    if frac > EXCLUDE_FRACTION:
        raise ResolventSingularError(
            f"{bad.sum()} of {bad.size} contour nodes are within tolerance of sigma(A^alpha)"
        )
    if bad.any():
        warnings.warn(f"{bad.sum()} near-spectrum contour nodes excluded; accuracy may degrade")
    V = np.einsum("jab,fjb->fja", D, U)
    K = _cauchy_kernel(contour, lams, "exterior")
    val = np.einsum("lj,fja->fla", K, V)
    mass = float(np.sum(np.abs(K) @ np.linalg.norm(V, axis=2).T))
    return val, mass, int(bad.sum())


def hankel_apply(
    C: CharFn,
    u,
    lam,
    theta: float | None = None,
    margin: float = MARGIN,
    cfg: QuadConfig = DEFAULT_QUAD,
    contour: Contour | None = None,
) -> np.ndarray:
    """``J u(lam) = P_out(delta~_alpha u)(lam)`` at exterior points.

    Shapes follow the inputs: a single function and scalar ``lam`` give
    ``(n,)``; lists/arrays add leading ``(F, L)`` axes.
    """
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    if isinstance(u, BoundaryFunction):
        theta = u.contour.theta
    elif theta is None and contour is None:
        raise InvalidInputError("theta is required for closed-form inputs")
    theta = contour.theta if contour is not None else theta
    if C.alpha * theta >= math.pi:
        raise InvalidInputError("alpha*theta must stay below pi for the inverse characteristic function")
    for p in lams:
        check_margin(p, theta, "exterior", margin)
    if isinstance(u, BoundaryFunction):
        val, _, _ = _hankel_sum(C, u.samples[None], u.contour, lams)
    else:
        if contour is None:
            contour = _contour_for(C.A, theta, u, lams, cfg)
        val, _, _ = adaptive_quadrature(
            lambda c: _hankel_sum(C, _samples(u, c), c, lams)[:2], contour, cfg
        )
    if not isinstance(u, (list, tuple)):
        val = val[0]
        return val[0] if np.ndim(lam) == 0 else val
    return val


# ---------------------------------------------------------------------------
# identity checks


def default_battery(A: SectorialOperator, theta: float) -> list[AnalyticFunction]:
    """Resolvent traces ``(lam - z)^{-1} e_i`` for ``lam in {-1, -2, 3 e^{i(theta+0.3)}}``
    and logarithmic weights ``Lambda_1(z)^{-r} z^{-1/2} e_1`` for ``r in {0.6, 1}``."""
    lams = (-1.0 + 0j, -2.0 + 0j, 3 * np.exp(1j * (theta + 0.3)))
    basis = np.eye(A.dim, dtype=complex)
    out = [resolvent_function(l, e) for l in lams for e in basis]
    out += [log_power_function(r, basis[0], k=1) for r in (0.6, 1.0)]
    return out


def kernel_battery(A: SectorialOperator, theta: float) -> list[AnalyticFunction]:
    """Interior-class rational functions used for the kernel test."""
    basis = np.eye(A.dim, dtype=complex)
    ones = np.ones(A.dim, dtype=complex) / math.sqrt(A.dim)
    out = [resolvent_function(l, e) for l in (-1.0, 3 * np.exp(1j * (theta + 0.3))) for e in basis]
    out.append(rational_function([-2.0, -0.5 + 0j], [ones, 1j * basis[0]], orders=[2, 1], label="mixed"))
    return out


def verify_factorization(
    A: SectorialOperator,
    theta: float,
    alpha: float,
    u=None,
    eval_set: EvalSet | None = None,
    tol: float = 1e-4,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """Residual of ``O(W u)(lam) = -J u(lam)`` over the exterior evaluation points.

    Residuals are ``||O W u(lam) + J u(lam)||`` divided by the largest
    ``||O W u(lam)||`` for the same ``u``; the reported value is the max over
    points and test functions.
    """
    theta = _check_theta(A, theta)
    u = default_battery(A, theta) if u is None else u
    funcs = _as_list(u)
    ev = make_eval_set(A, theta) if eval_set is None else eval_set
    lams = np.array(ev.exterior_points, dtype=complex)
    C = CharFn(A, alpha)
    contour = _contour_for(A, theta, funcs, lams, cfg)
    Wu = control_map(A, funcs, cfg=cfg, contour=contour)
    lhs = observation_values(A, Wu, lams)
    J = hankel_apply(C, funcs, lams, contour=contour, cfg=cfg)
    diff = np.linalg.norm(lhs + J, axis=2)
    scale = np.maximum(np.linalg.norm(lhs, axis=2).max(axis=1, keepdims=True), 1e-300)
    per_point = (diff / scale).max(axis=0)
    resid = float(per_point.max())
    return Report(
        check="factorization",
        passed=bool(resid <= tol),
        residuals={"max_relative": resid, "per_point": per_point.tolist()},
        constants={"max_OW_norm": float(np.linalg.norm(lhs, axis=2).max())},
        params={
            "theta": theta,
            "alpha": alpha,
            "tol": tol,
            "functions": [f.label for f in funcs if isinstance(f, AnalyticFunction)],
            "eval_points": lams.tolist(),
        },
        grid=contour.describe(),
        operator_spec=A.spec(),
    )


def alpha_independence_check(
    A: SectorialOperator,
    theta: float,
    alphas: Sequence[float],
    u=None,
    eval_set: EvalSet | None = None,
    tol: float = 1e-4,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """Pairwise differences of ``J_alpha u`` over ``alphas``, relative to ``max ||J u||``."""
    theta = _check_theta(A, theta)
    if len(alphas) < 2:
        raise InvalidInputError("need at least two alpha values")
    funcs = _as_list(default_battery(A, theta) if u is None else u)
    ev = make_eval_set(A, theta) if eval_set is None else eval_set
    lams = np.array(ev.exterior_points, dtype=complex)
    contour = _contour_for(A, theta, funcs, lams, cfg)
    vals = [hankel_apply(CharFn(A, a), funcs, lams, contour=contour, cfg=cfg) for a in alphas]
    scale = max(float(np.linalg.norm(v, axis=2).max()) for v in vals)
    pairs = {}
    for i in range(len(alphas)):
        for j in range(i + 1, len(alphas)):
            d = float(np.linalg.norm(vals[i] - vals[j], axis=2).max()) / max(scale, 1e-300)
            pairs[f"{alphas[i]:.6g}|{alphas[j]:.6g}"] = d
    resid = max(pairs.values())
    return Report(
        check="alpha_independence",
        passed=bool(resid <= tol),
        residuals={"max_relative": resid, "pairs": pairs},
        constants={"max_J_norm": scale},
        params={"theta": theta, "alphas": list(alphas), "tol": tol},
        grid=contour.describe(),
        operator_spec=A.spec(),
    )


def kernel_membership_check(
    A: SectorialOperator,
    theta: float,
    alpha: float,
    h=None,
    tol: float = 1e-4,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """``||W(delta_alpha h)|| / ||h||_{L^2(dS_theta)}`` for interior-class ``h``."""
    theta = _check_theta(A, theta)
    if alpha * theta >= 0.5 * math.pi:
        raise InvalidInputError("alpha*theta must stay below pi/2")
    funcs = _as_list(kernel_battery(A, theta) if h is None else h)
    for f in funcs:
        if not f.is_interior(theta):
            raise InvalidInputError(f"{f.label} is not analytic on the closed sector")
    C = CharFn(A, alpha)
    sing = _delta_singularities(A, alpha)
    prods = [f.times(C.delta_nodes, sing, f"delta*{f.label}") for f in funcs]
    contour = _contour_for(A, theta, prods, cfg=cfg)
    W = control_map(A, prods, cfg=cfg, contour=contour)
    norms = np.array([f.on(contour).l2_norm() for f in funcs])
    ratios = np.linalg.norm(W, axis=1) / norms
    resid = float(ratios.max())
    return Report(
        check="kernel_membership",
        passed=bool(resid <= tol),
        residuals={"max_ratio": resid, "ratios": ratios.tolist()},
        constants={"h_norms": norms.tolist()},
        params={"theta": theta, "alpha": alpha, "tol": tol, "functions": [f.label for f in funcs]},
        grid=contour.describe(),
        operator_spec=A.spec(),
    )


def default_probes(A: SectorialOperator, theta: float, margin: float = 1e-3) -> np.ndarray:
    """Eigenvalues, points at distance ``2*margin`` around them, and an interior grid."""
    pts = list(A.eigenvalues)
    for lam in A.eigenvalues:
        pts += [lam + 2 * margin * np.exp(1j * a) for a in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)]
    lo, hi = A.radii
    for r in np.geomspace(lo / 2, 2 * hi, 5):
        for a in np.linspace(-0.9 * theta, 0.9 * theta, 5):
            pts.append(r * np.exp(1j * a))
    pts = np.array(pts, dtype=complex)
    inside = (pts != 0) & (np.abs(np.angle(pts)) < theta)
    return pts[inside]


def _delta_scale(C: CharFn, z: complex) -> float:
    """Size of the two terms in ``(1/alpha)(I - 2 z^a (A^a + z^a)^{-1})``; independent of cancellation."""
    w = principal_power(complex(z), C.alpha)
    K = np.linalg.solve(C.power + w * C.A.identity, C.A.identity)
    return (1.0 + 2.0 * abs(w) * float(np.linalg.norm(K, 2))) / C.alpha


def char_fn_spectrum_check(
    C: CharFn,
    probe_points=None,
    theta: float | None = None,
    margin: float = 1e-3,
    sing_tol: float = SINGULAR_TOL,
) -> Report:
    """Classify probes as singular (``s_min(delta_alpha) / scale < sing_tol``) and compare with the spectrum.

    ``scale`` bounds the norms of the two terms of ``delta_alpha``, so the test
    still works when ``delta_alpha`` vanishes identically.

    Probes within ``margin`` of an eigenvalue but not on it are ambiguous and
    skipped. A boundary scan records the smallest ``s_min`` on ``dS_theta``.
    """
    A = C.A
    if theta is None:
        top = min(math.pi, 0.5 * math.pi / C.alpha)
        theta = 0.5 * (max(A.omega_est, A.max_arg) + top)
    theta = float(theta)
    if C.alpha * theta >= 0.5 * math.pi:
        raise InvalidInputError("alpha*theta must stay below pi/2")
    probes = default_probes(A, theta, margin) if probe_points is None else np.atleast_1d(np.asarray(probe_points, complex))
    eig = A.eigenvalues
    wrong, skipped, rows = 0, 0, []
    for p in probes:
        if p == 0 or abs(np.angle(p)) >= theta:
            raise InvalidInputError(f"probe {p} is not in the open sector")
        dist = float(np.min(np.abs(eig - p)))
        s = np.linalg.svd(C.delta(p), compute_uv=False)
        ratio = float(s[-1] / _delta_scale(C, p))
        found = ratio < sing_tol
        if dist <= 1e-12 * max(1.0, abs(p)):
            expected = True
        elif dist >= margin:
            expected = False
        else:
            skipped += 1
            continue
        wrong += int(found != expected)
        rows.append({"point": complex(p), "ratio": ratio, "singular": found, "expected": expected})
    ring = np.geomspace(A.radii[0] / 10, A.radii[1] * 10, 41)
    bd = np.concatenate([ring * np.exp(1j * theta), ring * np.exp(-1j * theta)])
    smin = np.linalg.svd(C.delta_nodes(bd), compute_uv=False)[:, -1]
    return Report(
        check="char_fn_spectrum",
        passed=wrong == 0,
        residuals={"misclassified": wrong},
        constants={"boundary_min_singular": float(smin.min()), "skipped": skipped},
        params={"alpha": C.alpha, "theta": theta, "margin": margin, "sing_tol": sing_tol},
        grid={"probes": rows},
        operator_spec=A.spec(),
    )


def model_resolvent(f: Callable, lam, w) -> np.ndarray:
    """Difference quotient ``(f(w) - f(lam)) / (w - lam)``."""
    lam, w = complex(lam), complex(w)
    if w == lam:
        raise InvalidInputError("w must differ from lambda")
    return (np.asarray(f(w)) - np.asarray(f(lam))) / (w - lam)


def obs_intertwining_check(A: SectorialOperator, x, lam, eval_points, tol: float = 1e-9) -> Report:
    """``sqrt(A)(w-A)^{-1}(lam-A)^{-1}x`` against ``(O x(w) - O x(lam)) / (lam - w)``."""
    x = np.asarray(x, dtype=complex)
    lam = complex(lam)
    ws = np.atleast_1d(np.asarray(eval_points, dtype=complex))
    if np.any(ws == lam):
        raise InvalidInputError("evaluation points must differ from lambda")
    y = resolvent(A, lam) @ x
    S = fractional_power(A, 0.5)
    ox_lam = S @ y
    lhs = np.array([S @ (resolvent(A, w) @ y) for w in ws])
    rhs = np.array([(observation_map(A, x, w) - ox_lam) / (lam - w) for w in ws])
    scale = max(float(np.linalg.norm(lhs, axis=1).max()), 1e-300)
    resid = float(np.linalg.norm(lhs - rhs, axis=1).max()) / scale
    return Report(
        check="obs_intertwining",
        passed=bool(resid <= tol),
        residuals={"max_relative": resid},
        params={"lambda": lam, "eval_points": ws.tolist(), "tol": tol},
        operator_spec=A.spec(),
    )


def ctr_intertwining_check(
    A: SectorialOperator,
    u: AnalyticFunction,
    lam,
    theta: float,
    tol: float = 1e-6,
    margin: float = MARGIN,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """``(A - lam)^{-1} W u = W(u / (z - lam))`` for exterior ``lam`` and interior-class ``u``.

    The difference-quotient variant ``W((u - u(lam))/(z - lam))`` is reported
    for comparison; it differs by ``2 sqrt(A)(lam - A)^{-1} u(lam)``.
    """
    theta = _check_theta(A, theta)
    lam = complex(lam)
    check_margin(lam, theta, "exterior", margin)
    if not u.is_interior(theta):
        raise InvalidInputError(f"{u.label} is not analytic on the closed sector")
    ulam = u(lam)
    v = AnalyticFunction(
        lambda z: u.evaluate(z) / (z - lam)[:, None], u.dim, tuple(u.singularities) + (lam,),
        (u.decay[0], u.decay[1] + 1), f"{u.label}/(z-lam)",
    )
    vq = AnalyticFunction(
        lambda z: (u.evaluate(z) - ulam[None, :]) / (z - lam)[:, None], u.dim, tuple(u.singularities),
        (0.0, 1.0), f"({u.label}-u(lam))/(z-lam)",
    )
    contour = _contour_for(A, theta, [u, v, vq], [lam], cfg)
    Wu, Wv, Wq = control_map(A, [u, v, vq], cfg=cfg, contour=contour)
    lhs = np.linalg.solve(A.matrix - lam * A.identity, Wu)
    scale = max(float(np.linalg.norm(lhs)), 1e-300)
    resid = float(np.linalg.norm(lhs - Wv)) / scale
    quotient = float(np.linalg.norm(lhs - Wq)) / scale
    return Report(
        check="ctr_intertwining",
        passed=bool(resid <= tol),
        residuals={"relative": resid},
        constants={"quotient_form_relative": quotient},
        params={"lambda": lam, "theta": theta, "tol": tol, "function": u.label},
        grid=contour.describe(),
        operator_spec=A.spec(),
    )


def boundary_pairing(f, g, theta: float | None = None, A: SectorialOperator | None = None, cfg: QuadConfig = DEFAULT_QUAD) -> complex:
    """``(1/2 pi i) int <f(lam), g(conj lam)> d lam`` over ``dS_theta``.

    Sampled inputs must share a contour; closed-form inputs are integrated
    adaptively on a contour graded for both.
    """

    def compute(c, F, G):
        m = c.mirror_index()
        vals = np.sum(F * G[m].conj(), axis=1)
        return np.array(np.sum(vals * c.dz) / (2j * math.pi)), float(np.sum(np.abs(vals) * c.abs_dz))

    if isinstance(f, BoundaryFunction) or isinstance(g, BoundaryFunction):
        if not (isinstance(f, BoundaryFunction) and isinstance(g, BoundaryFunction)):
            raise InvalidInputError("pair two sampled functions or two closed-form functions")
        if f.contour.key() != g.contour.key():
            raise InvalidInputError("boundary functions live on different contours")
        return complex(compute(f.contour, f.samples, g.samples)[0])
    if theta is None:
        raise InvalidInputError("theta is required for closed-form inputs")
    op = A if A is not None else _unit_operator(f.dim)
    mirrored = [complex(p).conjugate() for p in g._sing()]
    contour = model_contour(op, theta, [f, g], mirrored, cfg)
    val, _, _ = adaptive_quadrature(
        lambda c: compute(c, f.evaluate(c.points), g.evaluate(c.points)), contour, cfg
    )
    return complex(val)


def log_power_apply(A: SectorialOperator, k: int, r: float, x) -> np.ndarray:
    """``Lambda_k(A)^{-r} x``; for ``k = 0`` through a Schur-Pade power of ``Log A``."""
    x = np.asarray(x, dtype=complex)
    if int(k) != 0:
        return negative_log_power(A, k, r, x)
    L = logarithm_branch(A, 0)
    if np.linalg.svd(L, compute_uv=False)[-1] < 1e-12 * max(1.0, np.linalg.norm(L, 2)):
        raise ResolventSingularError("Log(A) is singular (1 is an eigenvalue of A)")
    return scipy.linalg.fractional_matrix_power(L, -float(r)) @ x


def w1_check(
    A: SectorialOperator,
    r: float,
    theta: float,
    x=None,
    k: int = 0,
    factor: float = 1.0,
    tol: float = 1e-4,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """Compare ``W_theta(Lambda_k(z)^{-r} z^{-1/2} x)`` with ``factor * Lambda_k(A)^{-r} x``.

    ``constants["ratio"]`` is the least-squares multiple of ``Lambda_k(A)^{-r} x``
    that best matches the left side.
    """
    theta = _check_theta(A, theta)
    xs = np.eye(A.dim, dtype=complex) if x is None else np.atleast_2d(np.asarray(x, dtype=complex))
    funcs = [log_power_function(r, xi, k) for xi in xs]
    contour = _contour_for(A, theta, funcs, cfg=cfg)
    lhs = control_map(A, funcs, cfg=cfg, contour=contour)
    target = np.array([log_power_apply(A, k, r, xi) for xi in xs])
    rhs = factor * target
    per = np.linalg.norm(lhs - rhs, axis=1) / np.maximum(np.linalg.norm(rhs, axis=1), 1e-300)
    ratio = complex(np.vdot(target.ravel(), lhs.ravel()) / np.vdot(target.ravel(), target.ravel()))
    resid = float(per.max())
    return Report(
        check="w1_identity",
        passed=bool(resid <= tol),
        residuals={"max_relative": resid},
        constants={"ratio": ratio},
        params={"r": r, "k": int(k), "factor": factor, "theta": theta, "tol": tol},
        grid=contour.describe(),
        operator_spec=A.spec(),
    )


def theta_independence_check(
    A: SectorialOperator,
    thetas: Sequence[float] = (2.0, 2.6),
    alpha: float = 0.5,
    tol: float = 1e-4,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> Report:
    """Factorization and intertwining residuals for several boundary angles on shared points.

    Evaluation points and test functions are chosen for the widest angle, so
    they are admissible for all of them. Passes when every residual is within
    ``tol`` and residuals for different angles differ by at most ``2 tol``.
    ``W u`` itself is also compared across angles.
    """
    thetas = [_check_theta(A, t) for t in thetas]
    if len(thetas) < 2:
        raise InvalidInputError("need at least two angles")
    wide = max(thetas)
    ev = make_eval_set(A, wide)
    funcs = default_battery(A, wide)
    x = np.ones(A.dim, dtype=complex) / math.sqrt(A.dim)
    u = resolvent_function(-2.0, x)
    lam = complex(ev.exterior_points[0])
    fact, ctr, wu = {}, {}, {}
    for th in thetas:
        rep = verify_factorization(A, th, alpha, u=funcs, eval_set=ev, tol=tol, cfg=cfg)
        fact[th] = rep.residuals["max_relative"]
        ctr[th] = ctr_intertwining_check(A, u, lam, th, tol=tol, cfg=cfg).residuals["relative"]
        wu[th] = control_map(A, funcs, cfg=cfg, contour=_contour_for(A, th, funcs, cfg=cfg))
    spread_f = max(fact.values()) - min(fact.values())
    spread_c = max(ctr.values()) - min(ctr.values())
    ref = wu[thetas[0]]
    scale = max(float(np.linalg.norm(ref, axis=1).max()), 1e-300)
    wu_change = max(float(np.linalg.norm(wu[t] - ref, axis=1).max()) / scale for t in thetas[1:])
    ok = max(*fact.values(), *ctr.values(), wu_change) <= tol and max(spread_f, spread_c) <= 2 * tol
    return Report(
        check="theta_independence",
        passed=bool(ok),
        residuals={
            "factorization": {f"{t:g}": v for t, v in fact.items()},
            "ctr_intertwining": {f"{t:g}": v for t, v in ctr.items()},
            "factorization_spread": spread_f,
            "ctr_spread": spread_c,
            "control_map_change": wu_change,
        },
        params={"thetas": thetas, "alpha": alpha, "tol": tol, "eval_points": list(ev.exterior_points)},
        operator_spec=A.spec(),
    )
