"""Dense complex matrices treated as sectorial operators.

A :class:`SectorialOperator` bundles the matrix with its estimated type angle
and the resolvent constants certified so far. Everything that needs ``sqrt(A)``
or other functions of ``A`` goes through :mod:`sectoria.contour_calculus`;
the results are cached on the operator.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    InvalidInputError,
    NotSectorialError,
    ResolventSingularError,
    SingularOperatorError,
)
from .grids import RadialGrid

KERNEL_TOL = 1e-12
RESOLVENT_TOL = 1e-13
ANGLE_GRID = 256
SATURATION_TOL = 1e-3
C_THETA_CAP = 1e6


@dataclass(frozen=True)
class Sector:
    """Closed sector ``{|arg z| <= theta} U {0}``."""

    theta: float

    def __post_init__(self):
        if not (0 < self.theta < math.pi or math.isclose(self.theta, math.pi)):
            raise InvalidInputError(f"sector angle {self.theta} outside (0, pi]")

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (z == 0) | (np.abs(np.angle(z)) <= self.theta - margin)


def _as_theta(theta) -> float:
    return float(theta.theta if isinstance(theta, Sector) else theta)


@dataclass(frozen=True, eq=False)
class SectorialOperator:
    """Square complex matrix with trivial kernel and a certified type angle."""

    matrix: np.ndarray
    omega_est: float
    c_theta: dict = field(default_factory=dict)
    label: Any = None
    eigenvalues: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        ev = np.linalg.eigvals(m) if self.eigenvalues is None else np.asarray(self.eigenvalues, complex)
        ev = np.array(ev, dtype=complex)
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    @property
    def max_arg(self) -> float:
        """Largest ``|arg|`` over the spectrum."""
        return float(np.max(np.abs(np.angle(self.eigenvalues))))

    @property
    def radii(self) -> tuple[float, float]:
        """``(rho_min, rho_max)`` bracketing ``|sigma(A)|`` and the singular values."""
        sv = np.linalg.svd(self.matrix, compute_uv=False)
        mods = np.abs(self.eigenvalues)
        return float(min(mods.min(), sv.min())), float(max(mods.max(), sv.max()))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def adjoint(self) -> "SectorialOperator":
        key = "adjoint"
        if key not in self._cache:
            label = {"adjoint_of": self.label} if self.label is not None else None
            self._cache[key] = SectorialOperator(
                self.matrix.conj().T, self.omega_est, {}, label, self.eigenvalues.conj()
            )
        return self._cache[key]

    def spec(self) -> Any:
        if self.label is not None:
            return self.label
        return matrix_to_json(self.matrix)


# ---------------------------------------------------------------------------
# construction and loading


def _check_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"operator must be a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise InvalidInputError("operator dimension must be >= 1")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix entries must be finite")
    return m


def _check_kernel(m: np.ndarray) -> None:
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= KERNEL_TOL * max(sv[0], np.finfo(float).tiny):
        raise SingularOperatorError(
            f"smallest singular value {sv[-1]:.3e} <= {KERNEL_TOL:g}*||A||: operator is not one-to-one"
        )


def from_matrix(m, label=None, eigenvalues=None, n_angles: int = ANGLE_GRID) -> SectorialOperator:
    """Validate ``m``, check the kernel, and estimate the type angle."""
    m = _check_matrix(m)
    _check_kernel(m)
    op = SectorialOperator(m, omega_est=math.nan, label=label, eigenvalues=eigenvalues)
    omega = estimate_type_angle(op, n_angles=n_angles)
    object.__setattr__(op, "omega_est", omega)
    return op


def matrix_from_json(data: Mapping) -> np.ndarray:
    """Parse ``{"dim": n, "entries": [[re, im], ...]}`` (row-major, length n*n)."""
    try:
        dim = int(data["dim"])
        entries = data["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError("matrix JSON needs 'dim' and 'entries'") from exc
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    if len(entries) != dim * dim:
        raise InvalidInputError(
            f"non-square input: {len(entries)} entries cannot form a {dim}x{dim} matrix"
        )
    try:
        vals = [complex(float(e[0]), float(e[1])) for e in entries]
    except (TypeError, ValueError, IndexError) as exc:
        raise InvalidInputError("each entry must be a [re, im] pair") from exc
    return np.array(vals, dtype=complex).reshape(dim, dim)


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0], "entries": [[float(v.real), float(v.imag)] for v in m.ravel()]}


def load_operator(spec, seed: int | None = None) -> SectorialOperator:
    """Load from a JSON file path, a parsed JSON mapping, a family string, or an array.

    Mappings with a ``"family"`` key are family specs; otherwise the matrix
    format ``{"dim", "entries"}`` is expected.
    """
    if isinstance(spec, SectorialOperator):
        return spec
    if isinstance(spec, (str, os.PathLike)):
        path = Path(spec)
        if path.suffix == ".json" or path.exists():
            try:
                data = json.loads(path.read_text())
            except FileNotFoundError as exc:
                raise InvalidInputError(f"no such matrix file: {path}") from exc
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path} is not valid JSON") from exc
            return load_operator(data, seed=seed)
        name, params = parse_family_string(str(spec))
        return make_family(name, params, seed=seed)
    if isinstance(spec, Mapping):
        if "family" in spec:
            return make_family(spec["family"], spec.get("params", {}), seed=spec.get("seed", seed))
        return from_matrix(matrix_from_json(spec), label=None)
    return from_matrix(spec)


# ---------------------------------------------------------------------------
# resolvents and sectoriality


def resolvent(A: SectorialOperator, z: complex) -> np.ndarray:
    """``(zI - A)^{-1}`` by a pivoted LU solve.

    Raises :class:`ResolventSingularError` when ``zI - A`` is numerically singular.
    """
    z = complex(z)
    M = z * A.identity - A.matrix
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if smin <= RESOLVENT_TOL * max(1.0, A.norm, abs(z)):
        raise ResolventSingularError(f"z={z} is within {smin:.2e} of the spectrum")
    return np.linalg.solve(M, A.identity)


def resolvent_stack(A: SectorialOperator, zs) -> np.ndarray:
    """Batched ``(z_j I - A)^{-1}`` with shape ``(len(zs), n, n)``. No proximity check."""
    zs = np.asarray(zs, dtype=complex).ravel()
    M = zs[:, None, None] * A.identity[None] - A.matrix[None]
    return np.linalg.solve(M, np.broadcast_to(A.identity, M.shape))


def _scaled_resolvent_norm(A: SectorialOperator, zs: np.ndarray) -> np.ndarray:
    """``|z| * ||(z - A)^{-1}||`` for each ``z``."""
    M = zs[:, None, None] * A.identity[None] - A.matrix[None]
    smin = np.linalg.svd(M, compute_uv=False)[:, -1]
    with np.errstate(divide="ignore"):
        return np.where(smin > 0, np.abs(zs) / smin, np.inf)


def default_ray_grid(A: SectorialOperator, theta: float) -> RadialGrid:
    lo, hi = A.radii
    gap = max(theta - A.max_arg, 1e-3)
    feats = [(math.log(abs(l)), gap) for l in A.eigenvalues]
    return RadialGrid.graded(math.log(lo) - 12, math.log(hi) + 12, feats, max_panel=0.5, order=8)


def _ray_sup(A: SectorialOperator, angles: Sequence[float], grid: RadialGrid) -> float:
    u = grid.u
    best = 0.0
    for phi in angles:
        for sgn in ((1,) if math.isclose(phi, math.pi) else (1, -1)):
            e = np.exp(1j * sgn * phi)
            vals = _scaled_resolvent_norm(A, np.exp(u) * e)
            if not np.all(np.isfinite(vals)):
                return math.inf
            j = int(np.argmax(vals))
            v = float(vals[j])
            if 0 < j < u.size - 1:
                res = minimize_scalar(
                    lambda t: -_scaled_resolvent_norm(A, np.array([math.exp(t) * e]))[0],
                    bounds=(u[j - 1], u[j + 1]),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                v = max(v, -float(res.fun))
            best = max(best, v)
    return best


def certify_sectoriality(A: SectorialOperator, theta, ray_grid: RadialGrid | None = None) -> float:
    """Sampled ``sup |z| ||(z - A)^{-1}||`` over ``|arg z| >= theta``.

    Rays at ``theta`` and four larger angles up to ``pi`` are scanned over
    ``ray_grid`` radii; the value must saturate (change < 1e-3 relative) when
    the radial grid is doubled and widened. The constant is stored in
    ``A.c_theta[theta]``.
    """
    theta = _as_theta(theta)
    Sector(theta)
    if A.max_arg >= theta:
        raise NotSectorialError(
            f"eigenvalue with |arg| = {A.max_arg:.6f} lies outside the sector of angle {theta:.6f}"
        )
    grid = ray_grid if ray_grid is not None else default_ray_grid(A, theta)
    angles = sorted({theta, *(theta + (math.pi - theta) * k / 4 for k in range(1, 5))})
    c1 = _ray_sup(A, angles, grid)
    c2 = _ray_sup(A, angles, grid.refined().widened(4.0))
    if not (math.isfinite(c1) and math.isfinite(c2)):
        raise NotSectorialError(f"resolvent blows up outside the sector of angle {theta:.6f}")
    if abs(c2 - c1) > SATURATION_TOL * c2:
        raise NotSectorialError(
            f"resolvent sup does not saturate at angle {theta:.6f}: {c1:.6e} -> {c2:.6e}"
        )
    A.c_theta[theta] = c2
    return c2


def estimate_type_angle(A: SectorialOperator, n_angles: int = ANGLE_GRID, cap: float = C_THETA_CAP) -> float:
    """Smallest angle ``pi*k/n_angles`` whose certified ``C_theta`` stays below ``cap``.

    Angles not exceeding ``max |arg lambda|`` are skipped (spectral cross-check);
    above that, bisection uses the monotonicity of ``C_theta`` in ``theta``.
    """
    grid = [math.pi * k / n_angles for k in range(1, n_angles)]
    start = next((i for i, t in enumerate(grid) if t > A.max_arg + 1e-12), None)
    if start is None:
        raise NotSectorialError("spectrum reaches the negative real axis")

    def passes(i):
        try:
            return certify_sectoriality(A, grid[i]) <= cap
        except NotSectorialError:
            return False

    if passes(start):
        return grid[start]
    lo, hi = start, len(grid) - 1
    if not passes(hi):
        raise NotSectorialError("no angle below pi gives a bounded resolvent constant")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return grid[hi]


# ---------------------------------------------------------------------------
# graded spaces and approximation


def t_operator(A: SectorialOperator) -> np.ndarray:
    """``T_A = sqrt(A) (1 + A)^{-1}`` through the contour calculus (cached)."""
    from .contour_calculus import dunford_riesz
    from .symbols import SQRT_OVER_1P

    if "T_A" not in A._cache:
        A._cache["T_A"] = dunford_riesz(A, SQRT_OVER_1P)
    return A._cache["T_A"]


def graded_norm(A: SectorialOperator, n: int, x) -> float:
    """Norm of ``x`` in ``H_n = T_A^n H``, i.e. ``||T_A^{-n} x||``."""
    x = np.asarray(x, dtype=complex)
    n = int(n)
    if n == 0:
        return float(np.linalg.norm(x))
    T = t_operator(A)
    cond = np.linalg.cond(T) ** abs(n)
    if not np.isfinite(cond) or cond > 1e14:
        raise ResolventSingularError(f"T_A^{n} is too ill-conditioned (cond ~ {cond:.2e})")
    y = x
    for _ in range(abs(n)):
        y = np.linalg.solve(T, y) if n > 0 else T @ y
    return float(np.linalg.norm(y))


def approximate_identity(A: SectorialOperator, x, eps: float, form: str = "resolvent") -> np.ndarray:
    """``x_eps = (1 - eps^2) A (A + eps)^{-1} (1 + eps A)^{-1} x``.

    ``form="resolvent"`` uses ``eps^{-1}(A + eps^{-1})^{-1} x - eps (A + eps)^{-1} x``;
    ``form="product"`` evaluates the product directly.
    """
    if not 0 < eps < 1:
        raise InvalidInputError("eps must lie in (0, 1)")
    x = np.asarray(x, dtype=complex)
    I, M = A.identity, A.matrix
    if form == "resolvent":
        return np.linalg.solve(M + I / eps, x) / eps - eps * np.linalg.solve(M + eps * I, x)
    if form == "product":
        y = np.linalg.solve(I + eps * M, x)
        y = np.linalg.solve(M + eps * I, y)
        return (1 - eps**2) * (M @ y)
    raise InvalidInputError(f"unknown form {form!r}")


# ---------------------------------------------------------------------------
# test families

FAMILIES = ("positive_diagonal", "complex_diagonal", "jordan_shifted", "conjugated_accretive", "random_accretive")

_POSITIONAL = {
    "positive_diagonal": None,
    "complex_diagonal": None,
    "jordan_shifted": ("n", "lam", "eps"),
    "conjugated_accretive": ("n", "angle", "cond"),
    "random_accretive": ("n",),
}


def _parse_number(tok: str):
    tok = tok.strip()
    if "@" in tok:
        mod, arg = tok.split("@")
        return float(mod) * complex(math.cos(float(arg)), math.sin(float(arg)))
    try:
        return float(tok)
    except ValueError:
        return complex(tok.replace("i", "j"))


def parse_family_string(text: str) -> tuple[str, dict]:
    """``"jordan_shifted:2,1,1"`` -> ``("jordan_shifted", {"n": 2, "lam": 1, "eps": 1})``.

    Diagonal families take a value list; complex entries may be written
    ``"2@0.5"`` (modulus@argument) or ``"1+2j"``.
    """
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in FAMILIES:
        raise InvalidInputError(f"unknown family {name!r}")
    toks = [t for t in rest.split(",") if t.strip()] if rest else []
    try:
        vals = [_parse_number(t) for t in toks]
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse family parameters {rest!r}") from exc
    keys = _POSITIONAL[name]
    if keys is None:
        return name, ({"values": vals} if vals else {})
    if len(vals) > len(keys):
        raise InvalidInputError(f"{name} takes at most {len(keys)} parameters")
    return name, dict(zip(keys, vals))


def _real(v, what):
    if isinstance(v, complex):
        if v.imag != 0:
            raise InvalidInputError(f"{what} must be real")
        v = v.real
    return float(v)


def make_family(name: str, params: Mapping | Sequence | None = None, seed: int | None = None) -> SectorialOperator:
    """Deterministic test operators.

    * ``positive_diagonal(values)``
    * ``complex_diagonal(values)``: nonzero, ``|arg| < pi``
    * ``jordan_shifted(n, lam, eps)``: ``lam I + eps N`` with ``N`` the shift
    * ``conjugated_accretive(n=4, angle=pi/3, cond=100)``: ``S D S^{-1}`` with
      eigenvalue arguments ``+-angle`` and a fixed similarity of condition ``cond``
    * ``random_accretive(n=4)``: ``H + iK``, ``H`` positive definite, ``K`` Hermitian
    """
    if name not in FAMILIES:
        raise InvalidInputError(f"unknown family {name!r}")
    if params is None:
        params = {}
    if not isinstance(params, Mapping):
        keys = _POSITIONAL[name]
        params = {"values": list(params)} if keys is None else dict(zip(keys, params))
    params = dict(params)
    seed = 0 if seed is None else int(seed)
    label = {"family": name, "params": dict(params), "seed": seed}
    eig = None

    if name == "positive_diagonal":
        vals = [_real(v, "diagonal entries") for v in params.get("values", [1.0, 2.0, 3.0])]
        if not vals or min(vals) <= 0:
            raise InvalidInputError("positive_diagonal needs positive entries")
        m = np.diag(np.array(vals, dtype=complex))
        eig = np.array(vals, dtype=complex)
    elif name == "complex_diagonal":
        default = [1.0, 2 * complex(math.cos(0.8), math.sin(0.8)), 0.5 * complex(math.cos(-1.2), math.sin(-1.2))]
        vals = np.array([complex(v) for v in params.get("values", default)])
        if vals.size == 0 or np.any(vals == 0) or np.any(np.abs(np.angle(vals)) >= math.pi - 1e-12):
            raise InvalidInputError("complex_diagonal needs nonzero entries off the negative axis")
        m = np.diag(vals)
        eig = vals
    elif name == "jordan_shifted":
        n = int(_real(params.get("n", 2), "n"))
        lam = complex(params.get("lam", 1.0))
        eps = _real(params.get("eps", 1.0), "eps")
        if n < 1 or lam == 0 or abs(np.angle(lam)) >= math.pi - 1e-12:
            raise InvalidInputError("jordan_shifted needs n >= 1 and lam off the closed negative axis")
        m = lam * np.eye(n, dtype=complex) + eps * np.eye(n, k=1, dtype=complex)
        eig = np.full(n, lam)
    elif name == "conjugated_accretive":
        n = int(_real(params.get("n", 4), "n"))
        angle = _real(params.get("angle", math.pi / 3), "angle")
        cond = _real(params.get("cond", 100.0), "cond")
        if n < 1 or not 0 <= angle < math.pi / 2 or cond < 1:
            raise InvalidInputError("conjugated_accretive needs n >= 1, 0 <= angle < pi/2, cond >= 1")
        rng = np.random.default_rng(seed)
        mods = np.sort(rng.uniform(0.5, 3.0, n))
        signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        eig = mods * np.exp(1j * angle * signs)
        U, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        V, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        sv = np.geomspace(1.0, 1.0 / cond, n) if n > 1 else np.ones(1)
        S = (U * sv) @ V.conj().T
        m = S @ np.diag(eig) @ np.linalg.inv(S)
    else:
        n = int(_real(params.get("n", 4), "n"))
        if n < 1:
            raise InvalidInputError("random_accretive needs n >= 1")
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        h = rng.uniform(0.5, 4.0, n)
        H = (Q * h) @ Q.conj().T
        K = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        K = 0.5 * (K + K.conj().T)
        K *= 0.25 / max(np.linalg.norm(K, 2), 1e-300)
        m = H + 1j * K
    return from_matrix(m, label=label, eigenvalues=eig)


BUILTIN_FAMILIES = (
    ("positive_diagonal", {"values": [1.0, 2.0, 3.0]}, 0),
    ("complex_diagonal", {}, 0),
    ("jordan_shifted", {"n": 2, "lam": 1.0, "eps": 0.5}, 0),
    ("jordan_shifted", {"n": 2, "lam": 1.0, "eps": 1.0}, 0),
    ("jordan_shifted", {"n": 2, "lam": 1.0, "eps": 4.0}, 0),
    ("conjugated_accretive", {"n": 4}, 7),
    ("random_accretive", {"n": 4}, 3),
)


def builtin_operators() -> list[SectorialOperator]:
    return [make_family(name, params, seed) for name, params, seed in BUILTIN_FAMILIES]
