"""Log-radius quadrature grids and sector-boundary contours.

Every radial integral in the package is taken in the variable ``u = log r``,
so ``dr/r`` becomes ``du`` and power-law tails become exponential tails.
Grids are composite Gauss-Legendre rules whose panel widths shrink near
"features": points ``u_f`` where the integrand has a complex singularity at
distance ``d_f`` from the real ``u`` axis (an eigenvalue near the ray, a pole
of a test function, an evaluation point).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidInputError


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature knobs.

    ``tail_tol`` fixes how far past the last feature the log-radius range
    extends; ``tol`` and ``max_doublings`` drive adaptive refinement.
    ``u_min``/``u_max``/``n0`` override the automatic range and the initial
    node count per ray.
    """

    tail_tol: float = 1e-13
    tol: float = 1e-9
    max_doublings: int = 6
    order: int = 16
    max_panel: float = 1.0
    u_min: float | None = None
    u_max: float | None = None
    n0: int | None = None

    def __post_init__(self):
        if not (0 < self.tail_tol < 1):
            raise InvalidInputError("quad.tail_tol must be in (0, 1)")
        if self.tol <= 0:
            raise InvalidInputError("quad.tol must be positive")
        if self.max_doublings < 0:
            raise InvalidInputError("quad.max_doublings must be >= 0")
        if self.order < 2:
            raise InvalidInputError("quad.order must be >= 2")
        if self.n0 is not None and self.n0 < self.order:
            raise InvalidInputError("quad.n0 must be at least quad.order")

    @property
    def log_tail(self) -> float:
        return -math.log(self.tail_tol)

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "QuadConfig":
        """Build from ``{"quad.u_min": ..., "quad.tol": ...}`` style keys."""
        kwargs = {}
        for key, value in cfg.items():
            if not key.startswith("quad."):
                continue
            name = key[5:]
            if name not in cls.__dataclass_fields__:
                raise InvalidInputError(f"unknown quadrature key {key!r}")
            kwargs[name] = value
        return cls(**kwargs)


DEFAULT_QUAD = QuadConfig()


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite Gauss-Legendre rule on ``[u_min, u_max]`` in ``u = log r``.

    ``weights`` integrate ``dr/r``; multiply by ``nodes`` to integrate ``dr``.
    """

    breakpoints: np.ndarray
    order: int = 16
    u: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise InvalidInputError("breakpoints must be strictly increasing")
        x, w = _gauss_legendre(self.order)
        half = 0.5 * np.diff(bp)
        mid = 0.5 * (bp[1:] + bp[:-1])
        u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        for arr in (bp, u, weights):
            arr.setflags(write=False)
        nodes = np.exp(u)
        nodes.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "nodes", nodes)

    @property
    def u_min(self) -> float:
        return float(self.breakpoints[0])

    @property
    def u_max(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_nodes(self) -> int:
        return self.u.size

    @property
    def n_panels(self) -> int:
        return self.breakpoints.size - 1

    @classmethod
    def uniform(cls, u_min: float, u_max: float, n_panels: int, order: int = 16) -> "RadialGrid":
        if not u_min < u_max:
            raise InvalidInputError("u_min must be below u_max")
        if n_panels < 1:
            raise InvalidInputError("need at least one panel")
        return cls(np.linspace(u_min, u_max, n_panels + 1), order)

    @classmethod
    def graded(
        cls,
        u_min: float,
        u_max: float,
        features: Iterable[tuple[float, float]] = (),
        max_panel: float = 1.0,
        order: int = 16,
        grading: float = 0.5,
    ) -> "RadialGrid":
        """Panels no wider than the distance to the nearest feature singularity.

        Each feature ``(u_f, d_f)`` is a complex singularity at ``u_f + i d_f``.
        Panel width at ``u`` is ``min(max_panel, max(d_f, grading*|u-u_f|))``
        minimised over features, so GL nodes stay inside the analyticity strip.
        """
        if not u_min < u_max:
            raise InvalidInputError("u_min must be below u_max")
        feats = [(float(uf), max(float(df), 1e-4)) for uf, df in features]
        uf = np.array([f[0] for f in feats]) if feats else np.zeros(0)
        df = np.array([f[1] for f in feats]) if feats else np.zeros(0)

        def width(x):
            if uf.size == 0:
                return max_panel
            return min(max_panel, float(np.min(np.maximum(df, grading * np.abs(x - uf)))))

        bps = [u_min]
        x = u_min
        while True:
            h = width(x)
            # look ahead so a panel never steps over a feature's fine zone
            h = min(h, width(x + h)) if uf.size else h
            if x + h >= u_max - 0.25 * h:
                break
            x += h
            bps.append(x)
        bps.append(u_max)
        return cls(np.array(bps), order)

    def refined(self) -> "RadialGrid":
        """Split every panel in two (doubles the node count)."""
        bp = self.breakpoints
        mid = 0.5 * (bp[1:] + bp[:-1])
        new = np.empty(bp.size + mid.size)
        new[0::2] = bp
        new[1::2] = mid
        return RadialGrid(new, self.order)

    def widened(self, extra: float) -> "RadialGrid":
        """Same interior panels plus uniform panels covering ``extra`` more on each side."""
        bp = self.breakpoints
        h = float(np.max(np.diff(bp)))
        n = max(1, int(math.ceil(extra / h)))
        left = bp[0] - h * np.arange(n, 0, -1)
        right = bp[-1] + h * np.arange(1, n + 1)
        return RadialGrid(np.concatenate([left, bp, right]), self.order)

    def describe(self) -> dict:
        return {
            "u_min": self.u_min,
            "u_max": self.u_max,
            "n_nodes": self.n_nodes,
            "n_panels": self.n_panels,
            "order": self.order,
        }


@dataclass(frozen=True, eq=False)
class Contour:
    """Boundary of the sector ``|arg z| <= theta`` traversed with the sector on the left.

    Down the upper ray (from infinity to 0), then out along the lower ray.
    ``points`` lists the upper-ray nodes first (decreasing radius), then the
    lower-ray nodes (increasing radius); ``dz`` are the complex weights so that
    ``sum(F(points) * dz)`` approximates the oriented line integral.
    """

    theta: float
    grid: RadialGrid
    orientation: str = "sector_on_left"
    points: np.ndarray = field(init=False, repr=False)
    dz: np.ndarray = field(init=False, repr=False)
    abs_dz: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 < self.theta <= math.pi):
            raise InvalidInputError("contour angle must lie in (0, pi]")
        r = self.grid.nodes[::-1]
        w = self.grid.weights[::-1]
        up = np.exp(1j * self.theta)
        lo = np.exp(-1j * self.theta)
        points = np.concatenate([r * up, self.grid.nodes * lo])
        dz = np.concatenate([-up * r * w, lo * self.grid.nodes * self.grid.weights])
        abs_dz = np.abs(dz)
        for arr in (points, dz, abs_dz):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "dz", dz)
        object.__setattr__(self, "abs_dz", abs_dz)

    @property
    def n_nodes(self) -> int:
        return self.points.size

    def mirror_index(self) -> np.ndarray:
        """Index ``m`` with ``points[m[j]] == conj(points[j])``."""
        n = self.grid.n_nodes
        return np.concatenate([np.arange(2 * n - 1, n - 1, -1), np.arange(n - 1, -1, -1)])

    def refined(self) -> "Contour":
        return Contour(self.theta, self.grid.refined(), self.orientation)

    def key(self) -> tuple:
        return (round(self.theta, 15), self.grid.breakpoints.tobytes(), self.grid.order)

    def describe(self) -> dict:
        return {"theta": self.theta, "orientation": self.orientation, **self.grid.describe()}
