"""Scalar holomorphic symbols and the by-name registry used by the CLI."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError

PI = math.pi


def principal_log(z):
    """Log with argument in ``[-pi, pi)``."""
    z = np.asarray(z, dtype=complex)
    out = np.log(z)
    on_cut = out.imag >= PI
    if np.any(on_cut):
        out = np.where(on_cut, out - 2j * PI, out)
    return out


def principal_power(z, a):
    """``z**a`` on the principal branch, ``1**a == 1``; ``0**a == 0`` for Re a > 0."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(a * principal_log(z))
    if np.ndim(out) == 0:
        return out if z != 0 else np.complex128(0.0)
    return np.where(z == 0, 0.0, out)


@dataclass(frozen=True)
class ScalarSymbol:
    """A holomorphic function on an open sector with its decay metadata.

    ``s`` is the declared Psi-class exponent (``|f(w)| <~ |w|^s / (1+|w|^{2s})``)
    or ``None``. ``growth = (a0, ainf)`` gives the power behaviour ``|f| ~ r^a0``
    near zero and ``r^ainf`` near infinity; it decides quadrature ranges and
    how strongly the regulariser must damp ``f``. ``sup_angle`` bounds the
    open sector where ``f`` is holomorphic.
    """

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    s: float | None = None
    sup_angle: float = PI
    growth: tuple[float, float] = (0.0, 0.0)
    log_growth: bool = False

    def __call__(self, z):
        return self.evaluator(np.asarray(z, dtype=complex))

    def __mul__(self, other: "ScalarSymbol") -> "ScalarSymbol":
        f, g = self.evaluator, other.evaluator
        s = None if (self.s is None or other.s is None) else self.s + other.s
        return ScalarSymbol(
            name=f"({self.name})*({other.name})",
            evaluator=lambda z: f(z) * g(z),
            s=s,
            sup_angle=min(self.sup_angle, other.sup_angle),
            growth=(self.growth[0] + other.growth[0], self.growth[1] + other.growth[1]),
            log_growth=self.log_growth or other.log_growth,
        )

    @property
    def is_psi(self) -> bool:
        return self.s is not None and self.s > 0


def psi_symbol(name, evaluator, s, sup_angle=PI) -> ScalarSymbol:
    return ScalarSymbol(name, evaluator, s=s, sup_angle=sup_angle, growth=(s, -s))


def _sqrt_over_1p(z):
    return principal_power(z, 0.5) / (1 + z)


def _z_over_1pz2(z):
    return z / (1 + z) ** 2


SQRT_OVER_1P = psi_symbol("sqrt_over_1p", _sqrt_over_1p, 0.5)
Z_OVER_1PZ2 = psi_symbol("z_over_1pz2", _z_over_1pz2, 1.0)
PHI = psi_symbol("phi", _z_over_1pz2, 1.0)
SQRT2Z_EXP = psi_symbol(
    "sqrt2z_exp", lambda z: principal_power(2 * z, 0.5) * np.exp(-z), 0.5, sup_angle=PI / 2
)
ONE = ScalarSymbol("one", lambda z: np.ones_like(z))
LOG = ScalarSymbol("log", principal_log, log_growth=True)
ZERO = ScalarSymbol("zero", lambda z: np.zeros_like(z), s=1.0, growth=(1.0, -1.0))


def z_pow(alpha: float) -> ScalarSymbol:
    alpha = float(alpha)
    return ScalarSymbol(
        f"z_pow:{alpha:g}", lambda z: principal_power(z, alpha), growth=(alpha, alpha)
    )


def z_ipow(s: float) -> ScalarSymbol:
    s = float(s)
    return ScalarSymbol(f"z_ipow:{s:g}", lambda z: principal_power(z, 1j * s))


def log_branch(k: int) -> ScalarSymbol:
    """``Lambda_k(z) = Log z + 2 k pi i``."""
    k = int(k)
    return ScalarSymbol(
        f"log_k:{k}", lambda z: principal_log(z) + 2j * PI * k, log_growth=True
    )


def log_pow(k: int, r: float) -> ScalarSymbol:
    """``Lambda_k(z)**(-r)`` (principal power); bounded on sectors for ``k != 0``."""
    k, r = int(k), float(r)

    def f(z):
        return principal_power(principal_log(z) + 2j * PI * k, -r)

    return ScalarSymbol(f"log_pow:{k},{r:g}", f, log_growth=True)


def gamma_kernel(alpha: float, z: complex) -> Callable:
    """``w -> alpha (w^a + z^a) / (w^a - z^a)``, the scalar kernel of the inverse characteristic function."""
    za = principal_power(complex(z), alpha)

    def g(w):
        wa = principal_power(w, alpha)
        return alpha * (wa + za) / (wa - za)

    return g


_PARAM = re.compile(r"^(z_pow|z_ipow|log_pow|log_k):(.+)$")

_FIXED = {
    "sqrt_over_1p": SQRT_OVER_1P,
    "z_over_1pz2": Z_OVER_1PZ2,
    "phi": PHI,
    "log": LOG,
    "one": ONE,
    "zero": ZERO,
    "sqrt2z_exp": SQRT2Z_EXP,
}

REGISTRY_NAMES = ("sqrt_over_1p", "z_over_1pz2", "phi", "z_pow:{alpha}", "log", "z_ipow:{s}")


def get_symbol(name: str | ScalarSymbol) -> ScalarSymbol:
    """Look up a symbol by registry name, e.g. ``"z_pow:0.5"`` or ``"log_pow:1,0.6"``."""
    if isinstance(name, ScalarSymbol):
        return name
    name = name.strip()
    if name in _FIXED:
        return _FIXED[name]
    m = _PARAM.match(name)
    if not m:
        raise InvalidInputError(f"unknown symbol {name!r}")
    kind, arg = m.groups()
    try:
        if kind == "z_pow":
            return z_pow(float(arg))
        if kind == "z_ipow":
            return z_ipow(float(arg))
        if kind == "log_k":
            return log_branch(int(arg))
        k, r = arg.split(",")
        return log_pow(int(k), float(r))
    except ValueError as exc:
        raise InvalidInputError(f"bad parameters in symbol {name!r}") from exc
