"""``sectoria`` command line: certify | calc | sqnorm | model | sweep.

Exit codes: 0 when every mandatory check passes, 1 when a check fails,
2 on invalid input. JSON reports are written with sorted keys; the only
run-dependent field is ``timestamp``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Sequence

import numpy as np

from . import contour_calculus as cc
from . import model_spaces as ms
from . import operator_core as oc
from . import square_function as sf
from .errors import (
    DegenerateGramError,
    InvalidInputError,
    MarginError,
    NotSectorialError,
    QuadratureError,
    ResolventSingularError,
    SectoriaError,
    SingularOperatorError,
)
from .grids import DEFAULT_QUAD, QuadConfig
from .report import Report, _jsonable
from .symbols import get_symbol

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2
CSV_COLUMNS = (
    "family",
    "param",
    "value",
    "theta",
    "kappa",
    "m",
    "M",
    "log_gap_c1",
    "log_gap_c_lower",
    "log_gap_C",
    "factorization_residual",
    "pass",
)
_INVALID = (InvalidInputError, MarginError, SingularOperatorError)


@dataclass
class RunConfig:
    matrix: str | None = None
    family: str | dict | None = None
    theta: float | None = None
    alpha: list = field(default_factory=lambda: [0.5])
    k: int = 1
    r: float = 0.6
    tol: float | None = None
    seed: int = 0
    out: str | None = None
    symbol: str = "sqrt_over_1p"
    param: str | None = None
    values: list | None = None
    thetas: list | None = None
    quad: QuadConfig = DEFAULT_QUAD

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise InvalidInputError("tolerances must be positive")
        if any(not a > 0 for a in self.alpha):
            raise InvalidInputError("alpha values must be positive")

    def operator(self) -> oc.SectorialOperator:
        if (self.matrix is None) == (self.family is None):
            raise InvalidInputError("give exactly one of --matrix or --family")
        if self.matrix is not None:
            return oc.load_operator(self.matrix, seed=self.seed)
        if isinstance(self.family, dict):
            return oc.load_operator({"family": self.family.get("name"), **self.family}, seed=self.seed)
        name, params = oc.parse_family_string(self.family)
        return oc.make_family(name, params, seed=self.seed)

    def family_parts(self) -> tuple[str, dict]:
        if isinstance(self.family, dict):
            return self.family.get("name"), dict(self.family.get("params", {}))
        return oc.parse_family_string(self.family)


@dataclass
class SuiteReport:
    suite: str
    reports: list
    environment: dict
    operator_spec: Any = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "suite": self.suite,
                "operator_spec": self.operator_spec,
                "pass": self.passed,
                "reports": [r.to_dict() for r in self.reports],
                "environment": self.environment,
            }
        )


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str | Sequence | None) -> list | None:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse number list {text!r}") from exc


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SECTORIA_THREADS", "1")))
    except ValueError:
        return 1


def run_ordered(tasks: Sequence[Callable[[], Any]]) -> list:
    """Run callables on up to ``SECTORIA_THREADS`` threads; results keep task order."""
    n = _threads()
    if n == 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sectoria-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _failed(check: str, exc: Exception, **params) -> Report:
    return Report(check=check, passed=False, params=params, notes=[f"{type(exc).__name__}: {exc}"])


def _guard(check: str, fn: Callable[[], Report], **params) -> Report:
    """Turn numerical failures into failed reports; invalid input propagates."""
    try:
        return fn()
    except _INVALID:
        raise
    except (QuadratureError, ResolventSingularError, DegenerateGramError, NotSectorialError) as exc:
        return _failed(check, exc, **params)


def _rel_err(value: np.ndarray, oracle: np.ndarray) -> float:
    """Relative Frobenius error, absolute when the oracle has norm below one."""
    return float(np.linalg.norm(value - oracle) / max(np.linalg.norm(oracle), 1.0))


def _seeded_vector(dim: int, seed: int, salt: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, salt])
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# commands


def cmd_certify(cfg: RunConfig) -> SuiteReport:
    A = cfg.operator()
    theta = cfg.theta if cfg.theta is not None else 0.5 * (A.omega_est + math.pi)

    def run():
        c = oc.certify_sectoriality(A, theta)
        return Report(
            check="sectoriality",
            passed=bool(math.isfinite(c)),
            constants={"omega_est": A.omega_est, "c_theta": c, "max_arg": A.max_arg},
            params={"theta": theta},
            operator_spec=A.spec(),
        )

    rep = _guard("sectoriality", run, theta=theta)
    return SuiteReport("certify", [rep], {"seed": cfg.seed}, A.spec())


def cmd_calc(cfg: RunConfig) -> SuiteReport:
    A = cfg.operator()
    sym = get_symbol(cfg.symbol)
    tol = cfg.tol if cfg.tol is not None else 1e-7

    def run():
        F = cc.operator_function(A, sym, cfg.quad)
        try:
            oracle = cc.spectral_function(A, sym)
            method = "spectral"
        except InvalidInputError:
            theta2 = 0.5 * (max(A.omega_est, A.max_arg) + cc.default_contour_angle(A, sym.sup_angle))
            oracle = cc.operator_function(A, sym, cfg.quad, theta=theta2)
            method = "second_contour_angle"
        err = _rel_err(F, oracle)
        return Report(
            check="calculus",
            passed=bool(err <= tol),
            residuals={"error": err},
            constants={"value": F},
            params={"symbol": sym.name, "tol": tol, "oracle": method},
            operator_spec=A.spec(),
        )

    rep = _guard("calculus", run, symbol=sym.name)
    return SuiteReport("calc", [rep], {"seed": cfg.seed}, A.spec())


def cmd_sqnorm(cfg: RunConfig) -> SuiteReport:
    A = cfg.operator()
    q = cfg.quad
    tol = cfg.tol if cfg.tol is not None else 1e-4
    x = _seeded_vector(A.dim, cfg.seed, 1)

    def gram():
        G = sf.gram_operator(A, cfg.symbol, cfg=q)
        gap = sf.equivalence_constants(G)
        return Report(
            check="gram",
            passed=bool(np.isfinite(gap.kappa)),
            residuals={"refine_change": G.refine_change},
            constants=gap.as_dict(),
            params={"psi": G.psi_name},
            grid=G.describe(),
            operator_spec=A.spec(),
        )

    def admissibility():
        if A.omega_est >= 0.5 * math.pi:
            return Report("admissibility", True, params={"weight": [cfg.k, cfg.r]},
                          notes=["skipped: type angle is not below pi/2"], operator_spec=A.spec())
        return sf.admissibility_check(A, (cfg.k, cfg.r), cfg=q)

    tasks = [
        lambda: _guard("gram", gram),
        lambda: _guard("psi_independence", lambda: sf.psi_independence_check(A, cfg=q)),
        lambda: _guard("mcintosh_identity", lambda: sf.mcintosh_identity_check(A, x, tol=tol, cfg=q)),
        lambda: _guard("log_gap", lambda: sf.log_gap_check(A, cfg.k, cfg.r, seed=cfg.seed, cfg=q)),
        lambda: _guard("admissibility", admissibility),
    ]
    # Gram matrices are cached on the operator, so build the shared one first.
    reports = [tasks[0]()] + [t() for t in tasks[1:]]
    return SuiteReport("sqnorm", reports, {"seed": cfg.seed, "k": cfg.k, "r": cfg.r}, A.spec())


def _model_theta(A: oc.SectorialOperator, cfg: RunConfig) -> float:
    if cfg.theta is not None:
        return float(cfg.theta)
    return max(2.0, 0.5 * (A.omega_est + math.pi))


def cmd_model(cfg: RunConfig) -> SuiteReport:
    A = cfg.operator()
    q = cfg.quad
    theta = _model_theta(A, cfg)
    tol = cfg.tol if cfg.tol is not None else 1e-4
    alphas = [a for a in cfg.alpha if a * theta < math.pi]
    if not alphas:
        raise InvalidInputError("every alpha violates alpha*theta < pi")
    ev = ms.make_eval_set(A, theta)
    kernel_alpha = next((a for a in alphas if a * theta < 0.5 * math.pi), 0.45 * math.pi / theta)
    x = _seeded_vector(A.dim, cfg.seed, 2)
    y = _seeded_vector(A.dim, cfg.seed, 3)
    lam_ext = complex(ev.exterior_points[0])
    indep_alphas = sorted(set(alphas) | {a for a in (0.3, 0.5) if a * theta < math.pi})

    def pairing():
        mu, nu = -1.5 + 0.5j, complex(A.radii[1] * 1.3)
        f = ms.resolvent_function(mu, x)
        g = ms.rational_function([nu], [y])
        val = ms.boundary_pairing(f, g, theta=theta, A=A, cfg=q)
        oracle = complex(np.vdot(y, x) / (mu - np.conj(nu)))
        err = abs(val - oracle) / max(abs(oracle), 1e-300)
        return Report("boundary_pairing", bool(err <= tol), {"relative": err},
                      {"value": val, "residue_value": oracle}, {"theta": theta, "tol": tol})

    tasks = [
        *[
            (lambda a=a: _guard("factorization", lambda: ms.verify_factorization(A, theta, a, eval_set=ev, tol=tol, cfg=q)))
            for a in alphas
        ],
        lambda: _guard("alpha_independence", lambda: ms.alpha_independence_check(A, theta, indep_alphas, eval_set=ev, tol=tol, cfg=q)),
        lambda: _guard("kernel_membership", lambda: ms.kernel_membership_check(A, theta, kernel_alpha, tol=tol, cfg=q)),
        lambda: _guard("char_fn_spectrum", lambda: ms.char_fn_spectrum_check(ms.CharFn(A, kernel_alpha))),
        lambda: _guard("obs_intertwining", lambda: ms.obs_intertwining_check(A, x, -1.0, ev.exterior_points[1:])),
        lambda: _guard(
            "ctr_intertwining",
            lambda: ms.ctr_intertwining_check(A, ms.resolvent_function(-2.0, x), lam_ext, theta, cfg=q),
        ),
        lambda: _guard("duality", lambda: sf.duality_check(A, x, y, tol=tol, cfg=q)),
        lambda: _guard("boundary_pairing", pairing),
    ]
    reports = run_ordered(tasks)
    env = {"seed": cfg.seed, "theta": theta, "alphas": alphas, "eval_set": ev.to_dict()}
    return SuiteReport("model", reports, env, A.spec())


def _sweep_operator(cfg: RunConfig, value: float | None) -> oc.SectorialOperator:
    if value is None:
        return cfg.operator()
    if cfg.family is None or cfg.param is None:
        raise InvalidInputError("a parameter sweep needs --family and --param")
    name, params = cfg.family_parts()
    if "values" in params or name in ("positive_diagonal", "complex_diagonal"):
        raise InvalidInputError(f"family {name} has no scalar parameter to sweep")
    params[cfg.param] = value
    return oc.make_family(name, params, seed=cfg.seed)


def sweep_rows(cfg: RunConfig) -> list[dict]:
    values = cfg.values
    thetas = cfg.thetas
    if values is not None and len(values) == 0 or thetas is not None and len(thetas) == 0:
        raise InvalidInputError("empty sweep range")
    if values is None and thetas is None:
        raise InvalidInputError("sweep needs --values and/or --thetas")
    tol = cfg.tol if cfg.tol is not None else 1e-4
    alpha = cfg.alpha[0]

    def one(value):
        A = _sweep_operator(cfg, value)
        gap = sf.equivalence_constants(sf.gram_operator(A, cfg=cfg.quad))
        lg = sf.log_gap_check(A, cfg.k, cfg.r, seed=cfg.seed, cfg=cfg.quad)
        rows = []
        for th in thetas if thetas is not None else [_model_theta(A, cfg)]:
            try:
                ev = ms.make_eval_set(A, max(thetas) if thetas else th)
                fr = ms.verify_factorization(A, th, alpha, eval_set=ev, tol=tol, cfg=cfg.quad)
                resid, ok = fr.residuals["max_relative"], fr.passed
            except (QuadratureError, ResolventSingularError):
                resid, ok = math.nan, False
            rows.append(
                {
                    "family": A.label.get("family", "matrix") if isinstance(A.label, dict) else "matrix",
                    "param": cfg.param or "",
                    "value": "" if value is None else value,
                    "theta": th,
                    "kappa": gap.kappa,
                    "m": gap.m,
                    "M": gap.M,
                    "log_gap_c1": lg.constants["c1"],
                    "log_gap_c_lower": lg.constants["c_lower"],
                    "log_gap_C": lg.constants["C"],
                    "factorization_residual": resid,
                    "pass": bool(ok and lg.passed),
                }
            )
        return rows

    tasks = [(lambda v=v: one(v)) for v in (values if values is not None else [None])]
    return [row for block in run_ordered(tasks) for row in block]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sectoria", description="Numerical checks for sectorial matrices.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--matrix", help="JSON matrix file {dim, entries}")
    common.add_argument("--family", help="family spec, e.g. jordan_shifted:2,1,1")
    common.add_argument("--theta", type=float)
    common.add_argument("--alpha", help="comma-separated alpha values")
    common.add_argument("--k", type=int)
    common.add_argument("--r", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--config", help="JSON config; command-line flags take precedence")
    for name in ("certify", "sqnorm", "model"):
        sub.add_parser(name, parents=[common])
    calc = sub.add_parser("calc", parents=[common])
    calc.add_argument("--symbol", help="registry name, e.g. z_pow:0.5")
    sweep = sub.add_parser("sweep", parents=[common])
    sweep.add_argument("--param", help="family parameter to vary (e.g. eps)")
    sweep.add_argument("--values", help="comma-separated parameter values")
    sweep.add_argument("--thetas", help="comma-separated boundary angles")
    return p


def make_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidInputError("config must be a JSON object")
    quad = QuadConfig.from_mapping({k: v for k, v in data.items() if k.startswith("quad.")})
    merged = {k: v for k, v in data.items() if not k.startswith("quad.")}
    for key in ("matrix", "family", "theta", "alpha", "k", "r", "tol", "seed", "out", "symbol", "param", "values", "thetas"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    unknown = set(merged) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    for key in ("alpha", "values", "thetas"):
        if key in merged:
            merged[key] = _floats(merged[key])
    return RunConfig(quad=quad, **merged)


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = make_config(args)
        if args.command == "sweep":
            rows = sweep_rows(cfg)
            _emit(rows_to_csv(rows), cfg.out)
            return EXIT_OK if all(r["pass"] for r in rows) else EXIT_FAIL
        command = {"certify": cmd_certify, "calc": cmd_calc, "sqnorm": cmd_sqnorm, "model": cmd_model}[args.command]
        suite = command(cfg)
    except _INVALID as exc:
        print(f"sectoria: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SectoriaError as exc:
        print(f"sectoria: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    payload = suite.to_dict()
    payload["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", cfg.out)
    return EXIT_OK if suite.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
