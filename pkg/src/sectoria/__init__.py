"""Numerical functional calculus, square functions and model spaces for sectorial matrices."""

from .contour_calculus import (
    dunford_riesz,
    extended_calculus,
    fractional_power,
    group_growth_scan,
    imaginary_power,
    logarithm_branch,
    negative_log_power,
    operator_function,
    spectral_function,
)
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
from .grids import DEFAULT_QUAD, Contour, QuadConfig, RadialGrid
from .model_spaces import (
    CharFn,
    EvalSet,
    cauchy_transform,
    control_map,
    hankel_apply,
    make_eval_set,
    observation_map,
    verify_factorization,
)
from .operator_core import (
    SectorialOperator,
    builtin_operators,
    certify_sectoriality,
    from_matrix,
    load_operator,
    make_family,
    resolvent,
)
from .report import Report
from .square_function import (
    equivalence_constants,
    gram_operator,
    log_gap_check,
    square_norm,
)
from .symbols import ScalarSymbol, get_symbol

__version__ = "0.1.0"
