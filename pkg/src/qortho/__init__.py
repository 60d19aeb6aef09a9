"""q-orthogonal polynomials on the lattice +-q^k, the model Riemann-Hilbert
series solution, and numerical checks of their large-degree asymptotics."""

__version__ = "0.1.0"

from .errors import (
    DegenerateMeasureError,
    DomainError,
    InadmissibleWeightError,
    NonConvergenceError,
    NumericFailure,
    PoleProximityError,
    QOrthoError,
    ResonanceError,
    TableMissError,
    TruncationError,
)
from .numerics import PrecisionPolicy, geometric_tail_terms, required_bits
from .qcalc import (
    LatticeFn,
    QParams,
    f_fn,
    g_fn,
    g_n_fn,
    h_alpha,
    jackson_one_sided,
    jackson_two_sided,
    pochhammer_fin,
    pochhammer_inf,
)
from .weights import WeightSpec, check_admissibility, eval_weight, fold_one_sided, load_user_table, parse_weight
from .orthopoly import (
    MomentTable,
    RecurrenceTable,
    build_recurrence,
    eval_poly,
    hankel_oracle,
    moments,
    orthogonality_residual,
    recurrence_stieltjes,
    smallest_positive_zero,
)
from .modelrhp import (
    ModelSolution,
    SeriesSolution,
    build_model,
    build_series_A,
    build_series_B,
    build_series_C,
    compute_C0,
    connection_residual,
    normalize_det,
    qhermite_limit_check,
    residue_at,
)
from .verify import (
    AsymptoticReport,
    predict_a,
    predict_gamma,
    theorem2_report,
)
