"""jetcert: exact structural-rank certification for prolonged adjoint flow
systems.

The library symbolically builds the adjoint of an incompressible-flow
linearization around an explicit polynomial trajectory, eliminates the
adjoint pressure, differentiates the resulting three-equation system to a
prescribed depth, and certifies with exact arithmetic that the evaluated
coefficient matrix contains an invertible square block whose rows touch no
column outside the block.  That block is what turns the prolonged system
into an explicit solution operator for the six first-order derivatives of
the two primary unknowns.
"""

__version__ = "0.1.0"

from .multiindex import (
    MultiIndex,
    count_E,
    count_F,
    count_G,
    count_H,
    index_of,
    multiindex_of,
    subset_encode,
)
from .poly import DerivationParams, Poly, derive_space, derive_time, evaluate
from .system import (
    Equation,
    TrajectoryFields,
    build_adjoint_system,
    build_eliminated_system,
    build_trajectory,
    crosscheck_explicit_system,
    derive_equation,
    eliminate_pressure,
    verify_trajectory_pde,
)
from .prolong import PolyMatrix, build_main_matrix, prolong, stats, submatrix_blocks
from .structural import (
    DmResult,
    RatMatrix,
    dm_decompose,
    evaluate_matrix,
    extract_pqr,
    null_columns,
    sprank,
    target_column_check,
)
from .modrank import (
    PrimeField,
    RankCertificate,
    certify_full_rank,
    rank_mod_p,
    rank_rational,
)
from .pipeline import DEFAULT_POINT, REFERENCE, run_certify
