"""roughwave: desk-scale numerical harness for rough singular integrals,
sparse bilinear forms, Orlicz averages, Muckenhoupt weights, and their
endpoint inequalities on a uniform 2-D grid."""

from .dyadic import (
    Cube,
    DyadicLattice,
    SparseFamily,
    cubes_containing,
    standard_lattices,
    three_lattice_cover,
    verify_sparse,
)
from .grid import Domain, GridFunction, integrate, lp_norm, superlevel_measure
from .kernel import (
    KernelPiece,
    Mollifier,
    PartitionBump,
    RoughKernel,
    build_all_pieces,
    build_kernel_piece,
    difference_kernel,
    evaluate_omega,
    mollified_kernel,
)
from .operators import (
    OperatorHandle,
    TruncationGrid,
    commutator_maximal,
    difference_sup,
    grand_maximal,
    hl_maximal,
    lacunary_maximal,
    lacunary_mollified,
    maximal_truncation,
    mollified_operator,
    rearrangement,
    sharp_maximal,
    singular_integral,
    truncated_integral,
)
from .orlicz import YoungFunction, check_refinement_inequality, luxemburg_norm, orlicz_maximal
from .czd import CZDecomposition, aggregate, cz_decompose, cz_report
from .sparse import SparseBuildParams, bilinear_form, build_sparse_family, domination_ratio
from .weights import Weight, a1_constant, ainf_constant, ap_constant, parse_weight
from .verify import CHECKS, FitReport, make_corpus

__version__ = "0.1.0"
