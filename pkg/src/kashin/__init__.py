"""Almost-Euclidean sections of the cross-polytope from O(N) random bits.

Builds an n x N random sign matrix A = A1 * A2 (k-wise independent
entries Hadamard-multiplied with expander-walk rows) from an exactly
metered bit budget of k*ceil(log2(nN+1)) + 4*ceil(log2(N+1)) + 3(n-1)
bits, and certifies that on the kernel E = Ker A the l1 norm stays
comparable to sqrt(N) times the l2 norm.
"""

from .bits import BitSource, derive_seed
from .builder import (BuildReport, BuildResult, SignMatrix, bit_budget, build,
                      build_a1, build_a2, default_k, hadamard, read_sgnm,
                      rows_for, write_sgnm)
from .expander import (ExpanderGraph, LambdaEstimate, estimate_lambda,
                       hitting_bound, hitting_probability_exact, lambda_exact,
                       neighbors, transition_matrix, walk, walk_ensemble)
from .kwise import (IRREDUCIBLE_POLY, KwiseGenerator, gf_mul, kwise_expand,
                    sign_table, verify_kwise_exhaustive)
from .linalg import (KernelBasis, kernel_basis, operator_norm, ratio,
                     read_basis, write_basis)
from .verify import (AntiConcentrationReport, DistortionReport, TailReport,
                     check_opnorm_tail, estimate_distortion,
                     hitting_domination_check, paley_zygmund_check,
                     single_vector_test)

__version__ = "0.1.0"

__all__ = [
    "BitSource", "derive_seed",
    "BuildReport", "BuildResult", "SignMatrix", "bit_budget", "build",
    "build_a1", "build_a2", "default_k", "hadamard", "read_sgnm", "rows_for",
    "write_sgnm",
    "ExpanderGraph", "LambdaEstimate", "estimate_lambda", "hitting_bound",
    "hitting_probability_exact", "lambda_exact", "neighbors",
    "transition_matrix", "walk", "walk_ensemble",
    "IRREDUCIBLE_POLY", "KwiseGenerator", "gf_mul", "kwise_expand",
    "sign_table", "verify_kwise_exhaustive",
    "KernelBasis", "kernel_basis", "operator_norm", "ratio", "read_basis",
    "write_basis",
    "AntiConcentrationReport", "DistortionReport", "TailReport",
    "check_opnorm_tail", "estimate_distortion", "hitting_domination_check",
    "paley_zygmund_check", "single_vector_test",
    "__version__",
]
