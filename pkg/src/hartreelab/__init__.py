"""Truncated Wick-renormalized Hartree flow on the 3-torus: sampling, dynamics,
random averaging operators and brute-force verifiers."""

__version__ = "0.1.0"

from .lattice import FourierState, ModeSet, bracket, mode_set, project, resonance  # noqa: E402
from .params import DEFAULT_PARAMS, ParamSet, ParameterError  # noqa: E402
from .potential import (  # noqa: E402
    ETA, Potential, hartree_vector_field, make_bessel_potential, multilinear_apply,
)
from .renorm import (  # noqa: E402
    RenormConstants, gaussian_expectation_oracle, hamiltonian, potential_energy,
    renorm_constants, wick_nonlinearity,
)
from .sampling import GaussianDraw, draw_gff, pcn_step, sample_gibbs  # noqa: E402
from .dynamics import (  # noqa: E402
    Trajectory, conservation_report, dyadic_difference, evolve, integral_equation_residual,
    to_profile,
)
from .rao import (  # noqa: E402
    RAOMatrices, apply_matrices, build_H, build_M, dyadic_matrix_difference,
    paraproduct_apply, remainder, unitarity_defect,
)
from .analysis import exponent_fit, matrix_norms, sobolev_norm, xc_norm  # noqa: E402
from .tensorlab import (  # noqa: E402
    LabeledTensor, gaussian_contraction_check, partition_norm, semi_product,
    verify_merging, weighted_merge_check,
)
from .counting import (  # noqa: E402
    ResonanceQuery, enumerate_resonance_set, resonance_sweep, verify_counting_bounds,
)
