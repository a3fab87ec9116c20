"""fraclap: spectral fractional Laplacians, Besov energies, and
extension-problem Dirichlet solvers on finite metric measure spaces."""

from .dirichlet import (
    DirichletProblem,
    IterSpec,
    Solution,
    harnack_quotient,
    holder_estimate,
    maximum_principle_check,
    residual_check,
    solution_to_json,
    solve_extension,
    solve_spectral,
    strong_maximum_check,
    uniqueness_check,
)
from .energy import (
    FracEnergyForm,
    besov_energy,
    comparability_report,
    frac_bilinear,
    frac_energy,
    regularized_energy,
    regularized_energy_double_sum,
    stiffness_matrix,
)
from .errors import FraclapError
from .extension import (
    ExtensionEnergy,
    ExtensionField,
    HalfSpaceGrid,
    build_grid,
    codim_ball_check,
    default_ymax,
    dtn_apply,
    dtn_constant,
    extension_energy,
    extension_energy_constant,
    field_to_csv_rows,
    mode_energy_quadrature,
    mode_profile,
    mode_profile_derivative,
    mode_profile_quadrature,
    poisson_extend,
    profile_normalization_quadrature,
    trace,
    trace_averaging_diagnostic,
    vertical_modulus,
)
from .quadrature import QuadratureSpec
from .space import (
    BallStats,
    Space,
    ball_measure,
    ball_stats,
    build_space,
    doubling_stats,
    fixture,
    space_from_json,
    space_to_json,
)
from .spectral import (
    KernelKind,
    KernelMatrix,
    SpectralDecomposition,
    decompose,
    dirichlet_form,
    frac_apply,
    frac_heat_kernel,
    heat_kernel,
    heat_kernel_series,
    laplacian_apply,
    qt_scaling_report,
    subordination_check,
)

__version__ = "0.1.0"
