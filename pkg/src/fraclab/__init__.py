"""Spectral fractional operators (-div(A grad))^s on intervals and rectangles,
their extension problem, quadratic functionals, and comparison-theorem checks."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import (  # noqa: F401
    Grid,
    MatrixCoefficient,
    ScalarCoefficient,
    AssembledOperator,
    build_interval_grid,
    build_rectangle_grid,
    assemble,
    assemble_stiffness,
    weighted_mass,
)
from .spectral import (  # noqa: F401
    SpectralDecomposition,
    eigendecompose,
    jacobi_eigh,
    project,
    reconstruct,
    heat_apply,
    heat_kernel,
    heat_kernel_matrix,
)
from .fractional import (  # noqa: F401
    gamma,
    FracPower,
    QuadratureConfig,
    frac_apply,
    frac_apply_semigroup,
    spectral_power,
    modal_potential,
    frac_schroedinger_spectrum,
)
from .extension import (  # noqa: F401
    YLadder,
    ExtensionField,
    make_ladder,
    trace_constant,
    kernel_profile,
    extend_spectral,
    extend_direct,
    neumann_trace,
    weighted_energy,
)
from .picone import (  # noqa: F401
    CylinderCoefficient,
    FunctionalReport,
    ManufacturedField,
    functional_M,
    functional_V,
    variation_direct,
    picone_residual,
    rayleigh_min,
)
from .comparison import (  # noqa: F401
    ProblemPair,
    check_hypotheses,
    calibrate,
    nodal_report,
    run_comparison,
    run_leighton,
    random_pair,
)
from .radial import (  # noqa: F401
    RadialODE,
    TransformedODE,
    OscillationEvidence,
    radial_reduce,
    liouville_transform,
    integrate_prufer,
    oscillation_classify,
    sturm_compare,
)
