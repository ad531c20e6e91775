"""Moving-mesh finite elements for one-dimensional gradient-flow PDEs.

Both the nodal values and the interior node positions of a piecewise-linear
function evolve jointly so that the discrete energy decreases along the flow;
the mesh follows kinks and layers of the solution on its own.
"""

from .analysis import (
    ErrorReport,
    OrderTable,
    energy_error,
    h1_error,
    l2_error,
    orders,
    sigma_n_oracle,
)
from .assembly import (
    BandedMatrix,
    BlockSystem,
    Tridiagonal,
    assemble,
    block_system,
    coupling_matrix,
    mass_matrix,
    position_matrix,
    solve,
)
from .energy import (
    GradReport,
    SimState,
    energy,
    fd_gradient,
    grad_positions,
    grad_values,
    gradient_report,
    penalty_energy,
)
from .exceptions import (
    ConfigError,
    DegenerateMeshError,
    DomainError,
    MoveFemError,
    NotPositiveDefiniteError,
    PartitionError,
    StepFloorError,
    UnknownPresetError,
)
from .integrator import RunConfig, StepStats, Trajectory, run, run_frozen_mesh, step
from .mesh import (
    DegeneracyReport,
    FreeKnotFn,
    Partition,
    degeneracy_report,
    hat_basis,
    interpolate,
    make_uniform_partition,
    min_gap,
    position_sensitivity,
)
from .problems import (
    ExactSolution,
    Preset,
    ProblemSpec,
    ReactionTerm,
    SourceTerm,
    preset,
    preset_names,
    reaction_allen_cahn,
    strong_form_residual,
)

__version__ = "0.1.0"

__all__ = [
    "BandedMatrix",
    "BlockSystem",
    "ConfigError",
    "DegeneracyReport",
    "DegenerateMeshError",
    "DomainError",
    "ErrorReport",
    "ExactSolution",
    "FreeKnotFn",
    "GradReport",
    "MoveFemError",
    "NotPositiveDefiniteError",
    "OrderTable",
    "Partition",
    "PartitionError",
    "Preset",
    "ProblemSpec",
    "ReactionTerm",
    "RunConfig",
    "SimState",
    "SourceTerm",
    "StepFloorError",
    "StepStats",
    "Trajectory",
    "Tridiagonal",
    "UnknownPresetError",
    "assemble",
    "block_system",
    "coupling_matrix",
    "degeneracy_report",
    "energy",
    "energy_error",
    "fd_gradient",
    "grad_positions",
    "grad_values",
    "gradient_report",
    "h1_error",
    "hat_basis",
    "interpolate",
    "l2_error",
    "make_uniform_partition",
    "mass_matrix",
    "min_gap",
    "orders",
    "penalty_energy",
    "position_matrix",
    "position_sensitivity",
    "preset",
    "preset_names",
    "reaction_allen_cahn",
    "run",
    "run_frozen_mesh",
    "sigma_n_oracle",
    "solve",
    "step",
    "strong_form_residual",
]
