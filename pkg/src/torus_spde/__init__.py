"""Spectral toolbox for the 3D-torus stochastic Euler/Navier-Stokes system
with transport and transport-stretching noise.

The package has three layers:

* band-limited Fourier fields and exact spectral operators
  (``fields``, ``operators``, ``norms``),
* numerical verification of the closed noise estimates and operator
  identities (``estimates``),
* a Galerkin SDE integrator with energy/stopping monitors and a seeded,
  deterministic experiment CLI (``solver``, ``cli``).
"""

from .errors import (
    AliasingError,
    ConfigError,
    ContractViolationError,
    InvalidFieldError,
    SchemeMismatchError,
    TorusSpdeError,
)
from .estimates import (
    NOISE_KINDS,
    NORM_KINDS,
    EstimatePairValues,
    EstimateReport,
    IdentityCheck,
    IdentityReport,
    closure_scan,
    closure_scan_multi,
    estimate_pair,
    identity_suite,
    nonlinear_ratio,
    reports_to_csv,
    stokes_inner_expansion,
)
from .fields import (
    FieldSpec,
    FourierField,
    derivative,
    eval_grid,
    field_from_json_dict,
    field_to_json_dict,
    inner_l2,
    mode_pair_field,
    multiply,
    random_field,
    wavenumber_grids,
)
from .norms import sobolev_inner, sobolev_norm, stokes_inner, winf_norm, wkinf_norm
from .operators import (
    b_op,
    galerkin_project,
    leray,
    mixed_commutator_rhs,
    nonlinear,
    stokes_pow,
    stretch,
    stretch_adjoint,
    stretch_transport_commutator_rhs,
    transport,
)
from .solver import (
    BrownianPath,
    NoiseEnsemble,
    SolverConfig,
    TrajectoryRecord,
    apply_noise_op,
    energy_balance_residual,
    ito_drift,
    simulate,
    step_ito_em,
    step_rk4,
    step_strato_heun,
)
from .utils import effective_threads, substream

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "BrownianPath",
    "ConfigError",
    "ContractViolationError",
    "EstimatePairValues",
    "EstimateReport",
    "FieldSpec",
    "FourierField",
    "IdentityCheck",
    "IdentityReport",
    "InvalidFieldError",
    "NOISE_KINDS",
    "NORM_KINDS",
    "NoiseEnsemble",
    "SchemeMismatchError",
    "SolverConfig",
    "TorusSpdeError",
    "TrajectoryRecord",
    "apply_noise_op",
    "b_op",
    "closure_scan",
    "closure_scan_multi",
    "derivative",
    "effective_threads",
    "energy_balance_residual",
    "estimate_pair",
    "eval_grid",
    "field_from_json_dict",
    "field_to_json_dict",
    "galerkin_project",
    "identity_suite",
    "inner_l2",
    "ito_drift",
    "leray",
    "mixed_commutator_rhs",
    "mode_pair_field",
    "multiply",
    "nonlinear",
    "nonlinear_ratio",
    "random_field",
    "reports_to_csv",
    "simulate",
    "sobolev_inner",
    "sobolev_norm",
    "stokes_inner",
    "stokes_inner_expansion",
    "stokes_pow",
    "step_ito_em",
    "step_rk4",
    "step_strato_heun",
    "stretch",
    "stretch_adjoint",
    "stretch_transport_commutator_rhs",
    "substream",
    "transport",
    "wavenumber_grids",
    "winf_norm",
    "wkinf_norm",
]
