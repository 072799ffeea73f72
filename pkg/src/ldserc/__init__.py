"""LD-derivative sensitivities and rank tests for nonsmooth ODE models."""

from .errors import (
    DivergenceError,
    DomainError,
    IntegrationError,
    InvalidInputError,
    LDSercError,
    ModelError,
    PreconditionError,
)
from .ldcore import (
    DirectionsMatrix,
    LDVector,
    extract_l_derivative,
    fsign,
    ld_abs,
    ld_max,
    ld_mid,
    ld_min,
    lshift,
    slmax,
    taylor_approx,
    taylor_decay_ok,
    taylor_residual_profile,
)
from .lserc import (
    AlgoConfig,
    AlgoReport,
    LSercMatrix,
    ProbeResult,
    algorithm1,
    build_lserc,
    format_report,
    natural_directions,
    natural_test,
    probe,
    rss_quadratic,
    singular_perturbations,
    twin_direction,
)
from .modelkit import ModelSpec, builtin, parse_model, serialize_model
from .sensint import Grid, SensitivityTrajectory, integrate_reference, integrate_sensitivity

__version__ = "0.1.0"
