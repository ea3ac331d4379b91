"""Scale functions and exit laws for spectrally negative Levy processes
under state-dependent killing rates.

The entry points most callers need:

* model descriptions: BrownianDrift, CramerLundberg, Tabulated
* killing-rate specifications: ConstantOmega, BandOmega, LinearBandOmega,
  ExponentialOmega, StepOmega, TableOmega
* solvers: build_w_omega, build_h_omega, build_two_arg, two_arg_panel
* functionals: exit_a, exit_b, one_sided_down, one_sided_up, reflected_up,
  reflected_dual, and the resolvent_* occupation densities
* Monte Carlo cross-checks: SimConfig plus the simulate_* routines
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    GuardViolationError,
    NonFiniteError,
    OmegaScaleError,
    UnsupportedModelError,
)
from .levy_model import (
    BrownianDrift,
    CramerLundberg,
    Tabulated,
    phi_inverse,
    phi_prime,
    psi,
    psi_prime,
)
from .classical_scale import (
    ScaleTable,
    build_scale_table,
    load_phi_table,
    load_scale_table,
    w_atom,
    w_q,
    w_q_prime,
    z_q,
)
from .volterra import Grid, richardson_order
from .omega_scale import (
    BandOmega,
    ConstantOmega,
    ExponentialOmega,
    LimitConstants,
    LinearBandOmega,
    OmegaScaleTable,
    OmegaSpec,
    StepOmega,
    TableOmega,
    TwoArgPanel,
    TwoArgScale,
    build_h_omega,
    build_two_arg,
    build_w_omega,
    convergence_order,
    derivative_via_convolution,
    derivatives,
    limit_constants,
    two_arg_panel,
)
from .fluctuation import (
    OneSidedDown,
    ResolventDensity,
    exit_a,
    exit_b,
    one_sided_down,
    one_sided_up,
    reflected_dual,
    reflected_up,
    resolvent_l,
    resolvent_l_hat,
    resolvent_theta,
    resolvent_u,
    resolvent_xi,
)
from .mc_oracle import (
    MCEstimate,
    SimConfig,
    simulate_bankruptcy,
    simulate_exit,
    simulate_one_sided_up,
    simulate_reflected,
)

__version__ = "0.1.0"

__all__ = [
    "BandOmega",
    "BrownianDrift",
    "ConfigError",
    "ConstantOmega",
    "ConvergenceError",
    "CramerLundberg",
    "DomainError",
    "ExponentialOmega",
    "Grid",
    "GuardViolationError",
    "LimitConstants",
    "LinearBandOmega",
    "MCEstimate",
    "NonFiniteError",
    "OmegaScaleError",
    "OmegaScaleTable",
    "OmegaSpec",
    "OneSidedDown",
    "ResolventDensity",
    "ScaleTable",
    "SimConfig",
    "StepOmega",
    "Tabulated",
    "TableOmega",
    "TwoArgPanel",
    "TwoArgScale",
    "UnsupportedModelError",
    "build_h_omega",
    "build_scale_table",
    "build_two_arg",
    "build_w_omega",
    "convergence_order",
    "derivative_via_convolution",
    "derivatives",
    "exit_a",
    "exit_b",
    "limit_constants",
    "load_phi_table",
    "load_scale_table",
    "one_sided_down",
    "one_sided_up",
    "phi_inverse",
    "phi_prime",
    "psi",
    "psi_prime",
    "reflected_dual",
    "reflected_up",
    "resolvent_l",
    "resolvent_l_hat",
    "resolvent_theta",
    "resolvent_u",
    "resolvent_xi",
    "richardson_order",
    "simulate_bankruptcy",
    "simulate_exit",
    "simulate_one_sided_up",
    "simulate_reflected",
    "two_arg_panel",
    "w_atom",
    "w_q",
    "w_q_prime",
    "z_q",
]
