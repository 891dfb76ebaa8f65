"""Coercivity and Riccati certification for linear-quadratic systems.

The package decides, for deterministic plants ``x' = A x + B u`` and Ito
plants ``dx = (A x + B u) dt + N x dw`` with quadratic (possibly
indefinite) costs, whether the zero-initial-state cost functional is
coercive over the admissible controls, and certifies the answer three
independent ways: a frequency-domain scan, an algebraic Riccati solve and
a time-domain discretized quadratic form (plus Monte Carlo validation for
the stochastic side).
"""

from .coercivity import (
    CoercivityCertificate,
    DiscretizedCost,
    SteeringControl,
    WitnessControl,
    check_coercivity,
    discretize_cost,
    fourier_check,
    resonance_witness,
    steering_control,
    witness_to_csv,
)
from .exceptions import (
    DimensionError,
    GainBracketError,
    IterationError,
    KypcertError,
    NotViolatingError,
    PoleOnGridError,
    SolveError,
    StabilizationError,
    SubspaceError,
    SystemFileError,
    UnreachableTargetError,
)
from .frequency import (
    CostWeight,
    FrequencyScan,
    default_grid,
    fdc_scan,
    popov,
    scan_to_csv,
    shift_weight,
    strict_margin,
)
from .linmat import (
    finite_gramian,
    hermitian_part,
    matexp,
    pinv,
    solve_glyap,
    solve_lyapunov,
)
from .riccati_det import RiccatiReport, are_residual, newton_kleinman, solve_are
from .sim import (
    CostEstimate,
    EmpiricalMsReport,
    MomentTrajectory,
    SimConfig,
    empirical_ms_check,
    estimate_cost,
    mix64,
    moments_to_csv,
    simulate,
)
from .stability import (
    LinearPlant,
    StochPlant,
    certify_stabilizable_stoch,
    is_stabilizable_det,
    ms_abscissa,
    ms_lift,
    spectral_abscissa,
    stabilize_det,
)
from .stoch_lq import (
    StochCoercivityReport,
    brl_margin,
    coercivity_stoch,
    input_state_gain,
    normalize_cost,
    solve_stoch_riccati,
    solve_wonham,
    split_weight,
    stoch_riccati_residual,
)

__version__ = "0.1.0"
