"""Holevo capacity of two-qubit noisy channels with memory, asymmetry and state-bias."""
from .capacity import (
    CapacityResult,
    ChiResult,
    LimitCase,
    chi_for_basis,
    f_closed_form,
    limit_relation_residual,
    optimize_capacity,
    sweep_capacity,
)
from .channel import (
    ChannelParams,
    Liouvillian,
    NoisyChannel,
    RateMatrices,
    apply_channel,
    build_liouvillian,
    params_from_rates,
    propagate,
    rates_from_params,
)
from .errors import ConstraintError, DomainError, NumericalError, UndefinedRatioError
from .pulse import (
    CorrelationFn,
    PulseSpec,
    RateTrajectory,
    compute_rate,
    effective_params,
    propagate_with_trajectory,
    rate_trajectory,
)
from .qcore import (
    BELL,
    COMBINED,
    FACTORIZED,
    BasisParams,
    DensityMatrix,
    Ensemble,
    PureState,
    holevo_chi,
    make_basis,
    pure_to_density,
    von_neumann_entropy,
)

__version__ = "0.1.0"
