"""Asymmetric switch processes: simulation, Laplace-domain characteristics,
Monte Carlo estimation and recovery of switching-time laws."""

from .characteristics import (
    CharacteristicSet,
    build_characteristics,
    covariance,
    curve,
    r_second_derivative_mixture,
    variance_D,
    verify_relations,
)
from .errors import *  # noqa: F401,F403
from .estimators import EstimateTable, estimate_E, estimate_pmf_N, estimate_R, smooth_derivative
from .laplace import (
    GridFunction,
    TransformFn,
    complete_monotonicity_probe,
    derivative_transform,
    invert,
    laplace_of_cdf,
    numeric_forward,
)
from .laws import (
    FirstAttemptSpec,
    GeometricDivisibleSpec,
    SwitchingLaw,
    law_from_dict,
    law_to_dict,
    make_common_divisor,
    make_exponential,
    make_first_attempt,
    make_first_attempt_pair,
    make_gamma,
    make_geometric_divisible,
    make_scaled_common_divisor,
    size_biased_split_sampler,
)
from .process import (
    ProcessSpec,
    StationaryInit,
    Trajectory,
    count_switches,
    delays_at,
    pmf_N_oracle,
    sample_stationary_init,
    simulate_nonstationary,
    simulate_stationary,
    simulate_two_sided,
    value_at,
)
from .recovery import (
    RecoveredPair,
    cycle_representation_check,
    extract_divisors,
    invert_expected_values,
    rebuild_switching_laws,
    recover_from_transforms,
    validate_pair,
)

__version__ = "0.1.0"
