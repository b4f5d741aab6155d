"""Continuous-discrete Kalman filtering toolkit.

Stationary linear KF (DARE-based), continuous-discrete EKF and UKF over
models with additive constant diffusion, a second-order glucose/insulin/CHO
linear plant, synthetic-data simulators, self-contained dense matrix
kernels, and a micro-benchmark harness for them.
"""

from .matrix import (
    Matrix,
    NotPositiveDefiniteError,
    ShapeError,
    cholesky_lower,
    frobenius_norm,
    mat_add,
    mat_exp,
    mat_mul,
    mat_scale,
    mat_sub,
    mat_transpose,
    solve_spd,
    symmetrize,
)
from .models import (
    ContinuousLinearRealization,
    DiscreteLinearModel,
    InputSchedule,
    IntegrationError,
    SdeModel,
    SimResult,
    TransferParams,
    build_glucose_model,
    diffusion_gramian,
    discretize_zoh,
    euler_maruyama,
    realize_second_order,
    simulate_linear,
    wrap_linear_as_sde,
)
from .filters import (
    DareConvergenceError,
    FilterBundle,
    FilterState,
    Innovation,
    StationaryGain,
    StepResult,
    UkfConfig,
    UkfMeasurementStats,
    UkfWeights,
    ekf_predict,
    ekf_update,
    kf_predict,
    kf_update,
    run_filter,
    solve_dare,
    stationary_gain,
    ukf_measurement_stats,
    ukf_predict,
    ukf_sigma_points,
    ukf_update,
    ukf_weights,
)
from .rng import Rng

__version__ = "0.1.0"
