"""Sensing/communication fusion and IFF timing for ISAC-equipped UAVs."""

from .config import ScenarioConfig, format_config, parse_config, write_config
from .estimator import RangeBearingEKF
from .exceptions import (
    ConfigError,
    DomainError,
    ExperimentError,
    FilterDivergenceError,
    SingularityError,
)
from .fusion import (
    FilterState,
    FusionMetrics,
    estimate_error_variances,
    predict,
    run_fusion_trial,
    sensing_improvement_ratio,
    update,
)
from .iff_protocol import (
    IffNode,
    TimingBudget,
    isac_iff_time,
    separated_iff_time,
    simulate_exchange,
    sweep_reduction,
    time_reduction_ratio,
    total_identification_time,
)
from .kinematics import (
    Maneuver,
    MotionProfile,
    ObserverPose,
    TargetState,
    generate_trajectory,
    motion_jacobian,
    propagate_state,
)
from .measurement import (
    MeasurementNoise,
    ProcessNoise,
    RadarMeasurement,
    measurement_jacobian,
    observe,
    sample_noisy_measurement,
    target_position_from_measurement,
)

__version__ = "0.1.0"
